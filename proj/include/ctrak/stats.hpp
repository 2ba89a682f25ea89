#ifndef CTRAK_STATS_HPP
#define CTRAK_STATS_HPP

#include <vector>

namespace ctrak {

// Average ranks, ties shared.
std::vector<double> rank_with_ties(const std::vector<double>& values);

// Spearman rank correlation of two equal-length samples.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

// One-sided Mann-Whitney U test that `high` stochastically dominates `low`.
// Normal approximation with tie correction; returns the p-value.
double mann_whitney_p(const std::vector<double>& high, const std::vector<double>& low);

}  // namespace ctrak

#endif
