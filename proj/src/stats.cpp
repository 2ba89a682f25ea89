#include "ctrak/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ctrak {

std::vector<double> rank_with_ties(const std::vector<double>& values) {
    std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman_rho: need two equal-length samples of size >= 2");
    std::vector<double> ra = rank_with_ties(a);
    std::vector<double> rb = rank_with_ties(b);
    double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double da = ra[i] - ma;
        double db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

double mann_whitney_p(const std::vector<double>& high, const std::vector<double>& low) {
    std::size_t n1 = high.size(), n2 = low.size();
    if (n1 == 0 || n2 == 0)
        throw std::invalid_argument("mann_whitney_p: both samples must be non-empty");

    std::vector<double> all;
    all.reserve(n1 + n2);
    all.insert(all.end(), high.begin(), high.end());
    all.insert(all.end(), low.begin(), low.end());
    std::vector<double> ranks = rank_with_ties(all);

    double r1 = 0;
    for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];
    double u1 = r1 - static_cast<double>(n1) * (static_cast<double>(n1) + 1) / 2.0;

    double n = static_cast<double>(n1 + n2);
    double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;

    // Tie correction on the variance.
    double tie_term = 0;
    std::sort(all.begin(), all.end());
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1] == all[i]) ++j;
        double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    double sigma2 = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                    ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (sigma2 <= 0.0) return 1.0;

    // Continuity-corrected one-sided z.
    double z = (u1 - mu - 0.5) / std::sqrt(sigma2);
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace ctrak
