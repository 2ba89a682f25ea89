#ifndef CTRAK_PROJECTOR_HPP
#define CTRAK_PROJECTOR_HPP

#include <cstdint>
#include <string>

#include "ctrak/common.hpp"

namespace ctrak {

enum class ProjDist : std::uint8_t { Rademacher = 0, Gaussian = 1 };

std::string to_string(ProjDist dist);
ProjDist proj_dist_from_string(const std::string& s);

// Random projection P in R^{d x k} with entries scaled by 1/sqrt(k).
// Entries are generated from a counter-based hash of (seed, position), so any
// block of P is regenerable without ever materializing the matrix.
struct Projector {
    std::uint64_t seed = 0;
    std::int64_t d = 0;
    int k = 0;
    ProjDist dist = ProjDist::Rademacher;
};

// P^T g; streaming over rows of P, memory O(k).
Vec project(const Projector& proj, const Vec& g);

}  // namespace ctrak

#endif
