#include "ctrak/projector.hpp"

#include <cmath>

#include "ctrak/rng.hpp"

namespace ctrak {

std::string to_string(ProjDist dist) {
    return dist == ProjDist::Rademacher ? "rademacher" : "gaussian";
}

ProjDist proj_dist_from_string(const std::string& s) {
    if (s == "rademacher") return ProjDist::Rademacher;
    if (s == "gaussian") return ProjDist::Gaussian;
    throw ConfigError("unknown projection distribution: '" + s +
                      "' (expected rademacher or gaussian)");
}

namespace {

// One standard normal from two hashed uniforms.
inline double hashed_normal(std::uint64_t seed, std::uint64_t counter) {
    double u1 = static_cast<double>(hash_u64(seed, 2 * counter) >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(hash_u64(seed, 2 * counter + 1) >> 11) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace

Vec project(const Projector& proj, const Vec& g) {
    require(proj.k >= 1 && proj.d >= 1, "project: projector not initialized");
    require(proj.k <= proj.d, "project: k must not exceed d");
    require(g.size() == proj.d, "project: gradient dimension mismatch");

    Vec out = Vec::Zero(proj.k);
    double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(proj.k));

    if (proj.dist == ProjDist::Rademacher) {
        // Signs are packed 64 per hash word, row-major: word index
        // i * words_per_row + w covers columns [64w, 64w + 63] of row i.
        int words_per_row = (proj.k + 63) / 64;
        for (std::int64_t i = 0; i < proj.d; ++i) {
            double gi = g[i];
            if (gi == 0.0) continue;
            std::uint64_t base = static_cast<std::uint64_t>(i) *
                                 static_cast<std::uint64_t>(words_per_row);
            for (int w = 0; w < words_per_row; ++w) {
                std::uint64_t bits = hash_u64(proj.seed, base + static_cast<std::uint64_t>(w));
                int j0 = 64 * w;
                int jmax = std::min(64, proj.k - j0);
                double* dst = out.data() + j0;
                for (int b = 0; b < jmax; ++b) {
                    dst[b] += ((bits >> b) & 1u) ? gi : -gi;
                }
            }
        }
    } else {
        for (std::int64_t i = 0; i < proj.d; ++i) {
            double gi = g[i];
            if (gi == 0.0) continue;
            std::uint64_t base = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(proj.k);
            for (int j = 0; j < proj.k; ++j)
                out[j] += gi * hashed_normal(proj.seed, base + static_cast<std::uint64_t>(j));
        }
    }
    out *= inv_sqrt_k;
    return out;
}

}  // namespace ctrak
