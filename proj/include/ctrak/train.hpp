#ifndef CTRAK_TRAIN_HPP
#define CTRAK_TRAIN_HPP

#include <cstdint>
#include <vector>

#include "ctrak/diffusion.hpp"
#include "ctrak/model.hpp"

namespace ctrak {

struct OptimizerConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int steps = 2000;
    int batch = 64;
    double p_uncond = 0.1;  // condition dropout for classifier-free capability
};

// A new condition-table row learned against a frozen base model.
struct LearnedToken {
    Vec embedding;
    int token_id = -1;  // row index in cond_table, always > n_concepts
    std::vector<std::int64_t> exemplar_ids;
};

// Minibatch DSM training with Adam. Bit-reproducible given (seed, data order,
// config): every random draw comes from one ordered stream, and gradient
// accumulation reduces fixed-size chunks in index order regardless of jobs.
DenoiserModel train_base(DenoiserModel model, const std::vector<DataPoint>& data,
                         const OptimizerConfig& cfg, const NoiseSchedule& sched,
                         std::uint64_t seed, int jobs = 1,
                         std::vector<double>* loss_curve = nullptr);

// Appends a fresh zero row to the condition table and trains only that row on
// the exemplars' DSM loss. All pre-existing parameters stay untouched.
LearnedToken invert_token(DenoiserModel& model, const std::vector<DataPoint>& exemplars,
                          const OptimizerConfig& cfg, const NoiseSchedule& sched,
                          std::uint64_t seed);

// Single-exemplar inversion used for local concept attribution.
LearnedToken invert_local_token(DenoiserModel& model, const Vec& generated,
                                const OptimizerConfig& cfg, const NoiseSchedule& sched,
                                std::uint64_t seed);

}  // namespace ctrak

#endif
