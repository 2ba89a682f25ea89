#ifndef CTRAK_GRADIENTS_HPP
#define CTRAK_GRADIENTS_HPP

#include <cstdint>
#include <functional>
#include <string>

#include "ctrak/guidance.hpp"

namespace ctrak {

enum class LossKind : std::uint8_t {
    Dsm = 0,
    Dps = 1,
    Dtrak = 2,
    RewardDps = 3,
    Preference = 4,
};

std::string to_string(LossKind kind);

// Mean of per-timestep parameter gradients. With normalized=true each kept
// per-timestep gradient was scaled to unit L2 norm before the 1/N average;
// gradients below the drop threshold are skipped and counted.
struct AggregatedGradient {
    Vec g;
    int n_timesteps = 0;
    bool normalized = false;
    std::string source;
    int n_dropped = 0;
    bool degenerate = false;  // every per-timestep gradient was dropped
};

struct TrainGradOptions {
    bool normalize = false;
    bool use_ddim_inversion = true;
    int inv_steps = 50;           // DDIM grid used inside the inversion
    double w = 1.0;               // DPS upweight scale (ignored when normalize is on)
    DpsScaleMode scale_mode = DpsScaleMode::SqrtOneMinusAbar;
    double drop_eps = 1e-12;
    std::uint64_t seed = 0;       // noise draws when inversion is off
};

struct UtilityGradOptions {
    bool normalize = false;
    int sample_steps = 50;        // DDIM grid for rolling trajectories
    double cfg_scale = 1.0;       // classifier-free scale for the rollout
    double drop_eps = 1e-12;
};

// Loss of the materialized stop-gradient target ||eps_target - eps_theta||^2
// and its parameter gradient.
double stop_gradient_loss_grad(const DenoiserModel& model, const NoisyState& state, Condition cond,
                               const Vec& eps_target, Vec& grad);

// Per-timestep gradient of one guidance vector at one latent, through the
// stop-gradient loss.
Vec guidance_param_gradient(const DenoiserModel& model, const NoisyState& state, Condition cond,
                            const GuidanceVector& guidance);

// Training gradient over the uniform grid t = nT/N with deterministic latents
// (DDIM inversion) or seeded forward noising.
AggregatedGradient dps_train_gradient(const DenoiserModel& model, const Vec& x0i, Condition cond,
                                      int n_timesteps, const NoiseSchedule& sched,
                                      const TrainGradOptions& opts);

AggregatedGradient dsm_train_gradient_baseline(const DenoiserModel& model, const Vec& x0i,
                                               Condition cond, int n_draws,
                                               const NoiseSchedule& sched, std::uint64_t seed,
                                               bool normalize = false);

AggregatedGradient dtrak_gradient_baseline(const DenoiserModel& model, const Vec& x0i,
                                           Condition cond, int n_draws, const NoiseSchedule& sched,
                                           std::uint64_t seed, bool normalize = false);

// Plug-in reward: supplies delta(x_t, t) plus a descriptor for reports.
struct RewardProvider {
    std::function<GuidanceVector(const NoisyState&)> guidance;
    std::string descriptor;
};

RewardProvider make_slider_provider(const DenoiserModel& model, const ConceptTrio& trio,
                                    bool unit_scale);
RewardProvider make_external_provider(const DenoiserModel& model, Condition cond,
                                      const NoiseSchedule& sched, const X0ScalarHead& reward,
                                      double beta_inv, bool unit_scale);

// Utility gradient over N latents drawn uniformly from an existing rollout
// (trajectory states with t >= 1).
AggregatedGradient utility_gradient_from_trajectory(const DenoiserModel& model,
                                                    const RewardProvider& provider,
                                                    const std::vector<NoisyState>& trajectory,
                                                    Condition cond, int n_timesteps,
                                                    std::uint64_t seed, bool normalize,
                                                    double drop_eps = 1e-12);

// Full Reward-DPS utility gradient: M seeded rollouts, N random timesteps
// each, aggregated over all M*N draws.
AggregatedGradient reward_dps_utility_gradient(const DenoiserModel& model,
                                               const RewardProvider& provider, Condition cond,
                                               int n_trajectories, int n_timesteps,
                                               const NoiseSchedule& sched, std::uint64_t seed,
                                               const UtilityGradOptions& opts);

// Implicit-reward utility gradient from a preference pair: both images are
// noised with shared draws and the four-term guidance is applied at the
// preferred sample's latent.
AggregatedGradient preference_utility_gradient(const DenoiserModel& model,
                                               const PreferencePair& pair, Condition cond,
                                               int n_draws, const NoiseSchedule& sched,
                                               std::uint64_t seed, bool normalize = false);

}  // namespace ctrak

#endif
