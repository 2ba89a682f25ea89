#ifndef CTRAK_DIFFUSION_HPP
#define CTRAK_DIFFUSION_HPP

#include <optional>
#include <vector>

#include "ctrak/data.hpp"
#include "ctrak/model.hpp"
#include "ctrak/schedule.hpp"

namespace ctrak {

NoisyState forward_noise(const Vec& x0, int t, const Vec& eps, const NoiseSchedule& sched);

Vec predict_x0(const NoisyState& state, const Vec& eps_pred, const NoiseSchedule& sched);

NoisyState ddim_step(const NoisyState& state, const Vec& eps_pred, int t_next,
                     const NoiseSchedule& sched);

// Uniformly spaced timestep grid T = s_0 > s_1 > ... > s_n = 0.
std::vector<int> sampling_step_list(int T, int n_steps);
// Increasing grid 0 = s_0 < ... < s_m = t_target, spaced like an n_steps grid over [0, T].
std::vector<int> inversion_step_list(int T, int n_steps, int t_target);

// Classifier-free guidance: eps = eps(null) + scale * (eps(cond) - eps(null)).
struct GuidanceSpec {
    double scale = 1.0;
};

Vec guided_eps(const DenoiserModel& model, const Vec& xt, int t, Condition cond,
               const std::optional<GuidanceSpec>& guidance);

// Deterministic DDIM trajectory along a strictly decreasing step list starting
// at steps.front(). Returns one state per step-list entry; the last element is
// the generated sample.
std::vector<NoisyState> ddim_sample(const DenoiserModel& model, Condition cond, const Vec& xT,
                                    const std::vector<int>& steps, const NoiseSchedule& sched,
                                    const std::optional<GuidanceSpec>& guidance = std::nullopt);

// Naive deterministic inversion: eps is predicted at the current latent while
// stepping up the increasing list to t_target.
NoisyState ddim_invert(const DenoiserModel& model, Condition cond, const Vec& x0, int t_target,
                       const std::vector<int>& steps, const NoiseSchedule& sched);

double dsm_loss(const DenoiserModel& model, const Vec& x0, Condition cond, int t, const Vec& eps,
                const NoiseSchedule& sched);

}  // namespace ctrak

#endif
