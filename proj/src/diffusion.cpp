#include "ctrak/diffusion.hpp"

#include <cmath>

namespace ctrak {

NoisyState forward_noise(const Vec& x0, int t, const Vec& eps, const NoiseSchedule& sched) {
    require(t >= 1 && t <= sched.T, "forward_noise: t must lie in [1, T]");
    require(eps.size() == x0.size(), "forward_noise: eps dimension mismatch");
    double abar = sched.abar(t);
    NoisyState s;
    s.t = t;
    s.xt = std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps;
    return s;
}

Vec predict_x0(const NoisyState& state, const Vec& eps_pred, const NoiseSchedule& sched) {
    require(eps_pred.size() == state.xt.size(), "predict_x0: eps_pred dimension mismatch");
    double abar = sched.abar(state.t);
    if (abar <= 0.0)
        throw NumericalError("predict_x0: alpha_bar <= 0 at t=" + std::to_string(state.t));
    return (state.xt - std::sqrt(1.0 - abar) * eps_pred) / std::sqrt(abar);
}

NoisyState ddim_step(const NoisyState& state, const Vec& eps_pred, int t_next,
                     const NoiseSchedule& sched) {
    require(t_next >= 0 && t_next <= sched.T, "ddim_step: t_next out of range");
    Vec x0hat = predict_x0(state, eps_pred, sched);
    double abar_next = sched.abar(t_next);
    NoisyState out;
    out.t = t_next;
    out.xt = std::sqrt(abar_next) * x0hat + std::sqrt(1.0 - abar_next) * eps_pred;
    return out;
}

std::vector<int> sampling_step_list(int T, int n_steps) {
    require(T >= 1 && n_steps >= 1, "sampling_step_list: bad arguments");
    n_steps = std::min(n_steps, T);
    std::vector<int> steps;
    steps.reserve(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i) {
        int t = static_cast<int>(std::llround(static_cast<double>(T) * (n_steps - i) / n_steps));
        if (steps.empty() || t < steps.back()) steps.push_back(t);
    }
    return steps;
}

std::vector<int> inversion_step_list(int T, int n_steps, int t_target) {
    require(t_target >= 0 && t_target <= T, "inversion_step_list: t_target out of range");
    std::vector<int> down = sampling_step_list(T, n_steps);
    std::vector<int> up;
    up.push_back(0);
    for (auto it = down.rbegin(); it != down.rend(); ++it) {
        if (*it > 0 && *it < t_target && *it > up.back()) up.push_back(*it);
    }
    if (t_target > up.back()) up.push_back(t_target);
    return up;
}

Vec guided_eps(const DenoiserModel& model, const Vec& xt, int t, Condition cond,
               const std::optional<GuidanceSpec>& guidance) {
    if (!guidance) return eps_forward(model, xt, t, cond);
    Vec eps_null = eps_forward(model, xt, t, kNullCond);
    Vec eps_cond = eps_forward(model, xt, t, cond);
    return eps_null + guidance->scale * (eps_cond - eps_null);
}

std::vector<NoisyState> ddim_sample(const DenoiserModel& model, Condition cond, const Vec& xT,
                                    const std::vector<int>& steps, const NoiseSchedule& sched,
                                    const std::optional<GuidanceSpec>& guidance) {
    require(steps.size() >= 2, "ddim_sample: step list needs at least two entries");
    for (std::size_t i = 1; i < steps.size(); ++i)
        require(steps[i] < steps[i - 1], "ddim_sample: step list must be strictly decreasing");
    require(steps.front() <= sched.T && steps.back() >= 0, "ddim_sample: steps out of range");

    std::vector<NoisyState> traj;
    traj.reserve(steps.size());
    traj.push_back({xT, steps.front()});
    for (std::size_t i = 1; i < steps.size(); ++i) {
        const NoisyState& cur = traj.back();
        Vec eps = guided_eps(model, cur.xt, cur.t, cond, guidance);
        traj.push_back(ddim_step(cur, eps, steps[i], sched));
    }
    return traj;
}

NoisyState ddim_invert(const DenoiserModel& model, Condition cond, const Vec& x0, int t_target,
                       const std::vector<int>& steps, const NoiseSchedule& sched) {
    require(!steps.empty() && steps.front() == 0, "ddim_invert: step list must start at 0");
    for (std::size_t i = 1; i < steps.size(); ++i)
        require(steps[i] > steps[i - 1], "ddim_invert: step list must be strictly increasing");
    require(steps.back() == t_target, "ddim_invert: step list must end at t_target");

    NoisyState cur{x0, 0};
    for (std::size_t i = 1; i < steps.size(); ++i) {
        Vec eps = eps_forward(model, cur.xt, cur.t, cond);
        cur = ddim_step(cur, eps, steps[i], sched);
    }
    return cur;
}

double dsm_loss(const DenoiserModel& model, const Vec& x0, Condition cond, int t, const Vec& eps,
                const NoiseSchedule& sched) {
    NoisyState state = forward_noise(x0, t, eps, sched);
    Vec pred = eps_forward(model, state.xt, t, cond);
    return (eps - pred).squaredNorm();
}

}  // namespace ctrak
