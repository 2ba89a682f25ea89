#include "ctrak/guidance.hpp"

#include <cmath>

namespace ctrak {

std::string to_string(GuidanceKind kind) {
    switch (kind) {
        case GuidanceKind::Dps: return "dps";
        case GuidanceKind::Slider: return "slider";
        case GuidanceKind::External: return "external";
        case GuidanceKind::Preference: return "preference";
        case GuidanceKind::DsmResidual: return "dsm-residual";
    }
    return "?";
}

X0ScalarHead squared_distance_head(const Vec& target) {
    X0ScalarHead head;
    head.descriptor = "squared-distance";
    head.fn = [target](const Vec& x0hat, Vec& grad) {
        Vec diff = x0hat - target;
        grad = 2.0 * diff;
        return diff.squaredNorm();
    };
    return head;
}

GuidanceVector external_reward_guidance(const DenoiserModel& model, const NoisyState& state,
                                        Condition cond, const NoiseSchedule& sched,
                                        const X0ScalarHead& reward, double beta_inv) {
    Vec grad_r = grad_input(model, state, cond, sched, reward);
    GuidanceVector g;
    g.kind = GuidanceKind::External;
    g.t = state.t;
    g.delta = -beta_inv * grad_r;
    if (!g.delta.allFinite())
        throw NumericalError("external_reward_guidance: non-finite gradient at t=" +
                             std::to_string(state.t) + " (reward: " + reward.descriptor + ")");
    return g;
}

GuidanceVector dps_guidance(const DenoiserModel& model, const Vec& x0i, const NoisyState& state,
                            Condition cond, const NoiseSchedule& sched, double w,
                            DpsScaleMode mode) {
    require(x0i.size() == state.xt.size(), "dps_guidance: x0 dimension mismatch");
    double scale = mode == DpsScaleMode::SqrtOneMinusAbar
                       ? w * std::sqrt(1.0 - sched.abar(state.t))
                       : w;
    // R(x0hat) = -scale * ||x0hat - x0i||^2; the resulting delta is
    // +scale * d/dx_t ||x0 - x0hat||^2, which pulls the prediction toward x0i.
    X0ScalarHead reward;
    reward.descriptor = "dps-distance";
    reward.fn = [&x0i, scale](const Vec& x0hat, Vec& grad) {
        Vec diff = x0hat - x0i;
        grad = -2.0 * scale * diff;
        return -scale * diff.squaredNorm();
    };
    GuidanceVector g = external_reward_guidance(model, state, cond, sched, reward, 1.0);
    g.kind = GuidanceKind::Dps;
    return g;
}

GuidanceVector slider_guidance(const DenoiserModel& model, const NoisyState& state,
                               const ConceptTrio& trio) {
    Vec eps_pos = eps_forward(model, state.xt, state.t, trio.c_pos);
    Vec eps_neg = eps_forward(model, state.xt, state.t, trio.c_neg);
    GuidanceVector g;
    g.kind = GuidanceKind::Slider;
    g.t = state.t;
    g.delta = trio.beta_inv * (eps_pos - eps_neg);
    if (!g.delta.allFinite())
        throw NumericalError("slider_guidance: non-finite guidance at t=" + std::to_string(state.t));
    return g;
}

GuidanceVector preference_guidance(const DenoiserModel& model, const NoisyState& state_plus,
                                   const NoisyState& state_minus, const PreferencePair& pair,
                                   Condition cond, const NoiseSchedule& sched) {
    require(state_plus.t == state_minus.t,
            "preference_guidance: both noisy states must share one timestep");
    require(pair.x_plus.size() == pair.x_minus.size(),
            "preference_guidance: pair dimension mismatch");

    auto dist_grad = [&](const NoisyState& state, const Vec& target) {
        return grad_input(model, state, cond, sched, squared_distance_head(target));
    };
    // Implicit-reward gradient: attraction of both latents toward x+ minus
    // attraction toward x-. Upweight scale w = 1.
    Vec grad_r = -(dist_grad(state_plus, pair.x_plus) + dist_grad(state_minus, pair.x_plus)) +
                 (dist_grad(state_plus, pair.x_minus) + dist_grad(state_minus, pair.x_minus));
    GuidanceVector g;
    g.kind = GuidanceKind::Preference;
    g.t = state_plus.t;
    g.delta = -grad_r;
    if (!g.delta.allFinite())
        throw NumericalError("preference_guidance: non-finite guidance at t=" +
                             std::to_string(state_plus.t));
    return g;
}

}  // namespace ctrak
