#include "ctrak/gradients.hpp"

#include <cmath>

#include "ctrak/rng.hpp"

namespace ctrak {

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Dsm: return "dsm";
        case LossKind::Dps: return "dps";
        case LossKind::Dtrak: return "dtrak";
        case LossKind::RewardDps: return "reward-dps";
        case LossKind::Preference: return "preference";
    }
    return "?";
}

namespace {

struct Accumulator {
    Vec sum;
    int total = 0;
    int dropped = 0;
    bool normalize;
    double drop_eps;

    Accumulator(Eigen::Index d, bool normalize_, double drop_eps_)
        : sum(Vec::Zero(d)), normalize(normalize_), drop_eps(drop_eps_) {}

    void add(const Vec& g_n) {
        ++total;
        double norm = g_n.norm();
        if (!std::isfinite(norm))
            throw NumericalError("per-timestep gradient is non-finite");
        if (norm < drop_eps) {
            ++dropped;
            return;
        }
        if (normalize)
            sum += g_n / norm;
        else
            sum += g_n;
    }

    AggregatedGradient finish(std::string source) const {
        AggregatedGradient out;
        out.g = total > 0 ? Vec(sum / total) : sum;
        out.n_timesteps = total;
        out.normalized = normalize;
        out.source = std::move(source);
        out.n_dropped = dropped;
        out.degenerate = total > 0 && dropped == total;
        return out;
    }
};

}  // namespace

double stop_gradient_loss_grad(const DenoiserModel& model, const NoisyState& state, Condition cond,
                               const Vec& eps_target, Vec& grad) {
    ForwardCache cache;
    const Vec& pred = eps_forward_cached(model, state.xt, state.t, cond, cache);
    Vec residual = pred - eps_target;
    Vec cot = 2.0 * residual;
    vjp_params(model, cache, cot, grad);
    return residual.squaredNorm();
}

Vec guidance_param_gradient(const DenoiserModel& model, const NoisyState& state, Condition cond,
                            const GuidanceVector& guidance) {
    ForwardCache cache;
    const Vec& pred = eps_forward_cached(model, state.xt, state.t, cond, cache);
    Vec target = pred + guidance.delta;
    Vec cot = 2.0 * (pred - target);
    Vec grad;
    vjp_params(model, cache, cot, grad);
    return grad;
}

AggregatedGradient dps_train_gradient(const DenoiserModel& model, const Vec& x0i, Condition cond,
                                      int n_timesteps, const NoiseSchedule& sched,
                                      const TrainGradOptions& opts) {
    require(n_timesteps >= 1, "dps_train_gradient: N must be >= 1");
    Accumulator acc(model.theta.size(), opts.normalize, opts.drop_eps);
    Rng noise_rng(derive_seed(opts.seed, 0xD65));
    double w = opts.normalize ? 1.0 : opts.w;

    for (int n = 1; n <= n_timesteps; ++n) {
        int t = static_cast<int>(std::llround(static_cast<double>(n) * sched.T / n_timesteps));
        t = std::max(1, std::min(t, sched.T));
        NoisyState state;
        if (opts.use_ddim_inversion) {
            state = ddim_invert(model, cond, x0i, t,
                                inversion_step_list(sched.T, opts.inv_steps, t), sched);
        } else {
            Vec eps = noise_rng.normal_vec(x0i.size());
            state = forward_noise(x0i, t, eps, sched);
        }
        GuidanceVector delta = dps_guidance(model, x0i, state, cond, sched, w, opts.scale_mode);
        acc.add(guidance_param_gradient(model, state, cond, delta));
    }
    return acc.finish("dps");
}

AggregatedGradient dsm_train_gradient_baseline(const DenoiserModel& model, const Vec& x0i,
                                               Condition cond, int n_draws,
                                               const NoiseSchedule& sched, std::uint64_t seed,
                                               bool normalize) {
    require(n_draws >= 1, "dsm_train_gradient_baseline: N must be >= 1");
    Accumulator acc(model.theta.size(), normalize, 1e-12);
    Rng rng(derive_seed(seed, 0xD50));
    Vec grad(model.theta.size());
    for (int n = 0; n < n_draws; ++n) {
        int t = rng.uniform_int(1, sched.T);
        Vec eps = rng.normal_vec(x0i.size());
        NoisyState state = forward_noise(x0i, t, eps, sched);
        stop_gradient_loss_grad(model, state, cond, eps, grad);
        acc.add(grad);
    }
    return acc.finish("dsm");
}

AggregatedGradient dtrak_gradient_baseline(const DenoiserModel& model, const Vec& x0i,
                                           Condition cond, int n_draws, const NoiseSchedule& sched,
                                           std::uint64_t seed, bool normalize) {
    require(n_draws >= 1, "dtrak_gradient_baseline: N must be >= 1");
    Accumulator acc(model.theta.size(), normalize, 1e-12);
    Rng rng(derive_seed(seed, 0xD72));
    Vec zero = Vec::Zero(x0i.size());
    Vec grad(model.theta.size());
    for (int n = 0; n < n_draws; ++n) {
        int t = rng.uniform_int(1, sched.T);
        Vec eps = rng.normal_vec(x0i.size());
        NoisyState state = forward_noise(x0i, t, eps, sched);
        // ||eps_theta||^2 is the stop-gradient loss against a zero target.
        stop_gradient_loss_grad(model, state, cond, zero, grad);
        acc.add(grad);
    }
    return acc.finish("dtrak");
}

RewardProvider make_slider_provider(const DenoiserModel& model, const ConceptTrio& trio,
                                    bool unit_scale) {
    ConceptTrio effective = trio;
    if (unit_scale) effective.beta_inv = 1.0;
    RewardProvider p;
    p.descriptor = "slider(c=" + std::to_string(trio.c_base) + ",c+=" + std::to_string(trio.c_pos) +
                   ",c-=" + std::to_string(trio.c_neg) + ",1/beta=" +
                   std::to_string(effective.beta_inv) + ")";
    p.guidance = [&model, effective](const NoisyState& state) {
        return slider_guidance(model, state, effective);
    };
    return p;
}

RewardProvider make_external_provider(const DenoiserModel& model, Condition cond,
                                      const NoiseSchedule& sched, const X0ScalarHead& reward,
                                      double beta_inv, bool unit_scale) {
    double scale = unit_scale ? 1.0 : beta_inv;
    RewardProvider p;
    p.descriptor = "external(" + reward.descriptor + ",1/beta=" + std::to_string(scale) + ")";
    p.guidance = [&model, cond, &sched, reward, scale](const NoisyState& state) {
        return external_reward_guidance(model, state, cond, sched, reward, scale);
    };
    return p;
}

namespace {

void add_trajectory_draws(Accumulator& acc, const DenoiserModel& model,
                          const RewardProvider& provider,
                          const std::vector<NoisyState>& trajectory, Condition cond,
                          int n_timesteps, std::uint64_t seed) {
    // States with t >= 1; the terminal clean sample is excluded.
    int usable = 0;
    for (const auto& s : trajectory)
        if (s.t >= 1) ++usable;
    require(usable >= 1, "utility gradient: no usable trajectory states");

    Rng rng(derive_seed(seed, 0x0717));
    for (int n = 0; n < n_timesteps; ++n) {
        int pick = rng.uniform_int(0, usable - 1);
        const NoisyState& state = trajectory[static_cast<std::size_t>(pick)];
        GuidanceVector delta = provider.guidance(state);
        acc.add(guidance_param_gradient(model, state, cond, delta));
    }
}

}  // namespace

AggregatedGradient utility_gradient_from_trajectory(const DenoiserModel& model,
                                                    const RewardProvider& provider,
                                                    const std::vector<NoisyState>& trajectory,
                                                    Condition cond, int n_timesteps,
                                                    std::uint64_t seed, bool normalize,
                                                    double drop_eps) {
    require(n_timesteps >= 1, "utility_gradient_from_trajectory: N must be >= 1");
    Accumulator acc(model.theta.size(), normalize, drop_eps);
    add_trajectory_draws(acc, model, provider, trajectory, cond, n_timesteps, seed);
    return acc.finish(provider.descriptor);
}

AggregatedGradient reward_dps_utility_gradient(const DenoiserModel& model,
                                               const RewardProvider& provider, Condition cond,
                                               int n_trajectories, int n_timesteps,
                                               const NoiseSchedule& sched, std::uint64_t seed,
                                               const UtilityGradOptions& opts) {
    require(n_trajectories >= 1 && n_timesteps >= 1,
            "reward_dps_utility_gradient: M and N must be >= 1");
    Accumulator acc(model.theta.size(), opts.normalize, opts.drop_eps);
    std::vector<int> steps = sampling_step_list(sched.T, opts.sample_steps);
    for (int m = 0; m < n_trajectories; ++m) {
        Rng traj_rng(derive_seed(seed, 0x300 + static_cast<std::uint64_t>(m)));
        Vec xT = traj_rng.normal_vec(model.arch.d_x);
        auto traj = ddim_sample(model, cond, xT, steps, sched, GuidanceSpec{opts.cfg_scale});
        add_trajectory_draws(acc, model, provider, traj, cond, n_timesteps,
                             derive_seed(seed, 0x400 + static_cast<std::uint64_t>(m)));
    }
    return acc.finish(provider.descriptor);
}

AggregatedGradient preference_utility_gradient(const DenoiserModel& model,
                                               const PreferencePair& pair, Condition cond,
                                               int n_draws, const NoiseSchedule& sched,
                                               std::uint64_t seed, bool normalize) {
    require(n_draws >= 1, "preference_utility_gradient: N must be >= 1");
    Accumulator acc(model.theta.size(), normalize, 1e-12);
    Rng rng(derive_seed(seed, 0xDB0));
    for (int n = 0; n < n_draws; ++n) {
        int t = rng.uniform_int(1, sched.T);
        Vec eps = rng.normal_vec(pair.x_plus.size());
        NoisyState sp = forward_noise(pair.x_plus, t, eps, sched);
        NoisyState sm = forward_noise(pair.x_minus, t, eps, sched);
        GuidanceVector delta = preference_guidance(model, sp, sm, pair, cond, sched);
        acc.add(guidance_param_gradient(model, sp, cond, delta));
    }
    return acc.finish("preference");
}

}  // namespace ctrak
