#include "ctrak/train.hpp"

#include <cmath>

#include "ctrak/parallel.hpp"
#include "ctrak/rng.hpp"

namespace ctrak {

namespace {

struct Adam {
    Vec m, v;
    int step = 0;
    double lr, beta1, beta2, eps;

    Adam(Eigen::Index n, const OptimizerConfig& cfg)
        : m(Vec::Zero(n)), v(Vec::Zero(n)), lr(cfg.lr), beta1(cfg.beta1), beta2(cfg.beta2),
          eps(cfg.adam_eps) {}

    void update(Vec& theta, const Vec& grad) {
        ++step;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        double c1 = 1.0 - std::pow(beta1, step);
        double c2 = 1.0 - std::pow(beta2, step);
        theta -= (lr / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
    }
};

struct SampleDraw {
    int data_index;
    int t;
    Vec eps;
    bool drop_cond;
};

// Fixed chunk size keeps the reduction order independent of the worker count.
constexpr int kChunk = 16;

// Backward pass truncated at the first hidden layer; returns the gradient of
// the loss with respect to the active condition embedding.
Vec cond_row_grad(const DenoiserModel& model, const ForwardCache& cache, const Vec& cotangent) {
    const ModelArch& a = model.arch;
    Vec v;
    v.noalias() = model.out_weight().transpose() * cotangent;
    auto silu_deriv = [](double x) {
        double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
    };
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] *= silu_deriv(cache.pre[static_cast<std::size_t>(a.n_hidden - 1)][i]);
    for (int l = a.n_hidden - 1; l >= 1; --l) {
        Vec v_prev;
        v_prev.noalias() = model.weight(l).transpose() * v;
        for (Eigen::Index i = 0; i < v_prev.size(); ++i)
            v_prev[i] *= silu_deriv(cache.pre[static_cast<std::size_t>(l - 1)][i]);
        v.swap(v_prev);
    }
    return v;
}

}  // namespace

DenoiserModel train_base(DenoiserModel model, const std::vector<DataPoint>& data,
                         const OptimizerConfig& cfg, const NoiseSchedule& sched,
                         std::uint64_t seed, int jobs, std::vector<double>* loss_curve) {
    require(!data.empty(), "train_base: data must be non-empty");
    for (const DataPoint& p : data)
        require(p.x0.size() == model.arch.d_x, "train_base: sample dimension mismatch");

    Rng rng(derive_seed(seed, 0x7121));
    Adam opt(model.theta.size(), cfg);

    std::vector<int> perm(data.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    std::size_t perm_pos = perm.size();  // force shuffle on first use

    int n_chunks_max = (cfg.batch + kChunk - 1) / kChunk;
    std::vector<Vec> partial(static_cast<std::size_t>(n_chunks_max));
    std::vector<double> partial_loss(static_cast<std::size_t>(n_chunks_max));
    Vec grad(model.theta.size());

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<SampleDraw> batch(static_cast<std::size_t>(cfg.batch));
        for (auto& d : batch) {
            if (perm_pos == perm.size()) {
                for (std::size_t i = perm.size(); i > 1; --i) {
                    std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
                    std::swap(perm[i - 1], perm[j]);
                }
                perm_pos = 0;
            }
            d.data_index = perm[perm_pos++];
            d.t = rng.uniform_int(1, sched.T);
            d.eps = rng.normal_vec(model.arch.d_x);
            d.drop_cond = rng.uniform() < cfg.p_uncond;
        }

        int n_chunks = (cfg.batch + kChunk - 1) / kChunk;
        parallel_for(static_cast<std::size_t>(n_chunks), jobs, [&](std::size_t c) {
            Vec& acc = partial[c];
            acc = Vec::Zero(model.theta.size());
            double loss_acc = 0.0;
            ForwardCache cache;
            Vec g(model.theta.size());
            int lo = static_cast<int>(c) * kChunk;
            int hi = std::min(lo + kChunk, cfg.batch);
            for (int i = lo; i < hi; ++i) {
                const SampleDraw& d = batch[static_cast<std::size_t>(i)];
                const DataPoint& p = data[static_cast<std::size_t>(d.data_index)];
                Condition cond = d.drop_cond ? kNullCond : p.concept_id;
                NoisyState state = forward_noise(p.x0, d.t, d.eps, sched);
                const Vec& pred = eps_forward_cached(model, state.xt, d.t, cond, cache);
                Vec residual = pred - d.eps;
                loss_acc += residual.squaredNorm();
                Vec cot = 2.0 * residual;
                vjp_params(model, cache, cot, g);
                acc += g;
            }
            partial_loss[c] = loss_acc;
        });

        grad.setZero();
        double loss = 0.0;
        for (int c = 0; c < n_chunks; ++c) {
            grad += partial[static_cast<std::size_t>(c)];
            loss += partial_loss[static_cast<std::size_t>(c)];
        }
        grad /= cfg.batch;
        loss /= cfg.batch;

        if (!std::isfinite(loss))
            throw TrainingError("train_base: loss became non-finite at iteration " +
                                std::to_string(step));
        if (loss_curve) loss_curve->push_back(loss);
        opt.update(model.theta, grad);
    }
    return model;
}

namespace {

LearnedToken invert_impl(DenoiserModel& model, const std::vector<DataPoint>& exemplars,
                         const OptimizerConfig& cfg, const NoiseSchedule& sched,
                         std::uint64_t seed) {
    require(!exemplars.empty(), "invert_token: exemplars must be non-empty");
    for (const DataPoint& p : exemplars)
        require(p.x0.size() == model.arch.d_x, "invert_token: exemplar dimension mismatch");

    // Append one zero row at the tail of theta (the condition table is the
    // last parameter block, stored column-contiguous).
    int row = model.arch.cond_rows();
    model.arch.n_tokens += 1;
    Eigen::Index old_size = model.theta.size();
    model.theta.conservativeResize(old_size + model.arch.hidden);
    model.theta.tail(model.arch.hidden).setZero();

    Rng rng(derive_seed(seed, 0x7123));
    Adam opt(model.arch.hidden, cfg);
    Vec embedding = Vec::Zero(model.arch.hidden);

    auto table = model.cond_table_mut();
    ForwardCache cache;
    for (int step = 0; step < cfg.steps; ++step) {
        Vec grad = Vec::Zero(model.arch.hidden);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            int idx = rng.uniform_int(0, static_cast<int>(exemplars.size()) - 1);
            int t = rng.uniform_int(1, sched.T);
            Vec eps = rng.normal_vec(model.arch.d_x);
            const DataPoint& p = exemplars[static_cast<std::size_t>(idx)];
            NoisyState state = forward_noise(p.x0, t, eps, sched);
            const Vec& pred = eps_forward_cached(model, state.xt, t, row, cache);
            Vec residual = pred - eps;
            loss += residual.squaredNorm();
            Vec cot = 2.0 * residual;
            grad += cond_row_grad(model, cache, cot);
        }
        grad /= cfg.batch;
        loss /= cfg.batch;
        if (!std::isfinite(loss))
            throw TrainingError("invert_token: loss became non-finite at iteration " +
                                std::to_string(step));
        opt.update(embedding, grad);
        table.col(row) = embedding;
    }

    LearnedToken tok;
    tok.embedding = embedding;
    tok.token_id = row;
    for (const DataPoint& p : exemplars) tok.exemplar_ids.push_back(p.sample_id);
    return tok;
}

}  // namespace

LearnedToken invert_token(DenoiserModel& model, const std::vector<DataPoint>& exemplars,
                          const OptimizerConfig& cfg, const NoiseSchedule& sched,
                          std::uint64_t seed) {
    return invert_impl(model, exemplars, cfg, sched, seed);
}

LearnedToken invert_local_token(DenoiserModel& model, const Vec& generated,
                                const OptimizerConfig& cfg, const NoiseSchedule& sched,
                                std::uint64_t seed) {
    DataPoint p;
    p.x0 = generated;
    p.concept_id = -1;
    p.style_id = -1;
    p.sample_id = -1;
    return invert_impl(model, {p}, cfg, sched, seed);
}

}  // namespace ctrak
