#include "ctrak/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "ctrak/rng.hpp"

namespace ctrak {

namespace {

inline double silu(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return x * s;
}

inline double silu_deriv(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

void apply_silu(const Vec& pre, Vec& post) {
    post.resize(pre.size());
    for (Eigen::Index i = 0; i < pre.size(); ++i) post[i] = silu(pre[i]);
}

void mul_silu_deriv(const Vec& pre, Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] *= silu_deriv(pre[i]);
}

}  // namespace

void ModelArch::validate() const {
    require(d_x >= 1 && hidden >= 1 && n_hidden >= 1, "model arch dims must be positive");
    require(time_dim >= 2 && time_dim % 2 == 0, "time_dim must be even and >= 2");
    require(n_concepts >= 0 && n_tokens >= 0, "concept/token counts must be non-negative");
}

std::int64_t ModelArch::layer_param_count() const {
    std::int64_t n = static_cast<std::int64_t>(hidden) * input_dim() + hidden;
    n += static_cast<std::int64_t>(n_hidden - 1) * (static_cast<std::int64_t>(hidden) * hidden + hidden);
    n += static_cast<std::int64_t>(d_x) * hidden + d_x;
    return n;
}

std::int64_t ModelArch::w_offset(int layer) const {
    std::int64_t ofs = 0;
    for (int l = 0; l < layer; ++l) {
        ofs += static_cast<std::int64_t>(hidden) * (l == 0 ? input_dim() : hidden) + hidden;
    }
    return ofs;
}

std::int64_t ModelArch::b_offset(int layer) const {
    return w_offset(layer) + static_cast<std::int64_t>(hidden) * (layer == 0 ? input_dim() : hidden);
}

std::int64_t ModelArch::out_w_offset() const { return w_offset(n_hidden); }

std::int64_t ModelArch::out_b_offset() const {
    return out_w_offset() + static_cast<std::int64_t>(d_x) * hidden;
}

std::int64_t ModelArch::cond_offset() const { return out_b_offset() + d_x; }

int DenoiserModel::cond_row(Condition c) const {
    if (c == kNullCond) return arch.null_row();
    require(c >= 0 && c < arch.cond_rows(), "unknown condition id " + std::to_string(c));
    return c;
}

Eigen::Map<const Mat> DenoiserModel::weight(int layer) const {
    int cols = layer == 0 ? arch.input_dim() : arch.hidden;
    return {theta.data() + arch.w_offset(layer), arch.hidden, cols};
}

Eigen::Map<const Vec> DenoiserModel::bias(int layer) const {
    return {theta.data() + arch.b_offset(layer), arch.hidden};
}

Eigen::Map<const Mat> DenoiserModel::out_weight() const {
    return {theta.data() + arch.out_w_offset(), arch.d_x, arch.hidden};
}

Eigen::Map<const Vec> DenoiserModel::out_bias() const {
    return {theta.data() + arch.out_b_offset(), arch.d_x};
}

Eigen::Map<const Mat> DenoiserModel::cond_table() const {
    return {theta.data() + arch.cond_offset(), arch.hidden, arch.cond_rows()};
}

Eigen::Map<Mat> DenoiserModel::cond_table_mut() {
    return {theta.data() + arch.cond_offset(), arch.hidden, arch.cond_rows()};
}

std::uint64_t DenoiserModel::theta_hash() const {
    Crc64 crc;
    crc.update(theta.data(), static_cast<std::size_t>(theta.size()) * sizeof(double));
    return crc.value();
}

DenoiserModel make_model(const ModelArch& arch, std::uint64_t seed) {
    arch.validate();
    DenoiserModel m;
    m.arch = arch;
    m.theta = Vec::Zero(arch.param_count());
    Rng rng(derive_seed(seed, 0xA11));
    auto init_block = [&](std::int64_t ofs, std::int64_t count, int fan_in) {
        double bound = std::sqrt(3.0 / fan_in);
        for (std::int64_t i = 0; i < count; ++i)
            m.theta[ofs + i] = rng.uniform(-bound, bound);
    };
    init_block(arch.w_offset(0), static_cast<std::int64_t>(arch.hidden) * arch.input_dim(),
               arch.input_dim());
    for (int l = 1; l < arch.n_hidden; ++l)
        init_block(arch.w_offset(l), static_cast<std::int64_t>(arch.hidden) * arch.hidden, arch.hidden);
    init_block(arch.out_w_offset(), static_cast<std::int64_t>(arch.d_x) * arch.hidden, arch.hidden);
    // Biases and the condition table start at zero: a fresh model treats all
    // conditions, the null row included, identically.
    return m;
}

Vec time_features(int t, int dim) {
    Vec f(dim);
    int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
        f[2 * i] = std::sin(t * freq);
        f[2 * i + 1] = std::cos(t * freq);
    }
    return f;
}

const Vec& eps_forward_cached(const DenoiserModel& model, const Vec& xt, int t, Condition cond,
                              ForwardCache& cache) {
    const ModelArch& a = model.arch;
    require(xt.size() == a.d_x, "xt dimension mismatch");
    int row = model.cond_row(cond);

    cache.z0.resize(a.input_dim());
    cache.z0.head(a.d_x) = xt;
    cache.z0.tail(a.time_dim) = time_features(t, a.time_dim);
    cache.cond_row = row;

    cache.pre.resize(static_cast<std::size_t>(a.n_hidden));
    cache.post.resize(static_cast<std::size_t>(a.n_hidden));

    cache.pre[0].noalias() = model.weight(0) * cache.z0;
    cache.pre[0] += model.bias(0);
    cache.pre[0] += model.cond_table().col(row);
    apply_silu(cache.pre[0], cache.post[0]);

    for (int l = 1; l < a.n_hidden; ++l) {
        std::size_t li = static_cast<std::size_t>(l);
        cache.pre[li].noalias() = model.weight(l) * cache.post[li - 1];
        cache.pre[li] += model.bias(l);
        apply_silu(cache.pre[li], cache.post[li]);
    }

    cache.out.noalias() = model.out_weight() * cache.post[static_cast<std::size_t>(a.n_hidden - 1)];
    cache.out += model.out_bias();
    return cache.out;
}

Vec eps_forward(const DenoiserModel& model, const Vec& xt, int t, Condition cond) {
    ForwardCache cache;
    return eps_forward_cached(model, xt, t, cond, cache);
}

void vjp_params(const DenoiserModel& model, const ForwardCache& cache, const Vec& cotangent,
                Vec& grad) {
    const ModelArch& a = model.arch;
    require(cotangent.size() == a.d_x, "cotangent dimension mismatch");
    grad.resize(a.param_count());

    std::size_t last = static_cast<std::size_t>(a.n_hidden - 1);
    Eigen::Map<Mat>(grad.data() + a.out_w_offset(), a.d_x, a.hidden).noalias() =
        cotangent * cache.post[last].transpose();
    Eigen::Map<Vec>(grad.data() + a.out_b_offset(), a.d_x) = cotangent;

    Vec v;
    v.noalias() = model.out_weight().transpose() * cotangent;
    mul_silu_deriv(cache.pre[last], v);

    for (int l = a.n_hidden - 1; l >= 1; --l) {
        std::size_t li = static_cast<std::size_t>(l);
        Eigen::Map<Mat>(grad.data() + a.w_offset(l), a.hidden, a.hidden).noalias() =
            v * cache.post[li - 1].transpose();
        Eigen::Map<Vec>(grad.data() + a.b_offset(l), a.hidden) = v;
        Vec v_prev;
        v_prev.noalias() = model.weight(l).transpose() * v;
        mul_silu_deriv(cache.pre[li - 1], v_prev);
        v.swap(v_prev);
    }

    Eigen::Map<Mat>(grad.data() + a.w_offset(0), a.hidden, a.input_dim()).noalias() =
        v * cache.z0.transpose();
    Eigen::Map<Vec>(grad.data() + a.b_offset(0), a.hidden) = v;

    Eigen::Map<Mat> cond_grad(grad.data() + a.cond_offset(), a.hidden, a.cond_rows());
    cond_grad.setZero();
    cond_grad.col(cache.cond_row) = v;
}

Vec vjp_params(const DenoiserModel& model, const Vec& xt, int t, Condition cond,
               const Vec& cotangent) {
    ForwardCache cache;
    eps_forward_cached(model, xt, t, cond, cache);
    Vec grad;
    vjp_params(model, cache, cotangent, grad);
    return grad;
}

Vec vjp_input(const DenoiserModel& model, const ForwardCache& cache, const Vec& cotangent) {
    const ModelArch& a = model.arch;
    require(cotangent.size() == a.d_x, "cotangent dimension mismatch");
    Vec v;
    v.noalias() = model.out_weight().transpose() * cotangent;
    mul_silu_deriv(cache.pre[static_cast<std::size_t>(a.n_hidden - 1)], v);
    for (int l = a.n_hidden - 1; l >= 1; --l) {
        Vec v_prev;
        v_prev.noalias() = model.weight(l).transpose() * v;
        mul_silu_deriv(cache.pre[static_cast<std::size_t>(l - 1)], v_prev);
        v.swap(v_prev);
    }
    Vec z0_grad;
    z0_grad.noalias() = model.weight(0).transpose() * v;
    return z0_grad.head(a.d_x);
}

Vec grad_input(const DenoiserModel& model, const NoisyState& state, Condition cond,
               const NoiseSchedule& sched, const X0ScalarHead& head, double* value_out) {
    double abar = sched.abar(state.t);
    if (abar <= 0.0) throw NumericalError("alpha_bar <= 0 at t=" + std::to_string(state.t));
    double sqrt_ab = std::sqrt(abar);
    double sqrt_1m = std::sqrt(1.0 - abar);

    ForwardCache cache;
    const Vec& eps = eps_forward_cached(model, state.xt, state.t, cond, cache);
    Vec x0hat = (state.xt - sqrt_1m * eps) / sqrt_ab;

    Vec u(model.arch.d_x);
    double value = head.fn(x0hat, u);
    if (value_out) *value_out = value;

    // x0hat = (x_t - sqrt(1-abar) * eps(x_t)) / sqrt(abar), so
    // d head / d x_t = (u - sqrt(1-abar) * (d eps/d x_t)^T u) / sqrt(abar).
    Vec pullback = vjp_input(model, cache, u);
    return (u - sqrt_1m * pullback) / sqrt_ab;
}

namespace {

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw StorageError("checkpoint truncated");
}

constexpr char kMagic[4] = {'C', 'T', 'R', 'K'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const DenoiserModel& model,
                     const CheckpointMeta& meta) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw StorageError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 4);
    write_pod(f, kVersion);
    const ModelArch& a = model.arch;
    for (int v : {a.d_x, a.hidden, a.n_hidden, a.time_dim, a.n_concepts, a.n_tokens})
        write_pod(f, static_cast<std::uint32_t>(v));
    write_pod(f, static_cast<std::uint32_t>(meta.T));
    write_pod(f, static_cast<std::uint32_t>(meta.schedule_kind));
    write_pod(f, meta.beta_start);
    write_pod(f, meta.beta_end);
    f.write(reinterpret_cast<const char*>(meta.fingerprint.bytes.data()), 16);
    write_pod(f, static_cast<std::uint64_t>(model.theta.size()));
    f.write(reinterpret_cast<const char*>(model.theta.data()),
            static_cast<std::streamsize>(model.theta.size() * sizeof(double)));

    Crc64 crc;
    crc.update(kMagic, 4);
    crc.update(&kVersion, sizeof(kVersion));
    for (int v : {a.d_x, a.hidden, a.n_hidden, a.time_dim, a.n_concepts, a.n_tokens}) {
        std::uint32_t u = static_cast<std::uint32_t>(v);
        crc.update(&u, sizeof(u));
    }
    std::uint32_t t32 = static_cast<std::uint32_t>(meta.T);
    std::uint32_t kind32 = static_cast<std::uint32_t>(meta.schedule_kind);
    crc.update(&t32, sizeof(t32));
    crc.update(&kind32, sizeof(kind32));
    crc.update(&meta.beta_start, sizeof(double));
    crc.update(&meta.beta_end, sizeof(double));
    crc.update(meta.fingerprint.bytes.data(), 16);
    std::uint64_t dsize = static_cast<std::uint64_t>(model.theta.size());
    crc.update(&dsize, sizeof(dsize));
    crc.update(model.theta.data(), static_cast<std::size_t>(model.theta.size()) * sizeof(double));
    write_pod(f, crc.value());
    if (!f) throw StorageError("checkpoint write failed: " + path);
}

DenoiserModel load_checkpoint(const std::string& path, CheckpointMeta* meta_out) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StorageError("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw StorageError("not a CTRK checkpoint: " + path);
    std::uint32_t version;
    read_pod(f, version);
    if (version != kVersion)
        throw StorageError("unsupported checkpoint version " + std::to_string(version));

    ModelArch a;
    std::uint32_t u;
    read_pod(f, u); a.d_x = static_cast<int>(u);
    read_pod(f, u); a.hidden = static_cast<int>(u);
    read_pod(f, u); a.n_hidden = static_cast<int>(u);
    read_pod(f, u); a.time_dim = static_cast<int>(u);
    read_pod(f, u); a.n_concepts = static_cast<int>(u);
    read_pod(f, u); a.n_tokens = static_cast<int>(u);

    CheckpointMeta meta;
    read_pod(f, u); meta.T = static_cast<int>(u);
    read_pod(f, u); meta.schedule_kind = static_cast<ScheduleKind>(u);
    read_pod(f, meta.beta_start);
    read_pod(f, meta.beta_end);
    f.read(reinterpret_cast<char*>(meta.fingerprint.bytes.data()), 16);

    std::uint64_t dsize;
    read_pod(f, dsize);
    if (dsize != static_cast<std::uint64_t>(a.param_count()))
        throw StorageError("checkpoint theta size does not match arch descriptor");

    DenoiserModel m;
    m.arch = a;
    m.theta.resize(static_cast<Eigen::Index>(dsize));
    f.read(reinterpret_cast<char*>(m.theta.data()),
           static_cast<std::streamsize>(dsize * sizeof(double)));
    if (!f) throw StorageError("checkpoint truncated: " + path);

    std::uint64_t stored_crc;
    read_pod(f, stored_crc);

    // Recompute over the serialized bytes.
    Crc64 crc;
    crc.update(kMagic, 4);
    crc.update(&version, sizeof(version));
    for (int v : {a.d_x, a.hidden, a.n_hidden, a.time_dim, a.n_concepts, a.n_tokens}) {
        std::uint32_t w = static_cast<std::uint32_t>(v);
        crc.update(&w, sizeof(w));
    }
    std::uint32_t t32 = static_cast<std::uint32_t>(meta.T);
    std::uint32_t kind32 = static_cast<std::uint32_t>(meta.schedule_kind);
    crc.update(&t32, sizeof(t32));
    crc.update(&kind32, sizeof(kind32));
    crc.update(&meta.beta_start, sizeof(double));
    crc.update(&meta.beta_end, sizeof(double));
    crc.update(meta.fingerprint.bytes.data(), 16);
    crc.update(&dsize, sizeof(dsize));
    crc.update(m.theta.data(), static_cast<std::size_t>(dsize) * sizeof(double));
    if (crc.value() != stored_crc) throw StorageError("checkpoint checksum mismatch: " + path);

    if (meta_out) *meta_out = meta;
    return m;
}

}  // namespace ctrak
