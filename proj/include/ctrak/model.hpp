#ifndef CTRAK_MODEL_HPP
#define CTRAK_MODEL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctrak/checksum.hpp"
#include "ctrak/common.hpp"
#include "ctrak/data.hpp"
#include "ctrak/schedule.hpp"

namespace ctrak {

// Condition ids are rows of the condition table: 0..n_concepts-1 are base
// concepts, row n_concepts is the reserved null condition, rows beyond it are
// learned tokens. kNullCond is an alias for the null row.
using Condition = int;
constexpr Condition kNullCond = -1;

struct ModelArch {
    int d_x = 256;
    int hidden = 256;
    int n_hidden = 3;
    int time_dim = 32;
    int n_concepts = 0;
    int n_tokens = 0;

    int input_dim() const { return d_x + time_dim; }
    int cond_rows() const { return n_concepts + 1 + n_tokens; }
    int null_row() const { return n_concepts; }

    std::int64_t layer_param_count() const;
    std::int64_t cond_param_count() const { return static_cast<std::int64_t>(cond_rows()) * hidden; }
    std::int64_t param_count() const { return layer_param_count() + cond_param_count(); }

    // Offsets into the flat parameter vector.
    std::int64_t w_offset(int layer) const;    // hidden layers 0..n_hidden-1
    std::int64_t b_offset(int layer) const;
    std::int64_t out_w_offset() const;
    std::int64_t out_b_offset() const;
    std::int64_t cond_offset() const;

    void validate() const;
    bool operator==(const ModelArch&) const = default;
};

// Conditional noise predictor: an MLP over [x_t ; sinusoidal time features]
// with the condition embedding added to the first hidden pre-activation.
// All parameters, condition table included, live in one flat theta vector so
// parameter-space gradients are plain vectors of the same shape.
struct DenoiserModel {
    ModelArch arch;
    Vec theta;

    int cond_row(Condition c) const;
    Eigen::Map<const Mat> weight(int layer) const;
    Eigen::Map<const Vec> bias(int layer) const;
    Eigen::Map<const Mat> out_weight() const;
    Eigen::Map<const Vec> out_bias() const;
    Eigen::Map<const Mat> cond_table() const;   // hidden x cond_rows, one column per row id
    Eigen::Map<Mat> cond_table_mut();

    std::uint64_t theta_hash() const;
};

DenoiserModel make_model(const ModelArch& arch, std::uint64_t seed);

Vec time_features(int t, int dim);

// Intermediate activations of one forward pass, kept for the backward passes.
struct ForwardCache {
    Vec z0;                 // network input [x_t ; time features]
    std::vector<Vec> pre;   // pre-activations per hidden layer
    std::vector<Vec> post;  // silu outputs per hidden layer
    int cond_row = -1;
    Vec out;
};

Vec eps_forward(const DenoiserModel& model, const Vec& xt, int t, Condition cond);
const Vec& eps_forward_cached(const DenoiserModel& model, const Vec& xt, int t, Condition cond,
                              ForwardCache& cache);

// Parameter-space pullback J^T u of a cotangent u through eps_forward.
void vjp_params(const DenoiserModel& model, const ForwardCache& cache, const Vec& cotangent,
                Vec& grad);
Vec vjp_params(const DenoiserModel& model, const Vec& xt, int t, Condition cond,
               const Vec& cotangent);

// Input-space pullback (d eps / d x_t)^T u.
Vec vjp_input(const DenoiserModel& model, const ForwardCache& cache, const Vec& cotangent);

// A differentiable scalar of the predicted clean image: fills grad_x0hat with
// d value / d x0hat and returns the value.
struct X0ScalarHead {
    std::function<double(const Vec& x0hat, Vec& grad_x0hat)> fn;
    std::string descriptor;
};

// Gradient with respect to x_t of head(x0hat(x_t)), chained through
// predict_x0 and eps_forward. Returns the scalar value via *value_out.
Vec grad_input(const DenoiserModel& model, const NoisyState& state, Condition cond,
               const NoiseSchedule& sched, const X0ScalarHead& head, double* value_out = nullptr);

// Checkpoint container ("CTRK"): arch + schedule descriptor + flat theta.
struct CheckpointMeta {
    int T = 1000;
    ScheduleKind schedule_kind = ScheduleKind::LinearBeta;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    Fingerprint fingerprint;
};

void save_checkpoint(const std::string& path, const DenoiserModel& model, const CheckpointMeta& meta);
DenoiserModel load_checkpoint(const std::string& path, CheckpointMeta* meta_out = nullptr);

}  // namespace ctrak

#endif
