#ifndef CTRAK_GUIDANCE_HPP
#define CTRAK_GUIDANCE_HPP

#include <string>

#include "ctrak/diffusion.hpp"
#include "ctrak/model.hpp"

namespace ctrak {

enum class GuidanceKind : std::uint8_t { Dps, Slider, External, Preference, DsmResidual };

std::string to_string(GuidanceKind kind);

// delta is the additive correction to the noise prediction: the stop-gradient
// target is eps_tilde = sg[eps_theta + delta], so for every loss in this
// module the parameter gradient is exactly -2 J^T delta.
struct GuidanceVector {
    Vec delta;
    GuidanceKind kind = GuidanceKind::Dps;
    int t = 0;
};

// Base / positive / negative conditions of a contrastive concept, with
// guidance scale 1/beta.
struct ConceptTrio {
    Condition c_base = kNullCond;
    Condition c_pos = kNullCond;
    Condition c_neg = kNullCond;
    double beta_inv = 1.0;
};

// Whether the DPS guidance carries the sqrt(1-abar_t) factor in front of w.
enum class DpsScaleMode { SqrtOneMinusAbar, PlainW };

struct PreferencePair {
    Vec x_plus;
    Vec x_minus;
};

GuidanceVector dps_guidance(const DenoiserModel& model, const Vec& x0i, const NoisyState& state,
                            Condition cond, const NoiseSchedule& sched, double w,
                            DpsScaleMode mode = DpsScaleMode::SqrtOneMinusAbar);

GuidanceVector slider_guidance(const DenoiserModel& model, const NoisyState& state,
                               const ConceptTrio& trio);

// Reward defined on the predicted clean image; delta = -(1/beta) d R / d x_t.
GuidanceVector external_reward_guidance(const DenoiserModel& model, const NoisyState& state,
                                        Condition cond, const NoiseSchedule& sched,
                                        const X0ScalarHead& reward, double beta_inv);

// Implicit Bradley-Terry reward from a preference pair; both noisy states must
// sit at the same timestep. Upweight scale is fixed at 1.
GuidanceVector preference_guidance(const DenoiserModel& model, const NoisyState& state_plus,
                                   const NoisyState& state_minus, const PreferencePair& pair,
                                   Condition cond, const NoiseSchedule& sched);

// Squared-distance head ||x0hat - target||^2, shared by DPS and preference.
X0ScalarHead squared_distance_head(const Vec& target);

}  // namespace ctrak

#endif
