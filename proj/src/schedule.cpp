#include "ctrak/schedule.hpp"

#include <cmath>

namespace ctrak {

std::string to_string(ScheduleKind kind) {
    return kind == ScheduleKind::LinearBeta ? "linear-beta" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear-beta") return ScheduleKind::LinearBeta;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw ConfigError("unknown schedule kind: '" + s + "' (expected linear-beta or cosine)");
}

void NoiseSchedule::validate() const {
    require(T >= 1, "schedule must have T >= 1");
    require(alpha_bar.size() == static_cast<std::size_t>(T) + 1, "alpha_bar must have T+1 entries");
    require(alpha_bar[0] == 1.0, "alpha_bar[0] must be exactly 1");
    for (int t = 1; t <= T; ++t) {
        double a = alpha_bar[static_cast<std::size_t>(t)];
        require(a > 0.0 && a <= 1.0, "alpha_bar values must lie in (0, 1]");
        require(a < alpha_bar[static_cast<std::size_t>(t - 1)], "alpha_bar must be strictly decreasing");
    }
}

NoiseSchedule NoiseSchedule::linear_beta(int T, double beta_start, double beta_end) {
    require(T >= 1, "schedule must have T >= 1");
    NoiseSchedule s;
    s.T = T;
    s.kind = ScheduleKind::LinearBeta;
    s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
    s.alpha_bar[0] = 1.0;
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        double beta = beta_start + (beta_end - beta_start) * frac;
        prod *= 1.0 - beta;
        s.alpha_bar[static_cast<std::size_t>(t)] = prod;
    }
    s.validate();
    return s;
}

NoiseSchedule NoiseSchedule::cosine(int T, double offset) {
    require(T >= 1, "schedule must have T >= 1");
    NoiseSchedule s;
    s.T = T;
    s.kind = ScheduleKind::Cosine;
    s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
    auto f = [&](double t) {
        double v = std::cos((t / T + offset) / (1.0 + offset) * M_PI / 2.0);
        return v * v;
    };
    double f0 = f(0.0);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        double a = f(static_cast<double>(t)) / f0;
        // Clamp away from 0 so predict_x0 stays well defined at t = T.
        a = std::max(a, 1e-5);
        s.alpha_bar[static_cast<std::size_t>(t)] =
            std::min(a, s.alpha_bar[static_cast<std::size_t>(t - 1)] * (1.0 - 1e-9));
    }
    s.validate();
    return s;
}

NoiseSchedule NoiseSchedule::make(ScheduleKind kind, int T, double beta_start, double beta_end) {
    return kind == ScheduleKind::LinearBeta ? linear_beta(T, beta_start, beta_end) : cosine(T);
}

}  // namespace ctrak
