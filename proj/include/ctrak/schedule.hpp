#ifndef CTRAK_SCHEDULE_HPP
#define CTRAK_SCHEDULE_HPP

#include <string>
#include <vector>

#include "ctrak/common.hpp"

namespace ctrak {

enum class ScheduleKind { LinearBeta, Cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

// Discrete-time cumulative noise table. alpha_bar[t] is the product of
// (1 - beta_s) for s <= t, with alpha_bar[0] == 1 exactly.
struct NoiseSchedule {
    int T = 0;
    ScheduleKind kind = ScheduleKind::LinearBeta;
    std::vector<double> alpha_bar;  // size T + 1, strictly decreasing, values in (0, 1]

    double abar(int t) const {
        require(t >= 0 && t <= T, "timestep out of schedule range");
        return alpha_bar[static_cast<std::size_t>(t)];
    }

    void validate() const;

    static NoiseSchedule linear_beta(int T, double beta_start = 1e-4, double beta_end = 0.02);
    static NoiseSchedule cosine(int T, double s = 0.008);
    static NoiseSchedule make(ScheduleKind kind, int T, double beta_start = 1e-4,
                              double beta_end = 0.02);
};

}  // namespace ctrak

#endif
