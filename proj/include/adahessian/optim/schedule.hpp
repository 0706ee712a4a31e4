#pragma once

#include "adahessian/types.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace adahessian {

enum class ScheduleKind { constant, step_decay, linear_warmup_then_decay };

// Multiplier applied to the base learning rate at iteration t >= 1.
struct LrSchedule {
    ScheduleKind kind = ScheduleKind::constant;
    // step_decay: multiply by `factor` once t reaches each milestone.
    std::vector<std::int64_t> milestones;
    double factor = 0.1;
    // linear_warmup_then_decay: ramp t / warmup_steps up to 1, then decay
    // linearly to min_factor at total_steps (flat at 1 when total_steps == 0).
    std::int64_t warmup_steps = 0;
    std::int64_t total_steps = 0;
    double min_factor = 0.01;

    void validate() const {
        switch (kind) {
            case ScheduleKind::constant: break;
            case ScheduleKind::step_decay:
                require(factor > 0.0, "schedule: step decay factor must be positive");
                require(std::is_sorted(milestones.begin(), milestones.end()), "schedule: milestones must be sorted");
                for (auto m : milestones) require(m >= 1, "schedule: milestones must be >= 1");
                break;
            case ScheduleKind::linear_warmup_then_decay:
                require(warmup_steps >= 1, "schedule: warmup steps must be >= 1");
                require(total_steps == 0 || total_steps > warmup_steps, "schedule: total steps must exceed warmup");
                require(min_factor > 0.0 && min_factor <= 1.0, "schedule: min factor must be in (0, 1]");
                break;
        }
    }

    [[nodiscard]] double multiplier(std::int64_t t) const {
        require(t >= 1, "schedule: t must be >= 1");
        switch (kind) {
            case ScheduleKind::constant: return 1.0;
            case ScheduleKind::step_decay: {
                double m = 1.0;
                for (auto milestone : milestones)
                    if (t >= milestone) m *= factor;
                return m;
            }
            case ScheduleKind::linear_warmup_then_decay: {
                if (t <= warmup_steps) return static_cast<double>(t) / static_cast<double>(warmup_steps);
                if (total_steps == 0) return 1.0;
                const double frac = std::min(1.0, static_cast<double>(t - warmup_steps) /
                                                      static_cast<double>(total_steps - warmup_steps));
                return 1.0 - frac * (1.0 - min_factor);
            }
        }
        return 1.0;
    }
};

inline std::string to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::constant: return "constant";
        case ScheduleKind::step_decay: return "step_decay";
        case ScheduleKind::linear_warmup_then_decay: return "linear_warmup_then_decay";
    }
    return "?";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "constant") return ScheduleKind::constant;
    if (s == "step_decay") return ScheduleKind::step_decay;
    if (s == "linear_warmup_then_decay") return ScheduleKind::linear_warmup_then_decay;
    throw ContractViolation("unknown schedule '" + s + "'");
}

}  // namespace adahessian
