#include "wayguard/loadgen/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wayguard::loadgen {

namespace {

// Scale-1 blueprint constants. The ramp rates between checkpoints follow
// from the counts and the five-minute phase durations.
constexpr int kSteady = 2400;
constexpr int kMid = 4200;
constexpr int kPeak = 8400;
constexpr double kPhaseS = 300.0;
constexpr double kFastPhaseS = 150.0;
constexpr int kVaryingAdditions = 6;

int scaled(int users, int scale) { return users / scale; }

void append_ramp(std::vector<ScenarioPhase>& phases, int from, int to, double duration_s,
                 const std::string& label) {
    if (from == to) {
        throw std::invalid_argument("scenario scale collapses ramp '" + label
                                    + "' to zero users");
    }
    phases.push_back({PhaseKind::Ramp, duration_s, from, to, label});
}

void append_hold(std::vector<ScenarioPhase>& phases, int users, double duration_s,
                 const std::string& label) {
    phases.push_back({PhaseKind::Hold, duration_s, users, users, label});
}

void check_scales(int scale, int time_scale) {
    if (scale < 1 || time_scale < 1) {
        throw std::invalid_argument("scale and time_scale must be >= 1");
    }
    if (scaled(kSteady, scale) < 1) {
        throw std::invalid_argument("scale leaves no steady-state users");
    }
}

}  // namespace

std::vector<ScenarioPhase> build_fixed_scenario(int scale, int time_scale) {
    check_scales(scale, time_scale);
    const int steady = scaled(kSteady, scale);
    const int mid = scaled(kMid, scale);
    const int peak = scaled(kPeak, scale);
    const double phase_s = kPhaseS / time_scale;

    std::vector<ScenarioPhase> phases;
    append_ramp(phases, 0, steady, phase_s, "build");
    append_hold(phases, steady, phase_s, "steady");
    append_ramp(phases, steady, mid, phase_s, "add-slow");
    append_hold(phases, mid, phase_s, "hold-mid");
    append_ramp(phases, mid, peak, phase_s, "add-fast");
    append_hold(phases, peak, phase_s, "hold-peak");
    append_ramp(phases, peak, mid, phase_s, "remove-fast");
    append_hold(phases, mid, phase_s, "hold-mid-down");
    append_ramp(phases, mid, steady, phase_s, "remove-slow");
    append_hold(phases, steady, phase_s, "final");
    return phases;
}

std::vector<ScenarioPhase> build_varying_scenario(int scale, int time_scale) {
    check_scales(scale, time_scale);
    const int steady = scaled(kSteady, scale);
    const int peak = scaled(kPeak, scale);
    const double phase_s = kPhaseS / time_scale;
    const double fast_s = kFastPhaseS / time_scale;

    std::vector<ScenarioPhase> phases;
    append_ramp(phases, 0, steady, phase_s, "build");
    append_hold(phases, steady, phase_s, "steady");
    append_ramp(phases, steady, peak, fast_s, "surge");
    append_ramp(phases, peak, 0, fast_s, "drop-0");
    for (int i = 1; i <= kVaryingAdditions; ++i) {
        append_ramp(phases, 0, peak, fast_s, "spike-" + std::to_string(i));
        if (i < kVaryingAdditions) {
            append_ramp(phases, peak, 0, fast_s, "drop-" + std::to_string(i));
        }
    }
    append_ramp(phases, peak, steady, fast_s, "settle");
    append_hold(phases, steady, phase_s, "final");
    return phases;
}

std::vector<ScenarioPhase> build_step_scenario(int step_users, int steps, double hold_s,
                                               double ramp_users_per_s) {
    if (step_users < 1 || steps < 1 || ramp_users_per_s <= 0.0) {
        throw std::invalid_argument("invalid step scenario parameters");
    }
    std::vector<ScenarioPhase> phases;
    int level = 0;
    for (int i = 1; i <= steps; ++i) {
        int next = level + step_users;
        append_ramp(phases, level, next, step_users / ramp_users_per_s,
                    "ramp-" + std::to_string(next));
        append_hold(phases, next, hold_s, "hold-" + std::to_string(next));
        level = next;
    }
    return phases;
}

int scheduled_users(const std::vector<ScenarioPhase>& phases, double t_s) {
    double t = t_s;
    int users = phases.empty() ? 0 : phases.front().start_users;
    for (const auto& phase : phases) {
        if (t < 0) break;
        if (t >= phase.duration_s) {
            users = phase.end_users;
            t -= phase.duration_s;
            continue;
        }
        if (phase.kind == PhaseKind::Hold || phase.duration_s <= 0.0) {
            return phase.start_users;
        }
        int delta = std::abs(phase.end_users - phase.start_users);
        int done = static_cast<int>(
            std::floor(static_cast<double>(delta) * t / phase.duration_s));
        done = std::min(done, delta);
        return phase.start_users
               + (phase.end_users >= phase.start_users ? done : -done);
    }
    return users;
}

double total_duration_s(const std::vector<ScenarioPhase>& phases) {
    double total = 0.0;
    for (const auto& p : phases) total += p.duration_s;
    return total;
}

int peak_users(const std::vector<ScenarioPhase>& phases) {
    int peak = 0;
    for (const auto& p : phases) {
        peak = std::max({peak, p.start_users, p.end_users});
    }
    return peak;
}

}  // namespace wayguard::loadgen
