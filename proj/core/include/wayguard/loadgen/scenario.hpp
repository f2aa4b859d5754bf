#pragma once

#include <string>
#include <vector>

namespace wayguard::loadgen {

enum class PhaseKind { Ramp, Hold };

/// One segment of a load scenario: a linear ramp of the active-user count
/// or a hold. Counts are exact integers; the rate is derived.
struct ScenarioPhase {
    PhaseKind kind = PhaseKind::Hold;
    double duration_s = 0.0;
    int start_users = 0;
    int end_users = 0;
    std::string label;

    double rate_users_per_s() const {
        return duration_s > 0.0 ? (end_users - start_users) / duration_s : 0.0;
    }
};

/// Sustained-load program: build to a steady state, then two rounds of
/// protracted addition and removal with stabilization holds between them.
/// `scale` divides every user count, `time_scale` divides every duration.
/// Throws std::invalid_argument for parameters that collapse a ramp to
/// zero users.
std::vector<ScenarioPhase> build_fixed_scenario(int scale, int time_scale);

/// Rapid-variation program: sawtooth between empty and peak without
/// waiting for the system to stabilize, then return to the steady level.
std::vector<ScenarioPhase> build_varying_scenario(int scale, int time_scale);

/// Stepped ramp used for saturation probing: `steps` plateaus of
/// `step_users` increments, each held for `hold_s`.
std::vector<ScenarioPhase> build_step_scenario(int step_users, int steps, double hold_s,
                                               double ramp_users_per_s);

/// Scheduled active-user count at `t_s` seconds into the program.
int scheduled_users(const std::vector<ScenarioPhase>& phases, double t_s);

double total_duration_s(const std::vector<ScenarioPhase>& phases);
int peak_users(const std::vector<ScenarioPhase>& phases);

}  // namespace wayguard::loadgen
