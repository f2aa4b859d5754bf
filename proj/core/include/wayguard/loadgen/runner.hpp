#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wayguard/loadgen/scenario.hpp"
#include "wayguard/types.hpp"

namespace wayguard::loadgen {

struct RunnerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir;  // empty: keep results in memory only
    int io_threads = 128;
    std::chrono::milliseconds request_timeout{5000};

    double tau_min_s = 1.0;  // think-time draw, uniform
    double tau_max_s = 5.0;
    double lifetime_cap_s = 2700.0;  // per-user session cap

    GeoPoint center{10.3852, 55.3997};
    double box_km = 10.0;  // fixes drawn uniformly in this box around center

    double ws_holder_fraction = 0.05;  // fraction of users holding a channel
    bool scrape_metrics = true;
    std::string user_prefix = "vu-";
};

/// One per-second measurement row.
struct SampleRow {
    int t = 0;
    int active_users = 0;
    int scheduled_users = 0;
    std::uint64_t attempted = 0;
    std::uint64_t ok = 0;
    std::uint64_t failed = 0;
    double latency_p50_ms = 0.0;
    double latency_p95_ms = 0.0;
    std::map<std::string, double> utilization;  // <service>.<replica>.util
};

struct PhaseStats {
    std::string label;
    double start_s = 0.0;
    double end_s = 0.0;
    std::uint64_t attempted = 0;
    std::uint64_t ok = 0;
    std::uint64_t failed = 0;
    double latency_p50_ms = 0.0;
    double latency_p95_ms = 0.0;
};

struct RunSummary {
    std::uint64_t attempted = 0;
    std::uint64_t ok = 0;
    std::uint64_t failed = 0;
    std::uint64_t logins = 0;
    std::uint64_t login_failures = 0;
    std::uint64_t ws_messages = 0;
    double max_p95_ms = 0.0;
    std::vector<PhaseStats> phases;
    std::vector<SampleRow> rows;
    std::vector<std::string> util_columns;
    bool completed = false;
};

/// Runs a scenario against a live gateway: spawns and retires virtual
/// users per the schedule, each posting randomized location fixes with
/// uniform think times, and samples metrics once a second. Writes
/// `metrics.csv` and `summary.json` into out_dir when set. A request
/// counts as failed iff no response arrived within the timeout or the
/// status was 500 or above. Throws std::runtime_error when the target is
/// unreachable.
RunSummary run_scenario(const std::vector<ScenarioPhase>& phases,
                        const RunnerOptions& options);

/// The deterministic spawn/remove event list a schedule expands to;
/// exposed for reproducibility checks.
struct ScheduleEvent {
    double t_s = 0.0;
    bool spawn = false;  // false: remove oldest
};
std::vector<ScheduleEvent> expand_schedule(const std::vector<ScenarioPhase>& phases);

/// Per-user think-time sequence for a seed (reproducibility checks).
std::vector<double> tau_preview(std::uint64_t seed, std::uint32_t user_index,
                                std::size_t count, double tau_min_s, double tau_max_s);

void write_csv(const std::filesystem::path& path, const RunSummary& summary);
void write_summary_json(const std::filesystem::path& path, const RunSummary& summary);

}  // namespace wayguard::loadgen
