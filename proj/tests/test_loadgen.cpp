#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <random>

#include "wayguard/backend.hpp"
#include "wayguard/loadgen/percentile.hpp"
#include "wayguard/loadgen/runner.hpp"
#include "wayguard/loadgen/scenario.hpp"

using namespace wayguard;
using namespace wayguard::loadgen;
using namespace std::chrono_literals;

TEST_CASE("percentile nearest-rank basics") {
    std::vector<double> one{10.0};
    CHECK(percentile(one, 0.5) == 10.0);

    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i);
    CHECK(percentile(hundred, 0.95) == 95.0);
    CHECK(percentile(hundred, 0.5) == 50.0);
    CHECK(percentile(hundred, 1.0) == 100.0);

    CHECK_THROWS_AS(percentile(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST_CASE("percentile matches a counting oracle on random data") {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> value(0.0, 1e6);
    std::vector<double> data;
    for (int i = 0; i < 10000; ++i) data.push_back(value(rng));
    for (double q : {0.01, 0.25, 0.5, 0.9, 0.95, 0.99, 1.0}) {
        double got = percentile(data, q);
        // Oracle: the smallest v in the sample with #(x <= v) >= ceil(q*n).
        auto rank = static_cast<std::size_t>(std::ceil(q * data.size()));
        double best = std::numeric_limits<double>::infinity();
        for (double candidate : data) {
            std::size_t at_most = 0;
            for (double x : data) {
                if (x <= candidate) ++at_most;
            }
            if (at_most >= rank) best = std::min(best, candidate);
        }
        CHECK(got == best);
    }
}

TEST_CASE("fixed scenario reproduces the checkpoint counts at scale 1") {
    auto phases = build_fixed_scenario(1, 1);
    CHECK(peak_users(phases) == 8400);
    // Build to steady state, then four ramp/hold pairs.
    REQUIRE(phases.size() == 10);
    CHECK(phases[0].end_users == 2400);
    CHECK(phases[2].end_users == 4200);
    CHECK(phases[4].end_users == 8400);
    CHECK(phases[6].end_users == 4200);
    CHECK(phases[8].end_users == 2400);
    // The paper's rates: +6/s and +14/s over five minutes.
    CHECK(phases[2].rate_users_per_s() == doctest::Approx(6.0));
    CHECK(phases[4].rate_users_per_s() == doctest::Approx(14.0));
    CHECK(phases[6].rate_users_per_s() == doctest::Approx(-14.0));
    CHECK(phases[8].rate_users_per_s() == doctest::Approx(-6.0));
    for (const auto& p : phases) CHECK(p.duration_s == doctest::Approx(300.0));
}

TEST_CASE("varying scenario sawtooths between zero and the peak") {
    auto phases = build_varying_scenario(1, 1);
    CHECK(peak_users(phases) == 8400);
    int additions = 0;
    bool saw_zero = false;
    for (const auto& p : phases) {
        if (p.kind == PhaseKind::Ramp && p.start_users == 0 && p.end_users == 8400) {
            ++additions;
            CHECK(p.rate_users_per_s() == doctest::Approx(56.0));
        }
        if (p.end_users == 0) saw_zero = true;
    }
    CHECK(additions == 6);
    CHECK(saw_zero);
    CHECK(phases[2].rate_users_per_s() == doctest::Approx(40.0));
    CHECK(phases.back().start_users == 2400);
}

TEST_CASE("scaling divides counts and durations") {
    auto phases = build_fixed_scenario(20, 5);
    CHECK(peak_users(phases) == 420);
    for (const auto& p : phases) CHECK(p.duration_s == doctest::Approx(60.0));
    CHECK(phases[0].end_users == 120);
    CHECK(phases[2].end_users == 210);

    auto varying = build_varying_scenario(20, 1);
    CHECK(peak_users(varying) == 420);

    CHECK_THROWS_AS(build_fixed_scenario(5000, 1), std::invalid_argument);
}

TEST_CASE("scheduled_users follows ramps and holds") {
    auto phases = build_fixed_scenario(20, 5);
    CHECK(scheduled_users(phases, 0.0) == 0);
    CHECK(scheduled_users(phases, 60.0) == 120);   // end of build
    CHECK(scheduled_users(phases, 90.0) == 120);   // mid steady hold
    CHECK(scheduled_users(phases, 150.0) == 165);  // halfway up the first ramp
    CHECK(scheduled_users(phases, total_duration_s(phases) + 10) == 120);
}

TEST_CASE("schedules and think times are reproducible from the seed") {
    auto a = expand_schedule(build_varying_scenario(20, 5));
    auto b = expand_schedule(build_varying_scenario(20, 5));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].t_s == b[i].t_s);
        CHECK(a[i].spawn == b[i].spawn);
    }
    auto taus1 = tau_preview(99, 7, 32, 1.0, 5.0);
    auto taus2 = tau_preview(99, 7, 32, 1.0, 5.0);
    CHECK(taus1 == taus2);
    for (double t : taus1) {
        CHECK(t >= 1.0);
        CHECK(t <= 5.0);
    }
    auto other_user = tau_preview(99, 8, 32, 1.0, 5.0);
    CHECK(taus1 != other_user);
}

TEST_CASE("expanded events hit exact phase end counts") {
    auto phases = build_varying_scenario(20, 5);
    auto events = expand_schedule(phases);
    // Walk the events; at each phase boundary the running count must equal
    // the phase's end count.
    std::size_t next = 0;
    int count = 0;
    double t = 0.0;
    for (const auto& phase : phases) {
        t += phase.duration_s;
        while (next < events.size() && events[next].t_s <= t + 1e-9) {
            count += events[next].spawn ? 1 : -1;
            ++next;
        }
        CHECK(count == phase.end_users);
        CHECK(count >= 0);
    }
    CHECK(next == events.size());
}

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path()
               / ("wayguard-lg-" + broker::Uuid::random().to_string());
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

BackendConfig small_backend(const std::filesystem::path& dir) {
    BackendConfig cfg;
    cfg.store_dir = dir / "store";
    cfg.gateway.port = 0;
    cfg.gateway.capacity_units_per_second = 500.0;
    cfg.gateway.scaling.start_delay = 0ms;
    cfg.gateway.sync.retries = 100;
    cfg.gateway.sync.backoff = 10ms;
    cfg.ingest.capacity_units_per_second = 500.0;
    cfg.ingest.scaling.start_delay = 0ms;
    cfg.function.item_service_time = 1ms;
    cfg.function.cold_start_delay = 50ms;
    cfg.guardian_service_time = 0ms;
    return cfg;
}

}  // namespace

TEST_CASE("zero-length scenario writes a header-only csv") {
    TempDir dir;
    Backend backend(small_backend(dir.path));
    REQUIRE(backend.start());

    RunnerOptions opt;
    opt.port = backend.http_port();
    opt.out_dir = dir.path / "run";
    auto summary = run_scenario({}, opt);
    CHECK(summary.attempted == 0);
    CHECK(summary.completed);

    std::ifstream csv(dir.path / "run" / "metrics.csv");
    REQUIRE(csv.is_open());
    std::string header;
    REQUIRE(std::getline(csv, header));
    CHECK(header.rfind("t,active_users,attempted,ok,failed,latency_p50_ms,latency_p95_ms",
                       0)
          == 0);
    std::string rest;
    CHECK(!std::getline(csv, rest));
    backend.stop();
}

TEST_CASE("a small live run tracks the schedule with zero failures") {
    TempDir dir;
    Backend backend(small_backend(dir.path));
    REQUIRE(backend.start());

    std::vector<ScenarioPhase> phases;
    phases.push_back({PhaseKind::Ramp, 2.0, 0, 10, "build"});
    phases.push_back({PhaseKind::Hold, 15.0, 10, 10, "hold"});

    RunnerOptions opt;
    opt.port = backend.http_port();
    opt.seed = 5;
    opt.out_dir = dir.path / "run";
    opt.io_threads = 16;
    opt.lifetime_cap_s = 600.0;
    auto summary = run_scenario(phases, opt);

    CHECK(summary.completed);
    CHECK(summary.login_failures == 0);
    CHECK(summary.failed == 0);
    // 10 users for ~15 s at one fix per 3 s on average.
    CHECK(summary.attempted >= 25);
    CHECK(summary.attempted <= 120);
    // Realized active users match the schedule in the hold.
    for (const auto& row : summary.rows) {
        if (row.t >= 3 && row.t <= 16) CHECK(row.active_users == 10);
    }
    // The CSV exists with utilization columns.
    std::ifstream csv(dir.path / "run" / "metrics.csv");
    std::string header;
    REQUIRE(std::getline(csv, header));
    CHECK(header.find("gateway.0.util") != std::string::npos);

    backend.drain();
    CHECK(backend.store().count() == summary.ok);
    backend.stop();
}
