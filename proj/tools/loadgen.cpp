// Load harness CLI. `loadgen run` drives one scenario against a running
// gateway and writes metrics.csv + summary.json into the output directory.
// Exit code 0 iff the run completed with zero failed requests.

#include <iostream>

#include "CLI11.hpp"
#include "wayguard/loadgen/runner.hpp"
#include "wayguard/loadgen/scenario.hpp"
#include "wayguard/net.hpp"

int main(int argc, char** argv) {
    CLI::App app{"wayguard load generator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a load scenario");
    std::string scenario = "fixed";
    int scale = 20;
    int time_scale = 5;
    std::string target = "http://127.0.0.1:8080";
    std::uint64_t seed = 1;
    std::string out_dir = "loadgen-out";
    int io_threads = 256;
    double ws_fraction = 0.05;
    run->add_option("--scenario", scenario, "fixed | varying")
        ->check(CLI::IsMember({"fixed", "varying"}));
    run->add_option("--scale", scale, "divide all user counts by this")
        ->check(CLI::PositiveNumber);
    run->add_option("--time-scale", time_scale, "divide all durations by this")
        ->check(CLI::PositiveNumber);
    run->add_option("--target", target, "gateway base URL (http://host:port)");
    run->add_option("--seed", seed, "PRNG seed for schedules and payloads");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--io-threads", io_threads, "request worker threads");
    run->add_option("--ws-fraction", ws_fraction,
                    "fraction of users holding a notification channel");
    CLI11_PARSE(app, argc, argv);

    wayguard::net::raise_nofile_limit();

    std::string host = target;
    if (host.rfind("http://", 0) == 0) host = host.substr(7);
    std::uint16_t port = 80;
    if (auto colon = host.rfind(':'); colon != std::string::npos) {
        port = static_cast<std::uint16_t>(std::stoi(host.substr(colon + 1)));
        host = host.substr(0, colon);
    }

    try {
        auto phases = scenario == "fixed"
                          ? wayguard::loadgen::build_fixed_scenario(scale, time_scale)
                          : wayguard::loadgen::build_varying_scenario(scale, time_scale);
        wayguard::loadgen::RunnerOptions opt;
        opt.host = host;
        opt.port = port;
        opt.seed = seed;
        opt.out_dir = out_dir;
        opt.io_threads = io_threads;
        opt.ws_holder_fraction = ws_fraction;
        opt.lifetime_cap_s = 45.0 * 60.0 / time_scale;

        std::cout << "scenario " << scenario << " scale=" << scale
                  << " time-scale=" << time_scale << ": peak "
                  << wayguard::loadgen::peak_users(phases) << " users, "
                  << wayguard::loadgen::total_duration_s(phases) << " s" << std::endl;
        auto summary = wayguard::loadgen::run_scenario(phases, opt);
        std::cout << "attempted " << summary.attempted << ", ok " << summary.ok
                  << ", failed " << summary.failed << ", max p95 " << summary.max_p95_ms
                  << " ms" << std::endl;
        std::cout << "results in " << out_dir << std::endl;
        return summary.failed == 0 && summary.completed ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
}
