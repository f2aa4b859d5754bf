// Backend daemon: the gateway, ingest tier, function runtime and help
// component in one process, either on an internal fabric or against an
// external broker daemon.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "wayguard/backend.hpp"
#include "wayguard/broker/tcp.hpp"
#include "wayguard/net.hpp"

namespace {
std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop.store(true); }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wayguard backend daemon"};
    std::string host = "0.0.0.0";
    std::uint16_t port = 8080;
    std::string config_path;
    std::string seed_path;
    std::string broker_addr;  // host:port of an external broker daemon
    app.add_option("--host", host, "HTTP bind address");
    app.add_option("--port", port, "HTTP port (0 picks one)");
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed-users", seed_path, "JSON file with user profiles to preload");
    app.add_option("--broker", broker_addr,
                   "external broker as host:port (default: in-process fabric)");
    CLI11_PARSE(app, argc, argv);

    wayguard::net::raise_nofile_limit();

    wayguard::BackendConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in.is_open()) {
            std::cerr << "cannot open config " << config_path << "\n";
            return 2;
        }
        try {
            cfg = wayguard::backend_config_from_json(nlohmann::json::parse(in));
        } catch (const std::exception& e) {
            std::cerr << "bad config: " << e.what() << "\n";
            return 2;
        }
    }
    cfg.gateway.host = host;
    cfg.gateway.port = port;
    if (const char* secret = std::getenv("WAYGUARD_SECRET")) {
        cfg.gateway.secret = secret;
    }

    std::unique_ptr<wayguard::broker::TcpBroker> remote;
    if (!broker_addr.empty()) {
        auto colon = broker_addr.rfind(':');
        if (colon == std::string::npos) {
            std::cerr << "--broker expects host:port\n";
            return 2;
        }
        remote = std::make_unique<wayguard::broker::TcpBroker>(
            broker_addr.substr(0, colon),
            static_cast<std::uint16_t>(std::stoi(broker_addr.substr(colon + 1))));
    }

    wayguard::Backend backend(cfg, remote.get());

    if (!seed_path.empty()) {
        std::ifstream in(seed_path);
        if (!in.is_open()) {
            std::cerr << "cannot open seed file " << seed_path << "\n";
            return 2;
        }
        auto doc = nlohmann::json::parse(in);
        for (const auto& u : doc.value("users", nlohmann::json::array())) {
            wayguard::UserProfile profile;
            profile.user = u.at("user_id").get<std::string>();
            auto role = wayguard::role_from_string(u.value("role", "volunteer"));
            profile.role = role.value_or(wayguard::Role::Volunteer);
            profile.available = u.value("available", true);
            if (u.contains("longitude") && u.contains("latitude")) {
                profile.last_known =
                    wayguard::GeoPoint{u["longitude"].get<double>(),
                                       u["latitude"].get<double>()};
            }
            backend.directory().put(profile);
            for (const auto& link : u.value("links", nlohmann::json::array())) {
                backend.directory().link(profile.user,
                                         link.at("dementia_user").get<std::string>(),
                                         link.value("priority", 1));
            }
        }
    }

    if (!backend.start()) {
        std::cerr << "failed to start (port in use?)\n";
        return 1;
    }
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "listening on " << host << ":" << backend.http_port() << std::endl;

    while (!g_stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    std::cout << "draining..." << std::endl;
    backend.drain();
    backend.stop();
    return 0;
}
