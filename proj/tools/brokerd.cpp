// Standalone broker daemon speaking the length-prefixed frame protocol,
// for multi-process deployments.

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "wayguard/broker/tcp.hpp"
#include "wayguard/net.hpp"

namespace {
std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop.store(true); }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wayguard broker daemon"};
    std::string host = "0.0.0.0";
    std::uint16_t port = 7371;
    std::size_t max_payload = 64 * 1024;
    app.add_option("--host", host, "bind address");
    app.add_option("--port", port, "port (0 picks one)");
    app.add_option("--max-payload", max_payload, "max message payload in bytes");
    CLI11_PARSE(app, argc, argv);

    wayguard::net::raise_nofile_limit();
    wayguard::broker::InProcBroker fabric(
        wayguard::broker::BrokerLimits{.max_payload_bytes = max_payload});
    wayguard::broker::BrokerServer server(fabric);
    if (!server.start(host, port)) {
        std::cerr << "failed to bind " << host << ":" << port << "\n";
        return 1;
    }
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "broker listening on " << host << ":" << server.port() << std::endl;
    while (!g_stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    server.stop();
    fabric.shutdown();
    return 0;
}
