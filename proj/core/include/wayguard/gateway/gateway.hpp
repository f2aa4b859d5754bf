#pragma once

#include <atomic>
#include <thread>

#include "wayguard/broker/broker.hpp"
#include "wayguard/broker/sync_rpc.hpp"
#include "wayguard/gateway/auth.hpp"
#include "wayguard/gateway/http.hpp"
#include "wayguard/gateway/notify.hpp"
#include "wayguard/guardian/guardian.hpp"
#include "wayguard/metrics.hpp"
#include "wayguard/scaler/stage.hpp"

namespace wayguard::gateway {

struct GatewayConfig {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;  // 0 picks an ephemeral port
    std::string secret = "dev-secret";
    std::chrono::seconds token_ttl{3600};
    std::chrono::milliseconds request_budget{5000};

    // Modeled per-request processing cost of the gateway itself.
    double work_units_per_request = 1.0;
    double capacity_units_per_second = 60.0;
    scaler::ScalePolicy scaling;

    broker::SyncCallOptions sync{
        .retries = 45,
        .backoff = std::chrono::milliseconds(100),
        .result_ttl = std::chrono::milliseconds(30000),
    };
    NotifyConfig notify;

    std::string ingest_queue = "ingest:requests";
    std::string guardian_queue = "guardian:requests";
    std::string notify_topic = "notify";
};

/// Single HTTP entry point: authenticates each request exactly once,
/// forwards it over the broker carrying the verified identity (never the
/// raw token), enforces the request budget and owns the per-user
/// notification channels behind `GET /ws`.
class Gateway {
public:
    Gateway(broker::Broker& broker, guardian::Directory& directory, GatewayConfig cfg,
            MetricsRegistry* metrics);
    ~Gateway();

    bool start();
    void stop();

    std::uint16_t port() const { return server_.port(); }
    ChannelRegistry& channels() { return channels_; }
    scaler::ModeledStage& stage() { return *stage_; }
    const GatewayConfig& config() const { return cfg_; }

    /// Outcome-returning push used by the notify topic consumer and tests.
    PushOutcome push_notification(const UserId& user, const std::string& message);

private:
    HttpResponse route(const HttpRequest& req);
    HttpResponse handle_login(const HttpRequest& req);
    HttpResponse handle_locations(const HttpRequest& req, const TokenClaims& identity,
                                  std::chrono::steady_clock::time_point deadline);
    HttpResponse guardian_rpc(const nlohmann::json& request,
                              std::chrono::steady_clock::time_point deadline);
    void handle_ws_upgrade(const HttpRequest& req, net::Socket sock);
    void notify_consumer();
    std::optional<TokenClaims> authenticate(const HttpRequest& req) const;

    broker::Broker& broker_;
    guardian::Directory& directory_;
    GatewayConfig cfg_;
    MetricsRegistry* metrics_;

    HttpServer server_;
    ChannelRegistry channels_;
    std::unique_ptr<scaler::ModeledStage> stage_;
    std::atomic<bool> stop_{false};
    std::thread notify_thread_;
};

}  // namespace wayguard::gateway
