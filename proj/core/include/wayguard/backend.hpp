#pragma once

#include <filesystem>

#include "wayguard/broker/inproc.hpp"
#include "wayguard/broker/sync_rpc.hpp"
#include "wayguard/faas/faas.hpp"
#include "wayguard/gateway/gateway.hpp"
#include "wayguard/guardian/guardian.hpp"
#include "wayguard/ingest/ingest.hpp"
#include "wayguard/metrics.hpp"

namespace wayguard {

struct BackendConfig {
    gateway::GatewayConfig gateway;
    ingest::IngestConfig ingest;
    faas::FunctionConfig function;
    guardian::GuardianConfig guardian;

    std::filesystem::path store_dir = "wayguard-data";
    int guardian_responders = 2;
    // Modeled per-request cost of the help component's responders.
    std::chrono::milliseconds guardian_service_time{10};
};

/// Parses a JSON config document with optional `gateway`, `ingest`,
/// `function`, `guardian` and `store_dir` sections; absent keys keep
/// their defaults.
BackendConfig backend_config_from_json(const nlohmann::json& root);

/// The whole backend in one process: gateway, ingest, function runtime,
/// help component and their scaling controllers, wired over a message
/// fabric. Uses its own in-process fabric unless an external broker is
/// supplied (multi-process mode).
class Backend {
public:
    explicit Backend(BackendConfig cfg, broker::Broker* external_broker = nullptr);
    ~Backend();

    bool start();
    void stop();

    /// Flushes everything still in flight: runs remaining queue backlogs
    /// through the functions and persists the write buffer.
    void drain();

    broker::Broker& broker() { return *broker_; }
    MetricsRegistry& metrics() { return metrics_; }
    guardian::Directory& directory() { return directory_; }
    guardian::Guardian& guardian() { return *guardian_; }
    ingest::IngestService& ingest() { return *ingest_; }
    ingest::LocationStore& store() { return *store_; }
    faas::FunctionRuntime& runtime() { return *runtime_; }
    faas::WorkerPool& pool() { return *pool_; }
    gateway::Gateway& gateway() { return *gateway_; }

    std::uint16_t http_port() const { return gateway_->port(); }

private:
    BackendConfig cfg_;
    MetricsRegistry metrics_;
    std::unique_ptr<broker::InProcBroker> owned_broker_;
    broker::Broker* broker_ = nullptr;

    guardian::Directory directory_;
    std::unique_ptr<ingest::LocationStore> store_;
    std::unique_ptr<ingest::IngestService> ingest_;
    std::unique_ptr<faas::WorkerPool> pool_;
    std::unique_ptr<faas::FunctionRuntime> runtime_;
    std::unique_ptr<guardian::Guardian> guardian_;
    std::unique_ptr<broker::SyncServer> guardian_rpc_;
    std::unique_ptr<gateway::Gateway> gateway_;
    bool started_ = false;
};

}  // namespace wayguard
