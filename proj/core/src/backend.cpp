#include "wayguard/backend.hpp"

namespace wayguard {

namespace {

void read_scale_policy(const nlohmann::json& j, scaler::ScalePolicy& p) {
    if (j.contains("min_replicas")) p.min_replicas = j["min_replicas"].get<int>();
    if (j.contains("max_replicas")) p.max_replicas = j["max_replicas"].get<int>();
    if (j.contains("scale_up_utilization")) {
        p.scale_up_utilization = j["scale_up_utilization"].get<double>();
    }
    if (j.contains("scale_down_utilization")) {
        p.scale_down_utilization = j["scale_down_utilization"].get<double>();
    }
    if (j.contains("window_seconds")) p.window_seconds = j["window_seconds"].get<int>();
    if (j.contains("start_delay_ms")) {
        p.start_delay = std::chrono::milliseconds(j["start_delay_ms"].get<std::int64_t>());
    }
}

}  // namespace

BackendConfig backend_config_from_json(const nlohmann::json& root) {
    BackendConfig cfg;
    cfg.function = faas::function_config_from_json(root);
    if (root.contains("store_dir")) {
        cfg.store_dir = root["store_dir"].get<std::string>();
    }
    if (root.contains("gateway")) {
        const auto& g = root["gateway"];
        if (g.contains("host")) cfg.gateway.host = g["host"].get<std::string>();
        if (g.contains("port")) cfg.gateway.port = g["port"].get<std::uint16_t>();
        if (g.contains("secret")) cfg.gateway.secret = g["secret"].get<std::string>();
        if (g.contains("token_ttl_s")) {
            cfg.gateway.token_ttl = std::chrono::seconds(g["token_ttl_s"].get<std::int64_t>());
        }
        if (g.contains("request_budget_ms")) {
            cfg.gateway.request_budget =
                std::chrono::milliseconds(g["request_budget_ms"].get<std::int64_t>());
        }
        if (g.contains("capacity_units_per_second")) {
            cfg.gateway.capacity_units_per_second =
                g["capacity_units_per_second"].get<double>();
        }
        if (g.contains("work_units_per_request")) {
            cfg.gateway.work_units_per_request = g["work_units_per_request"].get<double>();
        }
        if (g.contains("sync_retries")) cfg.gateway.sync.retries = g["sync_retries"].get<int>();
        if (g.contains("sync_backoff_ms")) {
            cfg.gateway.sync.backoff =
                std::chrono::milliseconds(g["sync_backoff_ms"].get<std::int64_t>());
        }
        if (g.contains("scaling")) read_scale_policy(g["scaling"], cfg.gateway.scaling);
    }
    if (root.contains("ingest")) {
        const auto& i = root["ingest"];
        if (i.contains("flush_threshold")) {
            cfg.ingest.flush_threshold = i["flush_threshold"].get<int>();
        }
        if (i.contains("flush_interval_ms")) {
            cfg.ingest.flush_interval =
                std::chrono::milliseconds(i["flush_interval_ms"].get<std::int64_t>());
        }
        if (i.contains("capacity_units_per_second")) {
            cfg.ingest.capacity_units_per_second =
                i["capacity_units_per_second"].get<double>();
        }
        if (i.contains("work_units_per_request")) {
            cfg.ingest.work_units_per_request = i["work_units_per_request"].get<double>();
        }
        if (i.contains("scaling")) read_scale_policy(i["scaling"], cfg.ingest.scaling);
    }
    if (root.contains("guardian")) {
        const auto& g = root["guardian"];
        if (g.contains("notify_volunteers")) {
            cfg.guardian.notify_volunteers = g["notify_volunteers"].get<int>();
        }
        if (g.contains("max_radius_m")) {
            cfg.guardian.max_radius_m = g["max_radius_m"].get<double>();
        }
        if (g.contains("automatic_debounce_ms")) {
            cfg.guardian.automatic_debounce =
                std::chrono::milliseconds(g["automatic_debounce_ms"].get<std::int64_t>());
        }
    }
    return cfg;
}

Backend::Backend(BackendConfig cfg, broker::Broker* external_broker)
    : cfg_(std::move(cfg)) {
    if (external_broker) {
        broker_ = external_broker;
    } else {
        owned_broker_ = std::make_unique<broker::InProcBroker>();
        broker_ = owned_broker_.get();
    }
    store_ = std::make_unique<ingest::LocationStore>(cfg_.store_dir);
    ingest_ = std::make_unique<ingest::IngestService>(*broker_, *store_, cfg_.ingest,
                                                      &metrics_);
    pool_ = std::make_unique<faas::WorkerPool>(cfg_.function, &metrics_);
    runtime_ = std::make_unique<faas::FunctionRuntime>(*broker_, cfg_.function, *pool_,
                                                       &metrics_);
    guardian_ = std::make_unique<guardian::Guardian>(
        *broker_, directory_, cfg_.guardian,
        [this](const UserId& user, const nlohmann::json& message) {
            broker_->publish(cfg_.gateway.notify_topic,
                             broker::Envelope::make(nlohmann::json{
                                 {"user", user}, {"message", message}}.dump()));
        },
        &metrics_);
    gateway_ = std::make_unique<gateway::Gateway>(*broker_, directory_, cfg_.gateway,
                                                  &metrics_);
}

Backend::~Backend() { stop(); }

bool Backend::start() {
    if (started_) return true;
    ingest_->start();
    pool_->start();
    runtime_->start();
    guardian_->start();
    guardian_rpc_ = std::make_unique<broker::SyncServer>(
        *broker_, cfg_.gateway.guardian_queue,
        [this](const std::string& payload) -> std::string {
            if (cfg_.guardian_service_time.count() > 0) {
                std::this_thread::sleep_for(cfg_.guardian_service_time);
            }
            auto request = nlohmann::json::parse(payload);
            return guardian::dispatch_rpc(*guardian_, directory_, request).dump();
        },
        broker::SyncServerOptions{.responders = cfg_.guardian_responders});
    if (!gateway_->start()) return false;
    started_ = true;
    return true;
}

void Backend::stop() {
    if (!started_) return;
    started_ = false;
    gateway_->stop();
    guardian_rpc_.reset();
    guardian_->stop();
    runtime_->stop();
    pool_->stop();
    ingest_->stop();
}

void Backend::drain() {
    runtime_->drain_all();
    ingest_->drain_and_close();
}

}  // namespace wayguard
