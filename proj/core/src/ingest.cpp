#include "wayguard/ingest/ingest.hpp"

#include "wayguard/broker/sync_rpc.hpp"
#include "wayguard/validate.hpp"

namespace wayguard::ingest {

IngestService::IngestService(broker::Broker& broker, LocationStore& store,
                             IngestConfig cfg, MetricsRegistry* metrics)
    : broker_(broker), store_(store), cfg_(std::move(cfg)), metrics_(metrics) {
    pool_ = std::make_unique<scaler::ReplicaPool>(
        "ingest", cfg_.scaling,
        [this](scaler::ReplicaPool::Context& ctx) { responder_loop(ctx); }, metrics_);
}

IngestService::~IngestService() { stop(); }

void IngestService::start() {
    stop_.store(false);
    flusher_ = std::thread([this] { flusher_main(); });
    pool_->start();
}

void IngestService::stop() {
    if (stop_.exchange(true)) return;
    flush_cv_.notify_all();
    if (flusher_.joinable()) flusher_.join();
    pool_->stop();
}

AcceptStatus IngestService::accept_fix(const LocationFix& fix) {
    auto status = broker_.enqueue("loc:" + fix.user,
                                  broker::Envelope::make(to_json(fix).dump()));
    if (status != broker::Status::Ok) {
        if (metrics_) metrics_->inc("ingest.enqueue_failures");
        return AcceptStatus::BrokerUnavailable;
    }
    bool want_flush = false;
    {
        std::lock_guard lk(buf_mu_);
        if (pending_.empty()) oldest_pending_ = std::chrono::steady_clock::now();
        pending_.push_back(fix);
        if (pending_.size() >= static_cast<std::size_t>(cfg_.flush_threshold)) {
            flush_requested_ = true;
            want_flush = true;
        }
    }
    if (want_flush) flush_cv_.notify_one();
    broker_.publish(cfg_.fixes_topic, broker::Envelope::make(to_json(fix).dump()));
    accepted_.fetch_add(1, std::memory_order_relaxed);
    if (metrics_) metrics_->inc("ingest.accepted");
    return AcceptStatus::Ok;
}

std::size_t IngestService::buffered() const {
    std::lock_guard lk(buf_mu_);
    return pending_.size();
}

void IngestService::flusher_main() {
    std::unique_lock lk(buf_mu_);
    while (!stop_.load()) {
        flush_cv_.wait_for(lk, std::chrono::milliseconds(200),
                           [this] { return flush_requested_ || stop_.load(); });
        flush_requested_ = false;
        bool due = !pending_.empty()
                   && (pending_.size() >= static_cast<std::size_t>(cfg_.flush_threshold)
                       || std::chrono::steady_clock::now() - oldest_pending_
                              >= cfg_.flush_interval);
        if (!due) continue;
        lk.unlock();
        flush_batch();
        lk.lock();
    }
}

bool IngestService::flush_batch() {
    std::vector<LocationFix> batch;
    {
        std::lock_guard lk(buf_mu_);
        if (pending_.empty()) return true;
        batch.assign(pending_.begin(), pending_.end());
        pending_.clear();
    }
    if (store_.append_batch(batch)) {
        flushes_.fetch_add(1, std::memory_order_relaxed);
        if (metrics_) {
            metrics_->inc("ingest.flushes");
            metrics_->inc("ingest.flushed_records", static_cast<double>(batch.size()));
        }
        return true;
    }
    // Failed batch goes back to the front, in order, for the next attempt.
    {
        std::lock_guard lk(buf_mu_);
        pending_.insert(pending_.begin(), batch.begin(), batch.end());
        oldest_pending_ = std::chrono::steady_clock::now() - cfg_.flush_interval;
    }
    if (metrics_) metrics_->inc("ingest.flush_failures");
    return false;
}

void IngestService::flush_now() { flush_batch(); }

void IngestService::drain_and_close() {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        if (flush_batch() && buffered() == 0) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

void IngestService::responder_loop(scaler::ReplicaPool::Context& ctx) {
    while (!ctx.stopping()) {
        auto env = broker_.dequeue(cfg_.request_queue, std::chrono::milliseconds(50));
        if (!env) continue;
        auto busy = std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::duration<double>(cfg_.work_units_per_request
                                          / cfg_.capacity_units_per_second));
        std::this_thread::sleep_for(busy);
        ctx.record_busy(busy);
        ctx.count_items(1);
        broker::answer_sync_request(
            broker_, *env,
            [this](const std::string& payload) -> std::string {
                auto doc = nlohmann::json::parse(payload);
                auto fix = fix_from_json(doc.at("fix"));
                if (!fix) throw std::runtime_error("malformed fix");
                if (auto bad = validate_fix(*fix)) {
                    return nlohmann::json{{"status", "rejected"}, {"field", *bad}}.dump();
                }
                if (accept_fix(*fix) != AcceptStatus::Ok) {
                    throw std::runtime_error("broker unavailable");
                }
                return nlohmann::json{{"status", "accepted"}}.dump();
            },
            cfg_.result_ttl);
    }
}

}  // namespace wayguard::ingest
