#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <thread>

#include "wayguard/broker/broker.hpp"
#include "wayguard/ingest/store.hpp"
#include "wayguard/metrics.hpp"
#include "wayguard/scaler/replica.hpp"

namespace wayguard::ingest {

struct IngestConfig {
    int flush_threshold = 50;
    std::chrono::milliseconds flush_interval{2000};

    // Modeled processing cost per request on a responder replica.
    double work_units_per_request = 1.0;
    double capacity_units_per_second = 150.0;
    scaler::ScalePolicy scaling;

    std::string request_queue = "ingest:requests";
    std::string fixes_topic = "fixes";
    std::chrono::milliseconds result_ttl{30000};
};

enum class AcceptStatus { Ok, BrokerUnavailable };

/// Accepts validated fixes: buffers them for bulk persistence, feeds the
/// per-user location queue `loc:<user>` and announces the fix on the
/// `fixes` topic. The ack never waits for a flush or function execution.
///
/// Requests also arrive over the broker on `ingest:requests` (payload
/// `{"identity": .., "fix": ..}`), served by a replica pool whose size
/// follows CPU-style utilization.
class IngestService {
public:
    IngestService(broker::Broker& broker, LocationStore& store, IngestConfig cfg,
                  MetricsRegistry* metrics);
    ~IngestService();

    void start();
    void stop();

    AcceptStatus accept_fix(const LocationFix& fix);

    /// Final flush; afterwards store count equals total accepted fixes.
    /// Idempotent.
    void drain_and_close();

    /// Pending (not yet flushed) record count.
    std::size_t buffered() const;
    std::uint64_t accepted_total() const { return accepted_.load(); }
    std::uint64_t flushes_total() const { return flushes_.load(); }
    int replicas() const { return pool_ ? pool_->replicas() : 0; }
    scaler::ReplicaPool* pool() { return pool_.get(); }

    /// Forces one flush attempt now (tests).
    void flush_now();

private:
    void flusher_main();
    bool flush_batch();
    void responder_loop(scaler::ReplicaPool::Context& ctx);

    broker::Broker& broker_;
    LocationStore& store_;
    IngestConfig cfg_;
    MetricsRegistry* metrics_;

    mutable std::mutex buf_mu_;
    std::deque<LocationFix> pending_;
    std::chrono::steady_clock::time_point oldest_pending_{};
    std::condition_variable flush_cv_;
    bool flush_requested_ = false;

    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> accepted_{0};
    std::atomic<std::uint64_t> flushes_{0};
    std::thread flusher_;
    std::unique_ptr<scaler::ReplicaPool> pool_;
};

}  // namespace wayguard::ingest
