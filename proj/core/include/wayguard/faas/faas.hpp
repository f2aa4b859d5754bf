#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

#include "wayguard/broker/broker.hpp"
#include "wayguard/geo.hpp"
#include "wayguard/metrics.hpp"
#include "wayguard/types.hpp"

namespace wayguard::faas {

struct FunctionConfig {
    int trigger_threshold = 10;   // queue size that triggers an invocation
    int low_watermark = 2;        // draining stops below this size
    int window_size = 5;          // W, moving-average window
    double deviation_threshold_m = 200.0;

    std::chrono::milliseconds cold_start_delay{500};
    std::chrono::milliseconds warm_idle_timeout{60000};
    double max_rps_per_worker = 50.0;
    int min_workers = 1;
    int max_workers = 8;

    // Simulated per-fix processing cost on a worker.
    std::chrono::milliseconds item_service_time{15};
    std::chrono::milliseconds watch_poll_interval{200};
    std::chrono::milliseconds evaluate_interval{10000};
    std::chrono::milliseconds lease_ttl{60000};
};

/// Reads the `function` section of a JSON config document; absent keys
/// keep their defaults. Throws std::invalid_argument on violated bounds
/// (low_watermark >= trigger_threshold, window_size < 1, min > max).
FunctionConfig function_config_from_json(const nlohmann::json& root);
void validate(const FunctionConfig& cfg);

struct AnomalyVerdict {
    UserId user;
    std::int64_t at_ms = 0;
    GeoPoint smoothed;
    double deviation_m = 0.0;
    bool anomalous = false;
};

nlohmann::json to_json(const AnomalyVerdict& v);
std::optional<AnomalyVerdict> verdict_from_json(const nlohmann::json& j);

/// Arithmetic mean of the longitudes and latitudes in `window`.
/// Precondition: window is non-empty.
GeoPoint moving_average(std::span<const GeoPoint> window);

/// Default deviation rule on the smoothed track.
bool anomaly_predicate(const LocationFix& fix, const GeoPoint& smoothed,
                       double threshold_m);

/// Last-W points of one user's track.
class SlidingWindow {
public:
    explicit SlidingWindow(int capacity) : capacity_(capacity < 1 ? 1 : capacity) {}

    void push(GeoPoint p) {
        if (points_.size() == static_cast<std::size_t>(capacity_)) points_.pop_front();
        points_.push_back(p);
    }

    GeoPoint mean() const {
        std::vector<GeoPoint> pts(points_.begin(), points_.end());
        return moving_average(pts);
    }

    bool empty() const { return points_.empty(); }
    std::size_t size() const { return points_.size(); }

private:
    std::deque<GeoPoint> points_;
    int capacity_;
};

/// Extension point for the detection algorithm; the deviation rule is the
/// shipped default.
class AnomalyDetector {
public:
    virtual ~AnomalyDetector() = default;
    virtual bool anomalous(const LocationFix& fix, const GeoPoint& smoothed) const = 0;
};

class DeviationRule final : public AnomalyDetector {
public:
    explicit DeviationRule(double threshold_m) : threshold_m_(threshold_m) {}
    bool anomalous(const LocationFix& fix, const GeoPoint& smoothed) const override {
        return anomaly_predicate(fix, smoothed, threshold_m_);
    }

private:
    double threshold_m_;
};

struct DrainStats {
    std::size_t processed = 0;
    std::size_t malformed = 0;
};

/// Drains one user's location queue: dequeues fixes one at a time in
/// arrival order, maintains the sliding window, emits one verdict per
/// well-formed fix. With to_watermark the drain stops once the queue size
/// falls below cfg.low_watermark, otherwise it runs the queue empty.
/// Malformed payloads are counted and skipped, never aborting the drain.
DrainStats process_user_queue(
    broker::Broker& broker, const UserId& user, const FunctionConfig& cfg,
    SlidingWindow& window, const AnomalyDetector& detector, bool to_watermark,
    const std::function<void(const AnomalyVerdict&)>& on_verdict,
    const std::function<void()>& per_item_work = {});

enum class WorkerState { Cold, Warming, Warm, Busy };

/// Pool of function workers. New workers are cold and serve nothing until
/// the cold start delay has elapsed; the pool is resized one worker per
/// evaluation toward ceil(observed_rps / max_rps_per_worker), and warm
/// workers idle past warm_idle_timeout are retired, never below
/// min_workers. Observed rps counts processed items over a sliding window.
class WorkerPool {
public:
    using Task = std::function<std::size_t()>;  // returns items processed

    WorkerPool(FunctionConfig cfg, MetricsRegistry* metrics,
               std::string service = "faas");
    ~WorkerPool();

    void start(bool manual_clock = false);
    void stop();

    void submit(Task task);
    /// Blocks until the task queue is empty and no worker is busy.
    void drain_pending();

    int workers() const { return worker_count_.load(); }
    double observed_rps() const;
    std::size_t backlog() const;

    /// One second of accounting; drives rps sampling and (every
    /// evaluate_interval) a scaling evaluation. Called by the internal
    /// clock thread, or manually from tests.
    void tick_one_second();

private:
    struct Worker {
        int index = 0;
        std::thread thread;
        std::atomic<WorkerState> state{WorkerState::Cold};
        std::atomic<bool> stop{false};
        std::atomic<bool> exited{false};
        std::atomic<std::int64_t> busy_ns{0};
        std::int64_t sampled_busy_ns = 0;
        std::chrono::steady_clock::time_point last_active{};
    };

    void spawn_locked();
    void retire_one_locked();
    void evaluate_locked();
    void worker_main(Worker* w);
    void clock_main();

    FunctionConfig cfg_;
    MetricsRegistry* metrics_;
    std::string service_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Task> tasks_;
    std::vector<std::unique_ptr<Worker>> slots_;
    std::atomic<int> worker_count_{0};
    std::atomic<int> busy_count_{0};
    std::atomic<bool> stopping_{false};

    std::atomic<std::uint64_t> items_total_{0};
    std::deque<std::uint64_t> rps_window_;  // per-second item counts
    std::uint64_t items_sampled_ = 0;
    int ticks_since_evaluate_ = 0;

    std::thread clock_thread_;
    std::condition_variable clock_cv_;
    std::mutex clock_mu_;
};

/// Watches all per-user location queues and invokes a drain on the worker
/// pool whenever a queue reaches the trigger threshold and no invocation
/// for that user is in flight (single-flight, leased through the KV
/// store). Anomalous verdicts are published on the `anomaly` topic.
class FunctionRuntime {
public:
    static constexpr const char* kAnomalyTopic = "anomaly";
    static constexpr const char* kQueuePrefix = "loc:";

    FunctionRuntime(broker::Broker& broker, FunctionConfig cfg, WorkerPool& pool,
                    MetricsRegistry* metrics,
                    std::shared_ptr<AnomalyDetector> detector = nullptr);
    ~FunctionRuntime();

    void start();
    void stop();

    /// Final full drain for shutdown: processes every remaining queued fix
    /// regardless of thresholds, preserving per-user order. The watcher
    /// must be stopped first (stop() is implied).
    void drain_all();

    /// Observation hook for every verdict (tests, recorders).
    void set_verdict_hook(std::function<void(const AnomalyVerdict&)> hook);

    std::uint64_t malformed_total() const { return malformed_.load(); }
    std::uint64_t invocations_total() const { return invocations_.load(); }

private:
    bool try_acquire_lease(const UserId& user);
    void release_lease(const UserId& user);
    std::size_t drain_user(const UserId& user, bool to_watermark);
    void watch_main();
    SlidingWindow& window_for(const UserId& user);

    broker::Broker& broker_;
    FunctionConfig cfg_;
    WorkerPool& pool_;
    MetricsRegistry* metrics_;
    std::shared_ptr<AnomalyDetector> detector_;

    std::mutex windows_mu_;
    std::unordered_map<UserId, std::unique_ptr<SlidingWindow>> windows_;

    std::mutex hook_mu_;
    std::function<void(const AnomalyVerdict&)> verdict_hook_;

    std::atomic<bool> stop_{false};
    std::atomic<bool> started_{false};
    std::atomic<std::uint64_t> malformed_{0};
    std::atomic<std::uint64_t> invocations_{0};
    std::thread watcher_;
};

}  // namespace wayguard::faas
