#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "wayguard/metrics.hpp"

namespace wayguard::scaler {

struct ScalePolicy {
    int min_replicas = 1;
    int max_replicas = 8;
    double scale_up_utilization = 0.8;
    double scale_down_utilization = 0.3;
    int window_seconds = 10;
    // A fresh replica starts consuming work only after this delay.
    std::chrono::milliseconds start_delay{1000};
};

/// One scaling step from the trailing window's mean utilization: +1 above
/// the high threshold, -1 below the low threshold, clamped to
/// [min_replicas, max_replicas]. A window that is not fully populated
/// never changes the count.
int decide(double window_mean_utilization, bool window_full, int current,
           const ScalePolicy& policy);

/// Pool of identical replica workers for one service, scaled on CPU-style
/// utilization accumulated via record_busy. Utilization is sampled once a
/// second; every `window_seconds` samples one scaling evaluation runs and
/// the pool moves at most one replica toward the decision.
///
/// The worker body is supplied by the service; it must return promptly
/// once ctx.stopping() turns true.
class ReplicaPool {
public:
    struct Context {
        int replica_index = 0;
        std::function<bool()> stopping;
        std::function<void(std::chrono::nanoseconds)> record_busy;
        std::function<void(std::uint64_t)> count_items;
    };
    using WorkerLoop = std::function<void(Context&)>;

    ReplicaPool(std::string service, ScalePolicy policy, WorkerLoop loop,
                MetricsRegistry* metrics);
    ~ReplicaPool();

    ReplicaPool(const ReplicaPool&) = delete;
    ReplicaPool& operator=(const ReplicaPool&) = delete;

    /// Spawns min_replicas and, unless manual_tick, a once-a-second
    /// sampling/evaluation thread.
    void start(bool manual_tick = false);
    void stop();

    int replicas() const { return active_count_.load(); }
    double last_window_mean() const { return last_window_mean_.load(); }

    /// Advances accounting by one second of window time. Exposed so logic
    /// tests can drive evaluations without waiting on a wall clock.
    void tick_one_second();

private:
    struct Replica {
        int index = 0;
        std::thread thread;
        std::atomic<bool> stop{false};
        std::atomic<bool> exited{false};
        std::atomic<std::int64_t> busy_ns{0};
        std::atomic<std::uint64_t> items{0};
        std::int64_t sampled_busy_ns = 0;
    };

    void spawn_locked();
    void retire_locked();
    void run_replica(Replica* r);
    void ticker_main();

    std::string service_;
    ScalePolicy policy_;
    WorkerLoop loop_;
    MetricsRegistry* metrics_;

    mutable std::mutex mu_;
    std::vector<std::unique_ptr<Replica>> slots_;  // index-stable
    std::atomic<int> active_count_{0};
    std::atomic<bool> stopping_{false};
    std::atomic<double> last_window_mean_{0.0};

    std::deque<double> window_;
    int ticks_in_window_ = 0;

    std::thread ticker_;
    std::condition_variable ticker_cv_;
    std::mutex ticker_mu_;
};

}  // namespace wayguard::scaler
