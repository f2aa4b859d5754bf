#include "wayguard/scaler/replica.hpp"

#include <algorithm>
#include <cmath>

namespace wayguard::scaler {

int decide(double window_mean_utilization, bool window_full, int current,
           const ScalePolicy& policy) {
    if (!window_full) return current;
    if (window_mean_utilization > policy.scale_up_utilization) {
        return std::min(current + 1, policy.max_replicas);
    }
    if (window_mean_utilization < policy.scale_down_utilization) {
        return std::max(current - 1, policy.min_replicas);
    }
    return current;
}

ReplicaPool::ReplicaPool(std::string service, ScalePolicy policy, WorkerLoop loop,
                         MetricsRegistry* metrics)
    : service_(std::move(service)),
      policy_(policy),
      loop_(std::move(loop)),
      metrics_(metrics) {}

ReplicaPool::~ReplicaPool() { stop(); }

void ReplicaPool::start(bool manual_tick) {
    {
        std::lock_guard lk(mu_);
        for (int i = 0; i < policy_.min_replicas; ++i) spawn_locked();
    }
    if (metrics_) metrics_->set(service_ + ".replicas", replicas());
    if (!manual_tick) {
        ticker_ = std::thread([this] { ticker_main(); });
    }
}

void ReplicaPool::stop() {
    if (stopping_.exchange(true)) return;
    ticker_cv_.notify_all();
    if (ticker_.joinable()) ticker_.join();
    std::lock_guard lk(mu_);
    for (auto& r : slots_) {
        if (r) r->stop.store(true);
    }
    for (auto& r : slots_) {
        if (r && r->thread.joinable()) r->thread.join();
    }
    slots_.clear();
    active_count_.store(0);
}

void ReplicaPool::spawn_locked() {
    // Reuse the lowest exited slot so replica indices stay dense.
    for (auto& slot : slots_) {
        if (slot && slot->exited.load()) {
            if (slot->thread.joinable()) slot->thread.join();
            int index = slot->index;
            slot = std::make_unique<Replica>();
            slot->index = index;
            Replica* raw = slot.get();
            slot->thread = std::thread([this, raw] { run_replica(raw); });
            active_count_.fetch_add(1);
            return;
        }
    }
    auto r = std::make_unique<Replica>();
    r->index = static_cast<int>(slots_.size());
    Replica* raw = r.get();
    r->thread = std::thread([this, raw] { run_replica(raw); });
    slots_.push_back(std::move(r));
    active_count_.fetch_add(1);
}

void ReplicaPool::retire_locked() {
    // Newest live replica goes first.
    for (auto it = slots_.rbegin(); it != slots_.rend(); ++it) {
        auto& r = *it;
        if (r && !r->exited.load() && !r->stop.load()) {
            r->stop.store(true);
            active_count_.fetch_sub(1);
            return;
        }
    }
}

void ReplicaPool::run_replica(Replica* r) {
    // Start delay models replica provisioning; no work is consumed yet.
    auto deadline = std::chrono::steady_clock::now() + policy_.start_delay;
    while (std::chrono::steady_clock::now() < deadline) {
        if (r->stop.load() || stopping_.load()) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    Context ctx;
    ctx.replica_index = r->index;
    ctx.stopping = [this, r] { return r->stop.load() || stopping_.load(); };
    ctx.record_busy = [r](std::chrono::nanoseconds d) {
        r->busy_ns.fetch_add(d.count(), std::memory_order_relaxed);
    };
    ctx.count_items = [r](std::uint64_t n) {
        r->items.fetch_add(n, std::memory_order_relaxed);
    };
    if (!ctx.stopping()) {
        loop_(ctx);
    }
    r->exited.store(true);
}

void ReplicaPool::ticker_main() {
    std::unique_lock lk(ticker_mu_);
    while (!stopping_.load()) {
        if (ticker_cv_.wait_for(lk, std::chrono::seconds(1),
                                [this] { return stopping_.load(); })) {
            break;
        }
        tick_one_second();
    }
}

void ReplicaPool::tick_one_second() {
    std::lock_guard lk(mu_);
    if (stopping_.load()) return;

    double busy_seconds = 0.0;
    for (auto& r : slots_) {
        if (!r) continue;
        std::int64_t total = r->busy_ns.load(std::memory_order_relaxed);
        std::int64_t delta = total - r->sampled_busy_ns;
        r->sampled_busy_ns = total;
        double util = std::clamp(static_cast<double>(delta) / 1e9, 0.0, 1.0);
        bool live = !r->exited.load() && !r->stop.load();
        if (live) busy_seconds += static_cast<double>(delta) / 1e9;
        if (metrics_) {
            metrics_->set(service_ + "." + std::to_string(r->index) + ".util",
                          live ? util : 0.0);
            metrics_->set(service_ + "." + std::to_string(r->index) + ".processed",
                          static_cast<double>(r->items.load(std::memory_order_relaxed)));
        }
    }

    int current = active_count_.load();
    double sample = current > 0
                        ? std::clamp(busy_seconds / static_cast<double>(current), 0.0, 1.0)
                        : 0.0;
    window_.push_back(sample);
    ++ticks_in_window_;

    if (ticks_in_window_ >= policy_.window_seconds) {
        double mean = 0.0;
        for (double s : window_) mean += s;
        mean /= static_cast<double>(window_.size());
        last_window_mean_.store(mean);

        int target = decide(mean, true, current, policy_);
        if (target > current) {
            spawn_locked();
        } else if (target < current) {
            retire_locked();
        }
        window_.clear();
        ticks_in_window_ = 0;
    }

    if (metrics_) metrics_->set(service_ + ".replicas", active_count_.load());
}

}  // namespace wayguard::scaler
