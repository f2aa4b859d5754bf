#include "wayguard/faas/faas.hpp"

#include <cmath>

namespace wayguard::faas {

void validate(const FunctionConfig& cfg) {
    if (cfg.low_watermark >= cfg.trigger_threshold) {
        throw std::invalid_argument("low_watermark must be below trigger_threshold");
    }
    if (cfg.window_size < 1) {
        throw std::invalid_argument("window_size must be at least 1");
    }
    if (cfg.min_workers > cfg.max_workers || cfg.min_workers < 0) {
        throw std::invalid_argument("worker bounds invalid");
    }
}

FunctionConfig function_config_from_json(const nlohmann::json& root) {
    FunctionConfig cfg;
    if (!root.contains("function")) return cfg;
    const auto& f = root.at("function");
    auto read_int = [&](const char* key, int& out) {
        if (f.contains(key)) out = f.at(key).get<int>();
    };
    auto read_double = [&](const char* key, double& out) {
        if (f.contains(key)) out = f.at(key).get<double>();
    };
    auto read_ms = [&](const char* key, std::chrono::milliseconds& out) {
        if (f.contains(key)) out = std::chrono::milliseconds(f.at(key).get<std::int64_t>());
    };
    read_int("trigger_threshold", cfg.trigger_threshold);
    read_int("low_watermark", cfg.low_watermark);
    read_int("window_size", cfg.window_size);
    read_double("deviation_threshold_m", cfg.deviation_threshold_m);
    read_ms("cold_start_delay_ms", cfg.cold_start_delay);
    read_ms("warm_idle_timeout_ms", cfg.warm_idle_timeout);
    read_double("max_rps_per_worker", cfg.max_rps_per_worker);
    read_int("min_workers", cfg.min_workers);
    read_int("max_workers", cfg.max_workers);
    read_ms("item_service_time_ms", cfg.item_service_time);
    read_ms("watch_poll_interval_ms", cfg.watch_poll_interval);
    read_ms("evaluate_interval_ms", cfg.evaluate_interval);
    validate(cfg);
    return cfg;
}

nlohmann::json to_json(const AnomalyVerdict& v) {
    return nlohmann::json{
        {"user_id", v.user},
        {"timestamp", v.at_ms},
        {"smoothed", to_json(v.smoothed)},
        {"deviation_m", v.deviation_m},
        {"anomalous", v.anomalous},
    };
}

std::optional<AnomalyVerdict> verdict_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("user_id") || !j.contains("timestamp")
        || !j.contains("smoothed") || !j.contains("deviation_m")
        || !j.contains("anomalous")) {
        return std::nullopt;
    }
    auto smoothed = geopoint_from_json(j.at("smoothed"));
    if (!smoothed) return std::nullopt;
    AnomalyVerdict v;
    v.user = j.at("user_id").get<std::string>();
    v.at_ms = j.at("timestamp").get<std::int64_t>();
    v.smoothed = *smoothed;
    v.deviation_m = j.at("deviation_m").get<double>();
    v.anomalous = j.at("anomalous").get<bool>();
    return v;
}

GeoPoint moving_average(std::span<const GeoPoint> window) {
    double lon = 0.0;
    double lat = 0.0;
    for (const auto& p : window) {
        lon += p.longitude;
        lat += p.latitude;
    }
    const auto n = static_cast<double>(window.size());
    return GeoPoint{lon / n, lat / n};
}

bool anomaly_predicate(const LocationFix& fix, const GeoPoint& smoothed,
                       double threshold_m) {
    return haversine_m(fix.point(), smoothed) > threshold_m;
}

DrainStats process_user_queue(
    broker::Broker& broker, const UserId& user, const FunctionConfig& cfg,
    SlidingWindow& window, const AnomalyDetector& detector, bool to_watermark,
    const std::function<void(const AnomalyVerdict&)>& on_verdict,
    const std::function<void()>& per_item_work) {
    const std::string queue = std::string(FunctionRuntime::kQueuePrefix) + user;
    DrainStats stats;
    while (true) {
        if (to_watermark
            && broker.queue_len(queue) < static_cast<std::size_t>(cfg.low_watermark)) {
            break;
        }
        auto env = broker.dequeue(queue, std::chrono::milliseconds(10));
        if (!env) break;
        if (per_item_work) per_item_work();

        std::optional<LocationFix> fix;
        try {
            fix = fix_from_json(nlohmann::json::parse(env->payload));
        } catch (const nlohmann::json::exception&) {
            fix = std::nullopt;
        }
        if (!fix) {
            ++stats.malformed;
            continue;
        }

        window.push(fix->point());
        GeoPoint smoothed = window.mean();
        AnomalyVerdict verdict;
        verdict.user = user;
        verdict.at_ms = fix->timestamp_ms;
        verdict.smoothed = smoothed;
        verdict.deviation_m = haversine_m(fix->point(), smoothed);
        verdict.anomalous = detector.anomalous(*fix, smoothed);
        if (on_verdict) on_verdict(verdict);
        ++stats.processed;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// WorkerPool

WorkerPool::WorkerPool(FunctionConfig cfg, MetricsRegistry* metrics, std::string service)
    : cfg_(cfg), metrics_(metrics), service_(std::move(service)) {
    validate(cfg_);
}

WorkerPool::~WorkerPool() { stop(); }

void WorkerPool::start(bool manual_clock) {
    {
        std::lock_guard lk(mu_);
        for (int i = 0; i < cfg_.min_workers; ++i) spawn_locked();
    }
    if (metrics_) metrics_->set(service_ + ".workers", workers());
    if (!manual_clock) {
        clock_thread_ = std::thread([this] { clock_main(); });
    }
}

void WorkerPool::stop() {
    if (stopping_.exchange(true)) return;
    clock_cv_.notify_all();
    cv_.notify_all();
    if (clock_thread_.joinable()) clock_thread_.join();
    std::lock_guard lk(mu_);
    for (auto& w : slots_) {
        if (w) w->stop.store(true);
    }
    cv_.notify_all();
    for (auto& w : slots_) {
        if (w && w->thread.joinable()) w->thread.join();
    }
    slots_.clear();
    worker_count_.store(0);
}

void WorkerPool::submit(Task task) {
    {
        std::lock_guard lk(mu_);
        if (stopping_.load()) return;
        tasks_.push_back(std::move(task));
    }
    cv_.notify_one();
}

void WorkerPool::drain_pending() {
    while (!stopping_.load()) {
        {
            std::lock_guard lk(mu_);
            if (tasks_.empty() && busy_count_.load() == 0) return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
}

double WorkerPool::observed_rps() const {
    std::lock_guard lk(mu_);
    if (rps_window_.empty()) return 0.0;
    std::uint64_t total = 0;
    for (auto c : rps_window_) total += c;
    return static_cast<double>(total) / static_cast<double>(rps_window_.size());
}

std::size_t WorkerPool::backlog() const {
    std::lock_guard lk(mu_);
    return tasks_.size();
}

void WorkerPool::spawn_locked() {
    for (auto& slot : slots_) {
        if (slot && slot->exited.load()) {
            if (slot->thread.joinable()) slot->thread.join();
            int index = slot->index;
            slot = std::make_unique<Worker>();
            slot->index = index;
            Worker* raw = slot.get();
            slot->thread = std::thread([this, raw] { worker_main(raw); });
            worker_count_.fetch_add(1);
            return;
        }
    }
    auto w = std::make_unique<Worker>();
    w->index = static_cast<int>(slots_.size());
    Worker* raw = w.get();
    w->thread = std::thread([this, raw] { worker_main(raw); });
    slots_.push_back(std::move(w));
    worker_count_.fetch_add(1);
}

void WorkerPool::retire_one_locked() {
    // Prefer an idle warm worker; otherwise the newest live one finishes
    // its current task and exits.
    Worker* candidate = nullptr;
    for (auto it = slots_.rbegin(); it != slots_.rend(); ++it) {
        auto& w = *it;
        if (!w || w->exited.load() || w->stop.load()) continue;
        if (w->state.load() == WorkerState::Warm) {
            candidate = w.get();
            break;
        }
        if (!candidate) candidate = w.get();
    }
    if (candidate) {
        candidate->stop.store(true);
        worker_count_.fetch_sub(1);
        cv_.notify_all();
    }
}

void WorkerPool::worker_main(Worker* w) {
    w->state.store(WorkerState::Warming);
    auto warm_at = std::chrono::steady_clock::now() + cfg_.cold_start_delay;
    while (std::chrono::steady_clock::now() < warm_at) {
        if (w->stop.load() || stopping_.load()) {
            w->exited.store(true);
            return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    w->state.store(WorkerState::Warm);
    w->last_active = std::chrono::steady_clock::now();

    while (true) {
        Task task;
        {
            std::unique_lock lk(mu_);
            cv_.wait_for(lk, std::chrono::milliseconds(50), [&] {
                return !tasks_.empty() || w->stop.load() || stopping_.load();
            });
            if (w->stop.load() || stopping_.load()) break;
            if (tasks_.empty()) continue;
            task = std::move(tasks_.front());
            tasks_.pop_front();
        }
        w->state.store(WorkerState::Busy);
        busy_count_.fetch_add(1);
        auto begin = std::chrono::steady_clock::now();
        std::size_t items = 0;
        try {
            items = task();
        } catch (...) {
            // A failing invocation never kills the worker.
        }
        auto busy = std::chrono::steady_clock::now() - begin;
        w->busy_ns.fetch_add(
            std::chrono::duration_cast<std::chrono::nanoseconds>(busy).count(),
            std::memory_order_relaxed);
        items_total_.fetch_add(items, std::memory_order_relaxed);
        busy_count_.fetch_sub(1);
        w->last_active = std::chrono::steady_clock::now();
        w->state.store(WorkerState::Warm);
    }
    w->exited.store(true);
}

void WorkerPool::clock_main() {
    std::unique_lock lk(clock_mu_);
    while (!stopping_.load()) {
        if (clock_cv_.wait_for(lk, std::chrono::seconds(1),
                               [this] { return stopping_.load(); })) {
            break;
        }
        tick_one_second();
    }
}

void WorkerPool::tick_one_second() {
    std::lock_guard lk(mu_);
    if (stopping_.load()) return;

    std::uint64_t total = items_total_.load(std::memory_order_relaxed);
    rps_window_.push_back(total - items_sampled_);
    items_sampled_ = total;
    const auto window_len =
        static_cast<std::size_t>(cfg_.evaluate_interval / std::chrono::seconds(1));
    while (rps_window_.size() > std::max<std::size_t>(window_len, 1)) {
        rps_window_.pop_front();
    }

    for (auto& w : slots_) {
        if (!w) continue;
        std::int64_t busy = w->busy_ns.load(std::memory_order_relaxed);
        std::int64_t delta = busy - w->sampled_busy_ns;
        w->sampled_busy_ns = busy;
        if (metrics_) {
            bool live = !w->exited.load() && !w->stop.load();
            double util = std::clamp(static_cast<double>(delta) / 1e9, 0.0, 1.0);
            metrics_->set(service_ + "." + std::to_string(w->index) + ".util",
                          live ? util : 0.0);
        }
    }

    if (++ticks_since_evaluate_ >= static_cast<int>(std::max<std::size_t>(window_len, 1))) {
        ticks_since_evaluate_ = 0;
        evaluate_locked();
    }
    if (metrics_) metrics_->set(service_ + ".workers", worker_count_.load());
}

void WorkerPool::evaluate_locked() {
    std::uint64_t total = 0;
    for (auto c : rps_window_) total += c;
    double rps = rps_window_.empty()
                     ? 0.0
                     : static_cast<double>(total) / static_cast<double>(rps_window_.size());

    int current = worker_count_.load();
    int target = static_cast<int>(std::ceil(rps / cfg_.max_rps_per_worker));
    target = std::clamp(target, cfg_.min_workers, cfg_.max_workers);
    if (target > current) {
        spawn_locked();
    } else if (target < current) {
        retire_one_locked();
    }

    // Idle retirement, never below min_workers.
    auto now = std::chrono::steady_clock::now();
    for (auto& w : slots_) {
        if (worker_count_.load() <= cfg_.min_workers) break;
        if (!w || w->exited.load() || w->stop.load()) continue;
        if (w->state.load() == WorkerState::Warm
            && now - w->last_active > cfg_.warm_idle_timeout) {
            w->stop.store(true);
            worker_count_.fetch_sub(1);
        }
    }
    cv_.notify_all();
}

// ---------------------------------------------------------------------------
// FunctionRuntime

FunctionRuntime::FunctionRuntime(broker::Broker& broker, FunctionConfig cfg,
                                 WorkerPool& pool, MetricsRegistry* metrics,
                                 std::shared_ptr<AnomalyDetector> detector)
    : broker_(broker), cfg_(cfg), pool_(pool), metrics_(metrics),
      detector_(detector ? std::move(detector)
                         : std::make_shared<DeviationRule>(cfg.deviation_threshold_m)) {
    validate(cfg_);
}

FunctionRuntime::~FunctionRuntime() { stop(); }

void FunctionRuntime::set_verdict_hook(std::function<void(const AnomalyVerdict&)> hook) {
    std::lock_guard lk(hook_mu_);
    verdict_hook_ = std::move(hook);
}

void FunctionRuntime::start() {
    if (started_.exchange(true)) return;
    stop_.store(false);
    watcher_ = std::thread([this] { watch_main(); });
}

void FunctionRuntime::stop() {
    stop_.store(true);
    if (watcher_.joinable()) watcher_.join();
    started_.store(false);
}

bool FunctionRuntime::try_acquire_lease(const UserId& user) {
    const std::string key = "faas:lease:" + user;
    if (auto v = broker_.kv_get(key); v && !v->empty()) return false;
    broker_.kv_set(key, "1", cfg_.lease_ttl);
    return true;
}

void FunctionRuntime::release_lease(const UserId& user) {
    broker_.kv_set("faas:lease:" + user, "", std::chrono::milliseconds(1));
}

SlidingWindow& FunctionRuntime::window_for(const UserId& user) {
    std::lock_guard lk(windows_mu_);
    auto& slot = windows_[user];
    if (!slot) slot = std::make_unique<SlidingWindow>(cfg_.window_size);
    return *slot;
}

std::size_t FunctionRuntime::drain_user(const UserId& user, bool to_watermark) {
    auto on_verdict = [this](const AnomalyVerdict& v) {
        if (v.anomalous) {
            broker_.publish(kAnomalyTopic,
                            broker::Envelope::make(to_json(v).dump()));
            if (metrics_) metrics_->inc("faas.anomalies");
        }
        std::function<void(const AnomalyVerdict&)> hook;
        {
            std::lock_guard lk(hook_mu_);
            hook = verdict_hook_;
        }
        if (hook) hook(v);
    };
    auto per_item = [this] {
        if (cfg_.item_service_time.count() > 0) {
            std::this_thread::sleep_for(cfg_.item_service_time);
        }
    };
    DrainStats stats =
        process_user_queue(broker_, user, cfg_, window_for(user), *detector_,
                           to_watermark, on_verdict, per_item);
    malformed_.fetch_add(stats.malformed, std::memory_order_relaxed);
    if (metrics_) metrics_->inc("faas.processed", static_cast<double>(stats.processed));
    return stats.processed;
}

void FunctionRuntime::watch_main() {
    while (!stop_.load()) {
        for (const auto& queue : broker_.list_queues(kQueuePrefix)) {
            if (stop_.load()) break;
            if (broker_.queue_len(queue) < static_cast<std::size_t>(cfg_.trigger_threshold)) {
                continue;
            }
            UserId user = queue.substr(std::string(kQueuePrefix).size());
            if (!try_acquire_lease(user)) continue;
            invocations_.fetch_add(1, std::memory_order_relaxed);
            pool_.submit([this, user] {
                std::size_t n = drain_user(user, /*to_watermark=*/true);
                release_lease(user);
                return n;
            });
        }
        std::this_thread::sleep_for(cfg_.watch_poll_interval);
    }
}

void FunctionRuntime::drain_all() {
    stop();
    pool_.drain_pending();
    // Remaining backlog is processed inline; per-user order still holds
    // because in-flight invocations finished above and leases gate reentry.
    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (const auto& queue : broker_.list_queues(kQueuePrefix)) {
            if (broker_.queue_len(queue) == 0) continue;
            UserId user = queue.substr(std::string(kQueuePrefix).size());
            while (!try_acquire_lease(user)) {
                std::this_thread::sleep_for(std::chrono::milliseconds(2));
            }
            drain_user(user, /*to_watermark=*/false);
            release_lease(user);
            progressed = true;
        }
    }
}

}  // namespace wayguard::faas
