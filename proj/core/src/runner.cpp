#include "wayguard/loadgen/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <numbers>
#include <queue>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "wayguard/gateway/ws.hpp"
#include "wayguard/loadgen/percentile.hpp"
#include "wayguard/net.hpp"

namespace wayguard::loadgen {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::int64_t now_epoch_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct Bucket {
    std::uint64_t attempted = 0;
    std::uint64_t ok = 0;
    std::uint64_t failed = 0;
    std::vector<double> latencies_ms;  // resolved requests, timeouts included
};

}  // namespace

std::vector<ScheduleEvent> expand_schedule(const std::vector<ScenarioPhase>& phases) {
    std::vector<ScheduleEvent> events;
    double t0 = 0.0;
    for (const auto& phase : phases) {
        if (phase.kind == PhaseKind::Ramp && phase.end_users != phase.start_users) {
            int delta = std::abs(phase.end_users - phase.start_users);
            bool spawn = phase.end_users > phase.start_users;
            for (int k = 1; k <= delta; ++k) {
                events.push_back(
                    {t0 + phase.duration_s * static_cast<double>(k) / delta, spawn});
            }
        }
        t0 += phase.duration_s;
    }
    return events;
}

std::vector<double> tau_preview(std::uint64_t seed, std::uint32_t user_index,
                                std::size_t count, double tau_min_s, double tau_max_s) {
    std::mt19937_64 rng(splitmix64(seed ^ (0x1000000ULL + user_index)));
    std::uniform_real_distribution<double> tau(tau_min_s, tau_max_s);
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(tau(rng));
    return out;
}

namespace {

struct VirtualUser {
    std::uint32_t index = 0;
    std::string id;
    std::string token;
    std::mt19937_64 rng;
    std::unique_ptr<httplib::Client> client;
    net::Socket ws;
    bool ws_holder = false;
    std::atomic<bool> retired{false};
    std::atomic<bool> in_flight{false};
    double spawn_t = 0.0;
};

class Runner {
public:
    Runner(const std::vector<ScenarioPhase>& phases, const RunnerOptions& opt)
        : phases_(phases), opt_(opt) {}

    RunSummary run();

private:
    struct FireEvent {
        double t_s;
        std::uint32_t vu;
        bool operator>(const FireEvent& other) const { return t_s > other.t_s; }
    };

    double elapsed_s() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

    void probe_target();
    void spawn_user();
    void remove_oldest();
    void dispatch_fire(std::uint32_t vu_index);
    void io_main();
    void scrape_main();
    void execute_request(VirtualUser& vu);
    void login(VirtualUser& vu);
    nlohmann::json random_fix(VirtualUser& vu) const;
    void record_result(double fire_t, bool ok, double latency_ms);
    void push_fire(double t_s, std::uint32_t vu_index);
    RunSummary finalize();

    const std::vector<ScenarioPhase>& phases_;
    RunnerOptions opt_;
    std::chrono::steady_clock::time_point start_;

    std::vector<std::unique_ptr<VirtualUser>> users_;
    std::deque<std::uint32_t> alive_;  // spawn order; removals take the front
    std::mutex users_mu_;

    std::priority_queue<FireEvent, std::vector<FireEvent>, std::greater<>> fires_;
    std::mutex fires_mu_;
    std::condition_variable fires_cv_;

    std::deque<std::uint32_t> io_queue_;
    std::mutex io_mu_;
    std::condition_variable io_cv_;
    std::vector<std::thread> io_threads_;

    std::mutex buckets_mu_;
    std::map<int, Bucket> buckets_;

    std::map<int, std::map<std::string, double>> scrapes_;
    std::mutex scrapes_mu_;
    std::thread scrape_thread_;

    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> logins_{0};
    std::atomic<std::uint64_t> login_failures_{0};
    std::atomic<std::uint64_t> ws_messages_{0};
    std::atomic<int> active_count_{0};
};

void Runner::probe_target() {
    for (int attempt = 0; attempt < 5; ++attempt) {
        httplib::Client probe(opt_.host, opt_.port);
        probe.set_connection_timeout(2, 0);
        probe.set_read_timeout(2, 0);
        if (auto res = probe.Get("/metrics"); res && res->status == 200) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(250));
    }
    throw std::runtime_error("load target " + opt_.host + ":"
                             + std::to_string(opt_.port) + " is unreachable");
}

void Runner::push_fire(double t_s, std::uint32_t vu_index) {
    {
        std::lock_guard lk(fires_mu_);
        fires_.push({t_s, vu_index});
    }
    fires_cv_.notify_one();
}

void Runner::spawn_user() {
    std::uint32_t index;
    VirtualUser* vu;
    {
        std::lock_guard lk(users_mu_);
        index = static_cast<std::uint32_t>(users_.size());
        auto owned = std::make_unique<VirtualUser>();
        vu = owned.get();
        vu->index = index;
        vu->id = opt_.user_prefix + std::to_string(index);
        vu->rng.seed(splitmix64(opt_.seed ^ (0x1000000ULL + index)));
        vu->spawn_t = elapsed_s();
        vu->ws_holder = opt_.ws_holder_fraction > 0.0
                        && (index % std::max(1, static_cast<int>(std::llround(
                                                    1.0 / opt_.ws_holder_fraction))))
                               == 0;
        users_.push_back(std::move(owned));
        alive_.push_back(index);
    }
    active_count_.fetch_add(1);
    // Login happens on the IO pool; the first location fire follows one
    // think-time later.
    {
        std::lock_guard lk(io_mu_);
        io_queue_.push_back(index | 0x80000000u);  // high bit marks login-only
    }
    io_cv_.notify_one();
    std::uniform_real_distribution<double> tau(opt_.tau_min_s, opt_.tau_max_s);
    push_fire(vu->spawn_t + tau(vu->rng), index);
}

void Runner::remove_oldest() {
    std::lock_guard lk(users_mu_);
    while (!alive_.empty()) {
        std::uint32_t index = alive_.front();
        alive_.pop_front();
        auto& vu = users_[index];
        if (!vu->retired.exchange(true)) {
            active_count_.fetch_sub(1);
            return;
        }
    }
}

void Runner::dispatch_fire(std::uint32_t vu_index) {
    VirtualUser* vu;
    {
        std::lock_guard lk(users_mu_);
        vu = users_[vu_index].get();
    }
    if (vu->retired.load()) return;
    if (elapsed_s() - vu->spawn_t > opt_.lifetime_cap_s) {
        // Session cap reached; the user leaves instead of firing.
        if (!vu->retired.exchange(true)) {
            active_count_.fetch_sub(1);
            std::lock_guard lk(users_mu_);
            auto it = std::find(alive_.begin(), alive_.end(), vu_index);
            if (it != alive_.end()) alive_.erase(it);
        }
        return;
    }
    if (vu->in_flight.exchange(true)) return;  // closed loop: one at a time
    {
        std::lock_guard lk(io_mu_);
        io_queue_.push_back(vu_index);
    }
    io_cv_.notify_one();
}

void Runner::io_main() {
    while (true) {
        std::uint32_t item;
        {
            std::unique_lock lk(io_mu_);
            io_cv_.wait(lk, [this] { return !io_queue_.empty() || stop_.load(); });
            if (io_queue_.empty()) {
                if (stop_.load()) return;
                continue;
            }
            item = io_queue_.front();
            io_queue_.pop_front();
        }
        bool login_only = (item & 0x80000000u) != 0;
        std::uint32_t index = item & 0x7fffffffu;
        VirtualUser* vu;
        {
            std::lock_guard lk(users_mu_);
            vu = users_[index].get();
        }
        if (login_only) {
            login(*vu);
            continue;
        }
        execute_request(*vu);
        vu->in_flight.store(false);
        if (!vu->retired.load() && !stop_.load()) {
            std::uniform_real_distribution<double> tau(opt_.tau_min_s, opt_.tau_max_s);
            push_fire(elapsed_s() + tau(vu->rng), vu->index);
        }
    }
}

void Runner::login(VirtualUser& vu) {
    if (!vu.client) {
        vu.client = std::make_unique<httplib::Client>(opt_.host, opt_.port);
        vu.client->set_connection_timeout(2, 0);
        auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(
            opt_.request_timeout);
        vu.client->set_read_timeout(static_cast<time_t>(timeout_s.count()),
                                    (opt_.request_timeout - timeout_s).count() * 1000);
        vu.client->set_keep_alive(true);
    }
    nlohmann::json body{{"user_id", vu.id}, {"role", "dementia"}};
    auto res = vu.client->Post("/auth/login", body.dump(), "application/json");
    if (!res || res->status != 200) {
        login_failures_.fetch_add(1);
        return;
    }
    try {
        vu.token = nlohmann::json::parse(res->body).at("token").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        login_failures_.fetch_add(1);
        return;
    }
    logins_.fetch_add(1);
    if (vu.ws_holder) {
        vu.ws = ws::client_connect(opt_.host, opt_.port, "/ws?token=" + vu.token);
    }
}

nlohmann::json Runner::random_fix(VirtualUser& vu) const {
    // ~111.32 km per degree of latitude; longitude shrinks with latitude.
    const double half_lat = (opt_.box_km / 2.0) / 111.32;
    const double half_lon =
        (opt_.box_km / 2.0)
        / (111.32 * std::max(0.1, std::cos(opt_.center.latitude * std::numbers::pi / 180.0)));
    std::uniform_real_distribution<double> dlat(-half_lat, half_lat);
    std::uniform_real_distribution<double> dlon(-half_lon, half_lon);
    std::uniform_real_distribution<double> alt(0.0, 120.0);
    std::uniform_real_distribution<double> acc(1.0, 20.0);
    std::uniform_real_distribution<double> speed(0.0, 3.0);
    std::uniform_real_distribution<double> accel(-2.0, 2.0);
    return nlohmann::json{
        {"user_id", vu.id},
        {"timestamp", now_epoch_ms()},
        {"longitude", opt_.center.longitude + dlon(vu.rng)},
        {"latitude", opt_.center.latitude + dlat(vu.rng)},
        {"altitude", alt(vu.rng)},
        {"accuracy", acc(vu.rng)},
        {"speed", speed(vu.rng)},
        {"acceleration", accel(vu.rng)},
    };
}

void Runner::execute_request(VirtualUser& vu) {
    if (vu.token.empty()) {
        login(vu);
        if (vu.token.empty()) return;  // counted as login failure, not a fire
    }
    if (vu.ws.valid()) {
        // Opportunistic channel drain; holders only observe the stream.
        for (int i = 0; i < 64; ++i) {
            auto frame = ws::read_frame(vu.ws.fd(), std::chrono::milliseconds(1));
            if (frame.type == ws::FrameType::Text) {
                ws_messages_.fetch_add(1);
                continue;
            }
            if (frame.type == ws::FrameType::Ping) {
                ws::send_pong(vu.ws.fd(), frame.payload, true);
                continue;
            }
            if (frame.type == ws::FrameType::Close || frame.type == ws::FrameType::Error) {
                vu.ws.close();
            }
            break;
        }
    }

    double fire_t = elapsed_s();
    auto body = random_fix(vu).dump();
    httplib::Headers headers{{"Authorization", "Bearer " + vu.token}};
    auto t0 = std::chrono::steady_clock::now();
    auto res = vu.client->Post("/locations", headers, body, "application/json");
    double latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    // Failure rule: no response within the timeout, or a 5xx status.
    // Latency is recorded as observed either way so the slow tail weighs
    // into the percentiles.
    bool ok = res && res->status < 500
              && latency_ms <= static_cast<double>(opt_.request_timeout.count());
    record_result(fire_t, ok, latency_ms);
}

void Runner::record_result(double fire_t, bool ok, double latency_ms) {
    std::lock_guard lk(buckets_mu_);
    auto& bucket = buckets_[static_cast<int>(fire_t)];
    bucket.attempted += 1;
    if (ok) {
        bucket.ok += 1;
    } else {
        bucket.failed += 1;
    }
    bucket.latencies_ms.push_back(latency_ms);
}

void Runner::scrape_main() {
    httplib::Client client(opt_.host, opt_.port);
    client.set_connection_timeout(1, 0);
    client.set_read_timeout(1, 0);
    client.set_keep_alive(true);
    while (!stop_.load()) {
        int second = static_cast<int>(elapsed_s());
        auto res = client.Get("/metrics");
        if (res && res->status == 200) {
            std::map<std::string, double> snapshot;
            std::size_t pos = 0;
            const std::string& text = res->body;
            while (pos < text.size()) {
                std::size_t eol = text.find('\n', pos);
                if (eol == std::string::npos) eol = text.size();
                std::string line = text.substr(pos, eol - pos);
                pos = eol + 1;
                std::size_t sp = line.rfind(' ');
                if (sp == std::string::npos) continue;
                std::string name = line.substr(0, sp);
                if (name.size() > 5 && name.compare(name.size() - 5, 5, ".util") == 0) {
                    try {
                        snapshot[name] = std::stod(line.substr(sp + 1));
                    } catch (...) {
                    }
                }
            }
            std::lock_guard lk(scrapes_mu_);
            scrapes_[second] = std::move(snapshot);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1000));
    }
}

RunSummary Runner::run() {
    if (opt_.scrape_metrics) probe_target();
    start_ = std::chrono::steady_clock::now();

    auto schedule = expand_schedule(phases_);
    const double total_s = total_duration_s(phases_);

    int io_threads = std::max(1, opt_.io_threads);
    io_threads_.reserve(static_cast<std::size_t>(io_threads));
    for (int i = 0; i < io_threads; ++i) {
        io_threads_.emplace_back([this] { io_main(); });
    }
    if (opt_.scrape_metrics) {
        scrape_thread_ = std::thread([this] { scrape_main(); });
    }

    std::size_t next_event = 0;
    int next_tick = 0;
    std::vector<SampleRow> rows;
    while (true) {
        double now_s = elapsed_s();

        while (next_event < schedule.size() && schedule[next_event].t_s <= now_s) {
            if (schedule[next_event].spawn) {
                spawn_user();
            } else {
                remove_oldest();
            }
            ++next_event;
        }

        while (next_tick <= static_cast<int>(now_s) && next_tick <= static_cast<int>(total_s)) {
            SampleRow row;
            row.t = next_tick;
            row.active_users = active_count_.load();
            row.scheduled_users = scheduled_users(phases_, static_cast<double>(next_tick));
            rows.push_back(row);
            ++next_tick;
        }

        if (now_s >= total_s) break;

        // Dispatch due fires.
        while (true) {
            std::uint32_t due_vu;
            {
                std::lock_guard lk(fires_mu_);
                if (fires_.empty() || fires_.top().t_s > now_s) break;
                due_vu = fires_.top().vu;
                fires_.pop();
            }
            dispatch_fire(due_vu);
        }

        double next_deadline = total_s;
        if (next_event < schedule.size()) {
            next_deadline = std::min(next_deadline, schedule[next_event].t_s);
        }
        next_deadline = std::min(next_deadline, static_cast<double>(next_tick));
        {
            std::unique_lock lk(fires_mu_);
            if (!fires_.empty()) next_deadline = std::min(next_deadline, fires_.top().t_s);
            double wait_s = std::max(0.0, next_deadline - elapsed_s());
            fires_cv_.wait_for(lk, std::chrono::duration_cast<std::chrono::milliseconds>(
                                       std::chrono::duration<double>(
                                           std::min(wait_s, 0.05))));
        }
    }

    // Retire everybody and let in-flight requests resolve.
    {
        std::lock_guard lk(users_mu_);
        for (auto& vu : users_) vu->retired.store(true);
        alive_.clear();
    }
    auto drain_deadline =
        std::chrono::steady_clock::now() + opt_.request_timeout + std::chrono::seconds(2);
    while (std::chrono::steady_clock::now() < drain_deadline) {
        bool any_in_flight = false;
        {
            std::lock_guard lk(users_mu_);
            for (auto& vu : users_) {
                if (vu->in_flight.load()) {
                    any_in_flight = true;
                    break;
                }
            }
        }
        std::lock_guard lk(io_mu_);
        if (!any_in_flight && io_queue_.empty()) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }

    stop_.store(true);
    io_cv_.notify_all();
    fires_cv_.notify_all();
    for (auto& t : io_threads_) {
        if (t.joinable()) t.join();
    }
    if (scrape_thread_.joinable()) scrape_thread_.join();

    RunSummary summary = finalize();
    summary.rows = std::move(rows);

    // Attach bucket counts, latency percentiles and scraped utilization.
    {
        std::lock_guard lk(buckets_mu_);
        std::lock_guard slk(scrapes_mu_);
        std::map<std::string, double> last_scrape;
        for (auto& row : summary.rows) {
            auto bit = buckets_.find(row.t);
            if (bit != buckets_.end()) {
                row.attempted = bit->second.attempted;
                row.ok = bit->second.ok;
                row.failed = bit->second.failed;
                if (!bit->second.latencies_ms.empty()) {
                    row.latency_p50_ms = percentile(bit->second.latencies_ms, 0.5);
                    row.latency_p95_ms = percentile(bit->second.latencies_ms, 0.95);
                    summary.max_p95_ms = std::max(summary.max_p95_ms, row.latency_p95_ms);
                }
            }
            if (auto sit = scrapes_.find(row.t); sit != scrapes_.end()) {
                last_scrape = sit->second;
            }
            row.utilization = last_scrape;
            for (const auto& [name, _] : last_scrape) {
                if (std::find(summary.util_columns.begin(), summary.util_columns.end(),
                              name)
                    == summary.util_columns.end()) {
                    summary.util_columns.push_back(name);
                }
            }
        }
    }
    std::sort(summary.util_columns.begin(), summary.util_columns.end());
    summary.completed = true;

    if (!opt_.out_dir.empty()) {
        std::filesystem::create_directories(opt_.out_dir);
        write_csv(opt_.out_dir / "metrics.csv", summary);
        write_summary_json(opt_.out_dir / "summary.json", summary);
    }
    return summary;
}

RunSummary Runner::finalize() {
    RunSummary summary;
    summary.logins = logins_.load();
    summary.login_failures = login_failures_.load();
    summary.ws_messages = ws_messages_.load();

    std::lock_guard lk(buckets_mu_);
    // Per-phase aggregation by fire-time bucket.
    double t0 = 0.0;
    for (const auto& phase : phases_) {
        PhaseStats stats;
        stats.label = phase.label;
        stats.start_s = t0;
        stats.end_s = t0 + phase.duration_s;
        std::vector<double> latencies;
        for (auto& [t, bucket] : buckets_) {
            if (t < stats.start_s || t >= stats.end_s) continue;
            stats.attempted += bucket.attempted;
            stats.ok += bucket.ok;
            stats.failed += bucket.failed;
            latencies.insert(latencies.end(), bucket.latencies_ms.begin(),
                             bucket.latencies_ms.end());
        }
        if (!latencies.empty()) {
            stats.latency_p50_ms = percentile(latencies, 0.5);
            stats.latency_p95_ms = percentile(latencies, 0.95);
        }
        summary.phases.push_back(std::move(stats));
        t0 += phase.duration_s;
    }
    for (const auto& [t, bucket] : buckets_) {
        summary.attempted += bucket.attempted;
        summary.ok += bucket.ok;
        summary.failed += bucket.failed;
    }
    return summary;
}

}  // namespace

RunSummary run_scenario(const std::vector<ScenarioPhase>& phases,
                        const RunnerOptions& options) {
    net::raise_nofile_limit();
    Runner runner(phases, options);
    return runner.run();
}

void write_csv(const std::filesystem::path& path, const RunSummary& summary) {
    std::ofstream out(path);
    out << "t,active_users,attempted,ok,failed,latency_p50_ms,latency_p95_ms";
    for (const auto& col : summary.util_columns) out << ',' << col;
    out << '\n';
    for (const auto& row : summary.rows) {
        out << row.t << ',' << row.active_users << ',' << row.attempted << ',' << row.ok
            << ',' << row.failed << ',' << row.latency_p50_ms << ','
            << row.latency_p95_ms;
        for (const auto& col : summary.util_columns) {
            auto it = row.utilization.find(col);
            out << ',' << (it == row.utilization.end() ? 0.0 : it->second);
        }
        out << '\n';
    }
}

void write_summary_json(const std::filesystem::path& path, const RunSummary& summary) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : summary.phases) {
        phases.push_back({
            {"label", p.label},
            {"start_s", p.start_s},
            {"end_s", p.end_s},
            {"attempted", p.attempted},
            {"ok", p.ok},
            {"failed", p.failed},
            {"latency_p50_ms", p.latency_p50_ms},
            {"latency_p95_ms", p.latency_p95_ms},
        });
    }
    nlohmann::json doc{
        {"attempted", summary.attempted},
        {"ok", summary.ok},
        {"failed", summary.failed},
        {"logins", summary.logins},
        {"login_failures", summary.login_failures},
        {"ws_messages", summary.ws_messages},
        {"max_p95_ms", summary.max_p95_ms},
        {"phases", phases},
    };
    std::ofstream out(path);
    out << doc.dump(2) << '\n';
}

}  // namespace wayguard::loadgen
