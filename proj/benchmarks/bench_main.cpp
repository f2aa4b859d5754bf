#include <benchmark/benchmark.h>

#include <random>

#include "wayguard/broker/inproc.hpp"
#include "wayguard/broker/sync_rpc.hpp"
#include "wayguard/faas/faas.hpp"
#include "wayguard/gateway/auth.hpp"
#include "wayguard/geo.hpp"
#include "wayguard/loadgen/percentile.hpp"
#include "wayguard/validate.hpp"

using namespace wayguard;

namespace {

LocationFix bench_fix() {
    LocationFix fix;
    fix.user = "bench-user";
    fix.timestamp_ms = 1'700'000'000'000;
    fix.longitude = 10.3852;
    fix.latitude = 55.3997;
    fix.accuracy = 5.0;
    fix.speed = 1.4;
    return fix;
}

}  // namespace

static void BM_Haversine(benchmark::State& state) {
    GeoPoint a{10.3852, 55.3997};
    GeoPoint b{12.5683, 55.6761};
    for (auto _ : state) {
        benchmark::DoNotOptimize(haversine_m(a, b));
    }
}
BENCHMARK(BM_Haversine);

static void BM_ValidateFix(benchmark::State& state) {
    auto fix = bench_fix();
    for (auto _ : state) {
        benchmark::DoNotOptimize(validate_fix(fix));
    }
}
BENCHMARK(BM_ValidateFix);

static void BM_FixJsonRoundTrip(benchmark::State& state) {
    auto fix = bench_fix();
    for (auto _ : state) {
        auto body = to_json(fix).dump();
        auto parsed = fix_from_json(nlohmann::json::parse(body));
        benchmark::DoNotOptimize(parsed);
    }
}
BENCHMARK(BM_FixJsonRoundTrip);

static void BM_MovingAverageStream(benchmark::State& state) {
    const int w = static_cast<int>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<GeoPoint> series;
    for (int i = 0; i < 1024; ++i) series.push_back({10.0 + d(rng), 55.0 + d(rng)});
    for (auto _ : state) {
        faas::SlidingWindow window(w);
        for (const auto& p : series) {
            window.push(p);
            benchmark::DoNotOptimize(window.mean());
        }
    }
    state.SetItemsProcessed(state.iterations() * series.size());
}
BENCHMARK(BM_MovingAverageStream)->Arg(5)->Arg(10);

static void BM_QueueEnqueueDequeue(benchmark::State& state) {
    broker::InProcBroker broker;
    for (auto _ : state) {
        broker.enqueue("bench", broker::Envelope::make("payload"));
        benchmark::DoNotOptimize(broker.dequeue("bench", std::chrono::milliseconds(0)));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_QueueEnqueueDequeue);

static void BM_KvSetGet(benchmark::State& state) {
    broker::InProcBroker broker;
    for (auto _ : state) {
        broker.kv_set("key", "value", std::chrono::seconds(5));
        benchmark::DoNotOptimize(broker.kv_get("key"));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_KvSetGet);

static void BM_SyncCallRoundtrip(benchmark::State& state) {
    broker::InProcBroker broker;
    broker::SyncServer server(broker, "svc",
                              [](const std::string& in) { return in; },
                              broker::SyncServerOptions{
                                  .responders = 1,
                                  .idle_wait = std::chrono::milliseconds(1)});
    broker::SyncCallOptions opts;
    opts.retries = 2000;
    opts.backoff = std::chrono::milliseconds(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(broker::sync_call(broker, "svc", "ping", "", opts));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SyncCallRoundtrip);

static void BM_TokenIssueVerify(benchmark::State& state) {
    gateway::TokenClaims claims;
    claims.subject = "bench-user";
    claims.role = Role::Volunteer;
    claims.issued_at = 1;
    claims.expires_at = 1'000'000'000;
    for (auto _ : state) {
        auto token = gateway::issue_token(claims, "secret");
        benchmark::DoNotOptimize(gateway::verify_token(token, "secret", 2));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TokenIssueVerify);

static void BM_Percentile(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(0.0, 1000.0);
    std::vector<double> values;
    for (int i = 0; i < 10'000; ++i) values.push_back(d(rng));
    for (auto _ : state) {
        benchmark::DoNotOptimize(loadgen::percentile(values, 0.95));
    }
}
BENCHMARK(BM_Percentile);

BENCHMARK_MAIN();
