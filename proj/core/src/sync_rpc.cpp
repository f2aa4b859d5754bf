#include "wayguard/broker/sync_rpc.hpp"

namespace wayguard::broker {

namespace {
// Result values carry a one-byte status tag so handler failures travel
// in-band through the KV store.
constexpr char kOkTag = '+';
constexpr char kErrTag = '-';
}  // namespace

SyncResult sync_call(Broker& broker, const std::string& queue, std::string payload,
                     std::string default_payload, const SyncCallOptions& opts) {
    Envelope request = Envelope::make(std::move(payload));
    const std::string key = request.uuid.to_string();
    if (broker.enqueue(queue, std::move(request)) != Status::Ok) {
        return SyncResult{std::move(default_payload), false};
    }
    for (int attempt = 0; attempt < opts.retries; ++attempt) {
        auto pause = opts.backoff;
        if (opts.deadline) {
            auto now = std::chrono::steady_clock::now();
            if (now >= *opts.deadline) break;
            pause = std::min(pause, std::chrono::duration_cast<std::chrono::milliseconds>(
                                        *opts.deadline - now));
        }
        std::this_thread::sleep_for(pause);
        if (auto value = broker.kv_get(key)) {
            if (!value->empty() && (*value)[0] == kOkTag) {
                return SyncResult{value->substr(1), true};
            }
            return SyncResult{std::move(default_payload), false};
        }
    }
    return SyncResult{std::move(default_payload), false};
}

void answer_sync_request(Broker& broker, const Envelope& request,
                         const std::function<std::string(const std::string&)>& handler,
                         std::chrono::milliseconds result_ttl) {
    std::string value;
    try {
        value.push_back(kOkTag);
        value += handler(request.payload);
    } catch (const std::exception& e) {
        value.assign(1, kErrTag);
        value += e.what();
    } catch (...) {
        value.assign(1, kErrTag);
    }
    broker.kv_set(request.uuid.to_string(), std::move(value), result_ttl);
}

SyncServer::SyncServer(Broker& broker, std::string queue,
                       std::function<std::string(const std::string&)> handler,
                       SyncServerOptions opts)
    : broker_(broker), queue_(std::move(queue)), handler_(std::move(handler)), opts_(opts) {
    threads_.reserve(static_cast<std::size_t>(opts_.responders));
    for (int i = 0; i < opts_.responders; ++i) {
        threads_.emplace_back([this] { run(); });
    }
}

SyncServer::~SyncServer() { stop(); }

void SyncServer::stop() {
    stop_.store(true);
    for (auto& t : threads_) {
        if (t.joinable()) t.join();
    }
    threads_.clear();
}

void SyncServer::run() {
    while (!stop_.load()) {
        auto env = broker_.dequeue(queue_, opts_.idle_wait);
        if (!env) continue;
        answer_sync_request(broker_, *env, handler_, opts_.result_ttl);
        handled_.fetch_add(1, std::memory_order_relaxed);
    }
}

}  // namespace wayguard::broker
