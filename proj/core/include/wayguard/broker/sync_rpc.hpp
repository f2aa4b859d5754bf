#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wayguard/broker/broker.hpp"

namespace wayguard::broker {

struct SyncCallOptions {
    int retries = 10;                             // kv polls after the enqueue
    std::chrono::milliseconds backoff{100};       // pause before each poll
    std::chrono::milliseconds result_ttl{30000};  // advisory; responder-side setting
    // Optional hard cutoff; the call degrades to the default once reached
    // even if retries remain.
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct SyncResult {
    std::string payload;
    bool ok = false;
};

/// Request/response over a named queue: enqueues the request under a fresh
/// UUID, then polls the KV store under that UUID until a responder has set
/// the result. On exhaustion (or deadline) returns (default_payload, error)
/// instead of raising — the caller always gets a response.
SyncResult sync_call(Broker& broker, const std::string& queue, std::string payload,
                     std::string default_payload, const SyncCallOptions& opts = {});

/// Responder-side helper: runs `handler` for one dequeued request envelope
/// and stores the (possibly error) result under the request UUID.
/// Handler exceptions become an error value surfaced to the caller as
/// (default, error); they never propagate.
void answer_sync_request(Broker& broker, const Envelope& request,
                         const std::function<std::string(const std::string&)>& handler,
                         std::chrono::milliseconds result_ttl);

struct SyncServerOptions {
    int responders = 1;
    std::chrono::milliseconds result_ttl{30000};
    std::chrono::milliseconds idle_wait{50};
};

/// Pool of responder loops serving one request queue: dequeue, run the
/// handler, store the result under the request UUID. Handler failures are
/// reported to the caller and never stop the loop.
class SyncServer {
public:
    SyncServer(Broker& broker, std::string queue,
               std::function<std::string(const std::string&)> handler,
               SyncServerOptions opts = {});
    ~SyncServer();

    SyncServer(const SyncServer&) = delete;
    SyncServer& operator=(const SyncServer&) = delete;

    void stop();
    std::uint64_t handled() const { return handled_.load(); }

private:
    void run();

    Broker& broker_;
    std::string queue_;
    std::function<std::string(const std::string&)> handler_;
    SyncServerOptions opts_;
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> handled_{0};
    std::vector<std::thread> threads_;
};

}  // namespace wayguard::broker
