#pragma once

#include <chrono>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "wayguard/metrics.hpp"
#include "wayguard/net.hpp"
#include "wayguard/types.hpp"

namespace wayguard::gateway {

enum class PushOutcome { Delivered, Buffered, Undeliverable };

struct NotifyConfig {
    std::size_t buffer_limit = 100;
    std::chrono::milliseconds buffer_ttl{60000};
};

/// Per-user persistent notification channels (WebSocket sockets). At most
/// one channel per user; messages are delivered in push order. Pushes to
/// a disconnected user are buffered up to buffer_limit messages for
/// buffer_ttl and flushed in order on reconnect; anything beyond that is
/// undeliverable and counted.
class ChannelRegistry {
public:
    explicit ChannelRegistry(NotifyConfig cfg, MetricsRegistry* metrics);
    ~ChannelRegistry();

    /// Adopts the upgraded socket as `user`'s channel, replacing any
    /// previous one, and flushes buffered messages. Spawns a reader thread
    /// that answers pings and detects disconnect.
    void attach(const UserId& user, net::Socket sock);

    PushOutcome push(const UserId& user, const std::string& message);

    bool connected(const UserId& user) const;
    std::size_t open_channels() const;
    void close_all();

private:
    struct BufferedMessage {
        std::string payload;
        std::chrono::steady_clock::time_point at;
    };

    struct Entry {
        std::mutex mu;
        std::shared_ptr<net::Socket> sock;  // null when disconnected
        std::deque<BufferedMessage> buffer;
        std::uint64_t generation = 0;
    };

    std::shared_ptr<Entry> entry_for(const UserId& user);
    void expire_locked(Entry& e);
    void reader_main(const UserId& user, std::shared_ptr<net::Socket> sock,
                     std::uint64_t generation);

    NotifyConfig cfg_;
    MetricsRegistry* metrics_;

    mutable std::mutex mu_;
    std::unordered_map<UserId, std::shared_ptr<Entry>> entries_;
    std::vector<std::thread> readers_;
    std::atomic<bool> closing_{false};
};

}  // namespace wayguard::gateway
