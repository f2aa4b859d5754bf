#include "wayguard/gateway/notify.hpp"

#include "wayguard/gateway/ws.hpp"

namespace wayguard::gateway {

ChannelRegistry::ChannelRegistry(NotifyConfig cfg, MetricsRegistry* metrics)
    : cfg_(cfg), metrics_(metrics) {}

ChannelRegistry::~ChannelRegistry() { close_all(); }

std::shared_ptr<ChannelRegistry::Entry> ChannelRegistry::entry_for(const UserId& user) {
    std::lock_guard lk(mu_);
    auto& slot = entries_[user];
    if (!slot) slot = std::make_shared<Entry>();
    return slot;
}

void ChannelRegistry::expire_locked(Entry& e) {
    auto cutoff = std::chrono::steady_clock::now() - cfg_.buffer_ttl;
    while (!e.buffer.empty() && e.buffer.front().at < cutoff) {
        e.buffer.pop_front();
        if (metrics_) metrics_->inc("gateway.notify_undeliverable");
    }
}

void ChannelRegistry::attach(const UserId& user, net::Socket sock) {
    auto entry = entry_for(user);
    std::shared_ptr<net::Socket> shared;
    std::uint64_t generation = 0;
    {
        std::lock_guard lk(entry->mu);
        if (entry->sock) {
            // One active channel per user: the newcomer wins.
            ws::send_close(entry->sock->fd(), false);
            entry->sock->close();
        }
        shared = std::make_shared<net::Socket>(std::move(sock));
        entry->sock = shared;
        generation = ++entry->generation;
        expire_locked(*entry);
        for (auto& msg : entry->buffer) {
            ws::send_text(shared->fd(), msg.payload, false);
        }
        entry->buffer.clear();
    }
    std::lock_guard lk(mu_);
    readers_.emplace_back(
        [this, user, shared, generation] { reader_main(user, shared, generation); });
}

void ChannelRegistry::reader_main(const UserId& user, std::shared_ptr<net::Socket> sock,
                                  std::uint64_t generation) {
    while (!closing_.load() && sock->valid()) {
        auto frame = ws::read_frame(sock->fd(), std::chrono::milliseconds(500));
        switch (frame.type) {
            case ws::FrameType::Timeout:
                continue;
            case ws::FrameType::Ping:
                ws::send_pong(sock->fd(), frame.payload, false);
                continue;
            case ws::FrameType::Text:
            case ws::FrameType::Binary:
            case ws::FrameType::Pong:
                continue;  // inbound app data is not part of this surface
            case ws::FrameType::Close:
            case ws::FrameType::Error:
            default: {
                auto entry = entry_for(user);
                std::lock_guard lk(entry->mu);
                if (entry->generation == generation && entry->sock == sock) {
                    entry->sock->close();
                    entry->sock = nullptr;
                }
                return;
            }
        }
    }
}

PushOutcome ChannelRegistry::push(const UserId& user, const std::string& message) {
    if (closing_.load()) {
        if (metrics_) metrics_->inc("gateway.notify_undeliverable");
        return PushOutcome::Undeliverable;
    }
    auto entry = entry_for(user);
    std::lock_guard lk(entry->mu);
    if (entry->sock && entry->sock->valid()) {
        if (ws::send_text(entry->sock->fd(), message, false)) {
            if (metrics_) metrics_->inc("gateway.notify_delivered");
            return PushOutcome::Delivered;
        }
        entry->sock->close();
        entry->sock = nullptr;
    }
    expire_locked(*entry);
    if (entry->buffer.size() >= cfg_.buffer_limit) {
        entry->buffer.pop_front();
        if (metrics_) metrics_->inc("gateway.notify_undeliverable");
    }
    entry->buffer.push_back({message, std::chrono::steady_clock::now()});
    if (metrics_) metrics_->inc("gateway.notify_buffered");
    return PushOutcome::Buffered;
}

bool ChannelRegistry::connected(const UserId& user) const {
    std::lock_guard lk(mu_);
    auto it = entries_.find(user);
    if (it == entries_.end()) return false;
    std::lock_guard elk(it->second->mu);
    return it->second->sock && it->second->sock->valid();
}

std::size_t ChannelRegistry::open_channels() const {
    std::lock_guard lk(mu_);
    std::size_t n = 0;
    for (const auto& [_, entry] : entries_) {
        std::lock_guard elk(entry->mu);
        if (entry->sock && entry->sock->valid()) ++n;
    }
    return n;
}

void ChannelRegistry::close_all() {
    if (closing_.exchange(true)) return;
    {
        std::lock_guard lk(mu_);
        for (auto& [_, entry] : entries_) {
            std::lock_guard elk(entry->mu);
            if (entry->sock) entry->sock->close();
        }
    }
    std::vector<std::thread> readers;
    {
        std::lock_guard lk(mu_);
        readers.swap(readers_);
    }
    for (auto& t : readers) {
        if (t.joinable()) t.join();
    }
}

}  // namespace wayguard::gateway
