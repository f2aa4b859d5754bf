#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include "wayguard/broker/broker.hpp"

namespace wayguard::broker {

/// Shared in-process message fabric for single-process deployments and
/// simulation runs. Fully concurrent-safe; a blocked dequeue on one queue
/// never delays operations on another.
class InProcBroker final : public Broker {
public:
    explicit InProcBroker(BrokerLimits limits = {});
    ~InProcBroker() override;

    Status enqueue(const std::string& queue, Envelope e) override;
    std::optional<Envelope> dequeue(const std::string& queue,
                                    std::chrono::milliseconds wait) override;
    std::size_t queue_len(const std::string& queue) override;

    Status publish(const std::string& topic, Envelope e) override;
    std::unique_ptr<Subscription> subscribe(const std::string& topic) override;

    void kv_set(const std::string& key, std::string value,
                std::chrono::milliseconds ttl) override;
    std::optional<std::string> kv_get(const std::string& key) override;

    std::vector<std::string> list_queues(const std::string& prefix) override;

    /// Unblocks all waiters; subsequent enqueues/publishes fail ShutDown.
    void shutdown();

    std::uint64_t dropped_pubsub_messages() const { return dropped_.load(); }

private:
    struct QueueState {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<Envelope> items;
    };

    struct SubscriberState {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<Envelope> buffer;
        bool open = true;
    };

    struct TopicState {
        std::mutex mu;
        std::vector<std::shared_ptr<SubscriberState>> subscribers;
    };

    struct KvEntry {
        std::string value;
        std::chrono::steady_clock::time_point expires_at;
    };

    class InProcSubscription;

    std::shared_ptr<QueueState> queue_state(const std::string& queue);
    std::shared_ptr<TopicState> topic_state(const std::string& topic);
    void sweep_kv_locked();

    BrokerLimits limits_;
    std::atomic<bool> down_{false};
    std::atomic<std::uint64_t> dropped_{0};

    std::shared_mutex queues_mu_;
    std::unordered_map<std::string, std::shared_ptr<QueueState>> queues_;

    std::shared_mutex topics_mu_;
    std::unordered_map<std::string, std::shared_ptr<TopicState>> topics_;

    std::mutex kv_mu_;
    std::unordered_map<std::string, KvEntry> kv_;
    std::size_t kv_sets_since_sweep_ = 0;
};

}  // namespace wayguard::broker
