#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wayguard/broker/envelope.hpp"

namespace wayguard::broker {

enum class Status {
    Ok,
    PayloadTooLarge,
    ShutDown,
    Error,
};

/// Live stream of envelopes from one topic subscription. Messages
/// published while the subscription exists are delivered exactly once,
/// in publish order; destroying the handle unsubscribes.
class Subscription {
public:
    virtual ~Subscription() = default;

    /// Next envelope, or std::nullopt if none arrived within `wait`.
    virtual std::optional<Envelope> next(std::chrono::milliseconds wait) = 0;
};

struct BrokerLimits {
    std::size_t max_payload_bytes = 64 * 1024;
    std::size_t subscriber_buffer = 1024;  // per-subscriber; overflow drops oldest
};

/// Message fabric: named FIFO queues, pub/sub topics and a key-value
/// store with expiry. Queue and topic namespaces are disjoint. All
/// operations are safe to call from any number of concurrent activities.
class Broker {
public:
    virtual ~Broker() = default;

    virtual Status enqueue(const std::string& queue, Envelope e) = 0;

    /// Removes and returns the queue head, waiting up to `wait` for one to
    /// arrive. Each envelope is delivered to exactly one consumer.
    virtual std::optional<Envelope> dequeue(const std::string& queue,
                                            std::chrono::milliseconds wait) = 0;

    virtual std::size_t queue_len(const std::string& queue) = 0;

    virtual Status publish(const std::string& topic, Envelope e) = 0;
    virtual std::unique_ptr<Subscription> subscribe(const std::string& topic) = 0;

    /// ttl must be positive; the entry becomes unreadable once it elapses.
    /// Last write wins.
    virtual void kv_set(const std::string& key, std::string value,
                        std::chrono::milliseconds ttl) = 0;
    virtual std::optional<std::string> kv_get(const std::string& key) = 0;

    /// Names of queues whose name starts with `prefix`, in no particular
    /// order. Lets queue watchers discover per-user queues.
    virtual std::vector<std::string> list_queues(const std::string& prefix) = 0;
};

}  // namespace wayguard::broker
