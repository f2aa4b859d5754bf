#include "wayguard/broker/inproc.hpp"

#include <algorithm>

namespace wayguard::broker {

class InProcBroker::InProcSubscription final : public Subscription {
public:
    InProcSubscription(std::shared_ptr<TopicState> topic,
                       std::shared_ptr<SubscriberState> self)
        : topic_(std::move(topic)), self_(std::move(self)) {}

    ~InProcSubscription() override {
        {
            std::lock_guard lk(self_->mu);
            self_->open = false;
        }
        std::lock_guard lk(topic_->mu);
        auto& subs = topic_->subscribers;
        subs.erase(std::remove(subs.begin(), subs.end(), self_), subs.end());
    }

    std::optional<Envelope> next(std::chrono::milliseconds wait) override {
        std::unique_lock lk(self_->mu);
        if (!self_->cv.wait_for(lk, wait, [&] { return !self_->buffer.empty() || !self_->open; })) {
            return std::nullopt;
        }
        if (self_->buffer.empty()) return std::nullopt;
        Envelope e = std::move(self_->buffer.front());
        self_->buffer.pop_front();
        return e;
    }

private:
    std::shared_ptr<TopicState> topic_;
    std::shared_ptr<SubscriberState> self_;
};

InProcBroker::InProcBroker(BrokerLimits limits) : limits_(limits) {}

InProcBroker::~InProcBroker() { shutdown(); }

std::shared_ptr<InProcBroker::QueueState> InProcBroker::queue_state(const std::string& queue) {
    {
        std::shared_lock lk(queues_mu_);
        auto it = queues_.find(queue);
        if (it != queues_.end()) return it->second;
    }
    std::unique_lock lk(queues_mu_);
    auto& slot = queues_[queue];
    if (!slot) slot = std::make_shared<QueueState>();
    return slot;
}

std::shared_ptr<InProcBroker::TopicState> InProcBroker::topic_state(const std::string& topic) {
    {
        std::shared_lock lk(topics_mu_);
        auto it = topics_.find(topic);
        if (it != topics_.end()) return it->second;
    }
    std::unique_lock lk(topics_mu_);
    auto& slot = topics_[topic];
    if (!slot) slot = std::make_shared<TopicState>();
    return slot;
}

Status InProcBroker::enqueue(const std::string& queue, Envelope e) {
    if (down_.load(std::memory_order_relaxed)) return Status::ShutDown;
    if (e.payload.size() > limits_.max_payload_bytes) return Status::PayloadTooLarge;
    auto q = queue_state(queue);
    {
        std::lock_guard lk(q->mu);
        q->items.push_back(std::move(e));
    }
    q->cv.notify_one();
    return Status::Ok;
}

std::optional<Envelope> InProcBroker::dequeue(const std::string& queue,
                                              std::chrono::milliseconds wait) {
    auto q = queue_state(queue);
    std::unique_lock lk(q->mu);
    if (!q->cv.wait_for(lk, wait, [&] {
            return !q->items.empty() || down_.load(std::memory_order_relaxed);
        })) {
        return std::nullopt;
    }
    if (q->items.empty()) return std::nullopt;
    Envelope e = std::move(q->items.front());
    q->items.pop_front();
    return e;
}

std::size_t InProcBroker::queue_len(const std::string& queue) {
    auto q = queue_state(queue);
    std::lock_guard lk(q->mu);
    return q->items.size();
}

Status InProcBroker::publish(const std::string& topic, Envelope e) {
    if (down_.load(std::memory_order_relaxed)) return Status::ShutDown;
    if (e.payload.size() > limits_.max_payload_bytes) return Status::PayloadTooLarge;
    auto t = topic_state(topic);
    std::vector<std::shared_ptr<SubscriberState>> subs;
    {
        std::lock_guard lk(t->mu);
        subs = t->subscribers;
    }
    for (auto& sub : subs) {
        {
            std::lock_guard lk(sub->mu);
            if (!sub->open) continue;
            if (sub->buffer.size() >= limits_.subscriber_buffer) {
                sub->buffer.pop_front();
                dropped_.fetch_add(1, std::memory_order_relaxed);
            }
            sub->buffer.push_back(e);
        }
        sub->cv.notify_one();
    }
    return Status::Ok;
}

std::unique_ptr<Subscription> InProcBroker::subscribe(const std::string& topic) {
    auto t = topic_state(topic);
    auto sub = std::make_shared<SubscriberState>();
    {
        std::lock_guard lk(t->mu);
        t->subscribers.push_back(sub);
    }
    return std::make_unique<InProcSubscription>(std::move(t), std::move(sub));
}

void InProcBroker::kv_set(const std::string& key, std::string value,
                          std::chrono::milliseconds ttl) {
    auto expires = std::chrono::steady_clock::now() + ttl;
    std::lock_guard lk(kv_mu_);
    kv_[key] = KvEntry{std::move(value), expires};
    if (++kv_sets_since_sweep_ >= 4096) {
        sweep_kv_locked();
        kv_sets_since_sweep_ = 0;
    }
}

void InProcBroker::sweep_kv_locked() {
    auto now = std::chrono::steady_clock::now();
    for (auto it = kv_.begin(); it != kv_.end();) {
        if (it->second.expires_at <= now) {
            it = kv_.erase(it);
        } else {
            ++it;
        }
    }
}

std::optional<std::string> InProcBroker::kv_get(const std::string& key) {
    std::lock_guard lk(kv_mu_);
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    if (it->second.expires_at <= std::chrono::steady_clock::now()) {
        kv_.erase(it);
        return std::nullopt;
    }
    return it->second.value;
}

std::vector<std::string> InProcBroker::list_queues(const std::string& prefix) {
    std::vector<std::string> out;
    std::shared_lock lk(queues_mu_);
    for (const auto& [name, _] : queues_) {
        if (name.rfind(prefix, 0) == 0) out.push_back(name);
    }
    return out;
}

void InProcBroker::shutdown() {
    if (down_.exchange(true)) return;
    {
        std::shared_lock lk(queues_mu_);
        for (auto& [_, q] : queues_) q->cv.notify_all();
    }
    std::shared_lock lk(topics_mu_);
    for (auto& [_, t] : topics_) {
        std::lock_guard tlk(t->mu);
        for (auto& sub : t->subscribers) {
            std::lock_guard slk(sub->mu);
            sub->open = false;
            sub->cv.notify_all();
        }
    }
}

}  // namespace wayguard::broker
