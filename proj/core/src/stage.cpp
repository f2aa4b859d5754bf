#include "wayguard/scaler/stage.hpp"

namespace wayguard::scaler {

ModeledStage::ModeledStage(std::string service, ScalePolicy policy,
                           double capacity_units_per_second, MetricsRegistry* metrics)
    : service_(std::move(service)), capacity_(capacity_units_per_second), metrics_(metrics) {
    pool_ = std::make_unique<ReplicaPool>(
        service_, policy, [this](ReplicaPool::Context& ctx) { worker_loop(ctx); }, metrics_);
}

ModeledStage::~ModeledStage() { stop(); }

void ModeledStage::start(bool manual_tick) { pool_->start(manual_tick); }

void ModeledStage::stop() {
    {
        std::lock_guard lk(mu_);
        stopping_ = true;
        for (auto& job : queue_) job->done.set_value(false);
        queue_.clear();
    }
    cv_.notify_all();
    pool_->stop();
}

bool ModeledStage::run(double work_units) {
    auto job = std::make_shared<Job>();
    job->work_units = work_units;
    auto fut = job->done.get_future();
    {
        std::lock_guard lk(mu_);
        if (stopping_) return false;
        queue_.push_back(job);
    }
    cv_.notify_one();
    return fut.get();
}

std::size_t ModeledStage::backlog() const {
    std::lock_guard lk(const_cast<std::mutex&>(mu_));
    return queue_.size();
}

void ModeledStage::worker_loop(ReplicaPool::Context& ctx) {
    while (!ctx.stopping()) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lk(mu_);
            cv_.wait_for(lk, std::chrono::milliseconds(50),
                         [this] { return !queue_.empty() || stopping_; });
            if (stopping_) return;
            if (queue_.empty()) continue;
            job = std::move(queue_.front());
            queue_.pop_front();
        }
        auto busy = std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::duration<double>(job->work_units / capacity_));
        std::this_thread::sleep_for(busy);
        ctx.record_busy(busy);
        ctx.count_items(1);
        job->done.set_value(true);
    }
}

}  // namespace wayguard::scaler
