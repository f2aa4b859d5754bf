#pragma once

#include <deque>
#include <future>

#include "wayguard/scaler/replica.hpp"

namespace wayguard::scaler {

/// A service's modeled processing capacity: a FIFO work queue drained by
/// replica workers, each of which occupies itself for
/// work_units / capacity seconds per job. Callers block until their job
/// completes, so queueing delay under load shows up as real latency while
/// the declared work feeds the utilization signal that drives scaling.
class ModeledStage {
public:
    ModeledStage(std::string service, ScalePolicy policy,
                 double capacity_units_per_second, MetricsRegistry* metrics);
    ~ModeledStage();

    void start(bool manual_tick = false);
    void stop();

    /// Blocks for queue wait plus modeled service time. Returns false when
    /// the stage is shutting down.
    bool run(double work_units);

    int replicas() const { return pool_ ? pool_->replicas() : 0; }
    std::size_t backlog() const;
    ReplicaPool& pool() { return *pool_; }

private:
    struct Job {
        double work_units;
        std::promise<bool> done;
    };

    void worker_loop(ReplicaPool::Context& ctx);

    std::string service_;
    double capacity_;
    MetricsRegistry* metrics_;

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::shared_ptr<Job>> queue_;
    bool stopping_ = false;

    std::unique_ptr<ReplicaPool> pool_;
};

}  // namespace wayguard::scaler
