#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>

namespace wayguard {

/// Process-wide named counters and gauges, rendered as plaintext
/// `name value` lines. Cheap enough for per-request use at this system's
/// rates; not intended as a high-frequency histogram store.
class MetricsRegistry {
public:
    void inc(const std::string& name, double delta = 1.0) {
        std::lock_guard lk(mu_);
        values_[name] += delta;
    }

    void set(const std::string& name, double value) {
        std::lock_guard lk(mu_);
        values_[name] = value;
    }

    double get(const std::string& name) const {
        std::lock_guard lk(mu_);
        auto it = values_.find(name);
        return it == values_.end() ? 0.0 : it->second;
    }

    /// Plaintext snapshot, one `name value` per line, sorted by name.
    std::string render() const;

    std::map<std::string, double> snapshot() const {
        std::lock_guard lk(mu_);
        return values_;
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, double> values_;
};

}  // namespace wayguard
