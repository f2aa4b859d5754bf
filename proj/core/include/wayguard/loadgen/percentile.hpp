#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace wayguard::loadgen {

/// Nearest-rank percentile: the value at rank ceil(q * n) (1-based) of the
/// ascending ordering. q is clamped to (0, 1]; an empty input throws.
double percentile(std::span<const double> values, double q);

/// Same computation for repeated queries over one sample set.
class PercentileEstimator {
public:
    void add(double v) {
        values_.push_back(v);
        sorted_ = false;
    }
    std::size_t count() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    double query(double q);
    void clear() {
        values_.clear();
        sorted_ = false;
    }

private:
    std::vector<double> values_;
    bool sorted_ = false;
};

}  // namespace wayguard::loadgen
