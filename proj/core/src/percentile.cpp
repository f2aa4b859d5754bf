#include "wayguard/loadgen/percentile.hpp"

#include <algorithm>
#include <cmath>

namespace wayguard::loadgen {

double percentile(std::span<const double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(std::clamp(q, 0.0, 1.0) * n));
    if (rank == 0) rank = 1;
    return sorted[rank - 1];
}

double PercentileEstimator::query(double q) {
    if (!sorted_) {
        std::sort(values_.begin(), values_.end());
        sorted_ = true;
    }
    if (values_.empty()) throw std::invalid_argument("percentile of empty sample");
    auto n = static_cast<double>(values_.size());
    auto rank = static_cast<std::size_t>(std::ceil(std::clamp(q, 0.0, 1.0) * n));
    if (rank == 0) rank = 1;
    return values_[rank - 1];
}

}  // namespace wayguard::loadgen
