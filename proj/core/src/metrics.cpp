#include "wayguard/metrics.hpp"

#include <cmath>
#include <sstream>

namespace wayguard {

std::string MetricsRegistry::render() const {
    std::map<std::string, double> copy = snapshot();
    std::ostringstream out;
    for (const auto& [name, value] : copy) {
        if (value == std::floor(value) && std::abs(value) < 1e15) {
            out << name << ' ' << static_cast<long long>(value) << '\n';
        } else {
            out << name << ' ' << value << '\n';
        }
    }
    return out.str();
}

}  // namespace wayguard
