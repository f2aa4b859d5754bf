#include "wayguard/validate.hpp"

#include <cmath>

namespace wayguard {

std::optional<std::string> validate_fix(const LocationFix& fix) {
    if (fix.user.empty()) return "user_id";
    if (fix.timestamp_ms <= 0) return "timestamp";
    // Range comparisons are written so NaN fails them too.
    if (!(fix.longitude >= -180.0 && fix.longitude <= 180.0)) return "longitude";
    if (!(fix.latitude >= -90.0 && fix.latitude <= 90.0)) return "latitude";
    if (!std::isfinite(fix.altitude)) return "altitude";
    if (!(fix.accuracy >= 0.0) || !std::isfinite(fix.accuracy)) return "accuracy";
    if (!(fix.speed >= 0.0) || !std::isfinite(fix.speed)) return "speed";
    if (!std::isfinite(fix.acceleration)) return "acceleration";
    return std::nullopt;
}

}  // namespace wayguard
