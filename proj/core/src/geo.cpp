#include "wayguard/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wayguard {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = a.latitude * kDegToRad;
    const double lat2 = b.latitude * kDegToRad;
    const double dlat = (b.latitude - a.latitude) * kDegToRad;
    const double dlon = (b.longitude - a.longitude) * kDegToRad;

    const double sin_dlat = std::sin(dlat / 2.0);
    const double sin_dlon = std::sin(dlon / 2.0);
    const double h =
        sin_dlat * sin_dlat + std::cos(lat1) * std::cos(lat2) * sin_dlon * sin_dlon;
    // Clamp guards rounding for antipodal points.
    const double c = 2.0 * std::asin(std::min(1.0, std::sqrt(h)));
    return kEarthRadiusM * c;
}

}  // namespace wayguard
