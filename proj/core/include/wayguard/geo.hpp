#pragma once

#include "wayguard/types.hpp"

namespace wayguard {

/// Mean Earth radius used for all great-circle math.
inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Great-circle distance in meters between two points on a sphere of
/// radius kEarthRadiusM. Symmetric, non-negative, zero for equal points.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

}  // namespace wayguard
