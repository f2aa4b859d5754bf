#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace wayguard {

/// Opaque unique identifier of a registered user.
using UserId = std::string;

enum class Role {
    Dementia,
    Relative,
    Volunteer,
};

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view s);

struct GeoPoint {
    double longitude = 0.0;  // degrees, [-180, 180]
    double latitude = 0.0;   // degrees, [-90, 90]

    bool operator==(const GeoPoint&) const = default;
};

/// One timestamped geolocation sample with motion metadata, as sent by a
/// device. Units: degrees, meters, m/s, m/s^2; timestamp is epoch
/// milliseconds (UTC).
struct LocationFix {
    UserId user;
    std::int64_t timestamp_ms = 0;
    double longitude = 0.0;
    double latitude = 0.0;
    double altitude = 0.0;
    double accuracy = 0.0;
    double speed = 0.0;
    double acceleration = 0.0;

    GeoPoint point() const { return GeoPoint{longitude, latitude}; }

    bool operator==(const LocationFix&) const = default;
};

/// Link from a relative to a person with dementia. Rank 1 is contacted
/// first; priorities are distinct within one dementia user's relative set.
struct RelativeLink {
    UserId dementia_user;
    int priority = 1;
};

struct UserProfile {
    UserId user;
    Role role = Role::Volunteer;
    std::optional<GeoPoint> last_known;
    // Willingness to be contacted. Read for volunteers and relatives.
    bool available = true;
    std::vector<RelativeLink> links;
};

// Canonical wire field names: user_id, timestamp, longitude, latitude,
// altitude, accuracy, speed, acceleration.
nlohmann::json to_json(const GeoPoint& p);
nlohmann::json to_json(const LocationFix& fix);
std::optional<GeoPoint> geopoint_from_json(const nlohmann::json& j);
std::optional<LocationFix> fix_from_json(const nlohmann::json& j);

}  // namespace wayguard
