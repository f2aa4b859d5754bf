#include "wayguard/types.hpp"

namespace wayguard {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::Dementia: return "dementia";
        case Role::Relative: return "relative";
        case Role::Volunteer: return "volunteer";
    }
    return "volunteer";
}

std::optional<Role> role_from_string(std::string_view s) {
    if (s == "dementia") return Role::Dementia;
    if (s == "relative") return Role::Relative;
    if (s == "volunteer") return Role::Volunteer;
    return std::nullopt;
}

nlohmann::json to_json(const GeoPoint& p) {
    return nlohmann::json{{"longitude", p.longitude}, {"latitude", p.latitude}};
}

nlohmann::json to_json(const LocationFix& fix) {
    return nlohmann::json{
        {"user_id", fix.user},
        {"timestamp", fix.timestamp_ms},
        {"longitude", fix.longitude},
        {"latitude", fix.latitude},
        {"altitude", fix.altitude},
        {"accuracy", fix.accuracy},
        {"speed", fix.speed},
        {"acceleration", fix.acceleration},
    };
}

std::optional<GeoPoint> geopoint_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("longitude") || !j.contains("latitude")) {
        return std::nullopt;
    }
    if (!j["longitude"].is_number() || !j["latitude"].is_number()) {
        return std::nullopt;
    }
    GeoPoint p;
    p.longitude = j["longitude"].get<double>();
    p.latitude = j["latitude"].get<double>();
    return p;
}

std::optional<LocationFix> fix_from_json(const nlohmann::json& j) {
    if (!j.is_object()) return std::nullopt;
    static constexpr const char* kNumeric[] = {
        "timestamp", "longitude", "latitude", "altitude",
        "accuracy",  "speed",     "acceleration",
    };
    if (!j.contains("user_id") || !j["user_id"].is_string()) return std::nullopt;
    for (const char* field : kNumeric) {
        if (!j.contains(field) || !j[field].is_number()) return std::nullopt;
    }
    LocationFix fix;
    fix.user = j["user_id"].get<std::string>();
    fix.timestamp_ms = j["timestamp"].get<std::int64_t>();
    fix.longitude = j["longitude"].get<double>();
    fix.latitude = j["latitude"].get<double>();
    fix.altitude = j["altitude"].get<double>();
    fix.accuracy = j["accuracy"].get<double>();
    fix.speed = j["speed"].get<double>();
    fix.acceleration = j["acceleration"].get<double>();
    return fix;
}

}  // namespace wayguard
