#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "wayguard/geo.hpp"
#include "wayguard/types.hpp"
#include "wayguard/validate.hpp"

using namespace wayguard;

namespace {

LocationFix sample_fix() {
    LocationFix fix;
    fix.user = "u1";
    fix.timestamp_ms = 1'700'000'000'000;
    fix.longitude = 10.38;
    fix.latitude = 55.40;
    fix.altitude = 12.0;
    fix.accuracy = 5.0;
    fix.speed = 1.2;
    fix.acceleration = 0.1;
    return fix;
}

// Independent check: spherical law of cosines on the same sphere.
double law_of_cosines_m(const GeoPoint& a, const GeoPoint& b) {
    constexpr double rad = std::numbers::pi / 180.0;
    double s = std::sin(a.latitude * rad) * std::sin(b.latitude * rad)
               + std::cos(a.latitude * rad) * std::cos(b.latitude * rad)
                     * std::cos((b.longitude - a.longitude) * rad);
    s = std::clamp(s, -1.0, 1.0);
    return kEarthRadiusM * std::acos(s);
}

GeoPoint random_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> lon(-180.0, 180.0);
    std::uniform_real_distribution<double> lat(-90.0, 90.0);
    return GeoPoint{lon(rng), lat(rng)};
}

}  // namespace

TEST_CASE("validate_fix accepts a well-formed fix") {
    CHECK(validate_fix(sample_fix()) == std::nullopt);
}

TEST_CASE("validate_fix names the first violated field") {
    auto fix = sample_fix();
    fix.latitude = 91.0;
    CHECK(validate_fix(fix) == std::optional<std::string>("latitude"));

    fix = sample_fix();
    fix.accuracy = -1.0;
    CHECK(validate_fix(fix) == std::optional<std::string>("accuracy"));

    fix = sample_fix();
    fix.speed = -0.5;
    CHECK(validate_fix(fix) == std::optional<std::string>("speed"));

    fix = sample_fix();
    fix.timestamp_ms = 0;
    CHECK(validate_fix(fix) == std::optional<std::string>("timestamp"));

    fix = sample_fix();
    fix.user.clear();
    CHECK(validate_fix(fix) == std::optional<std::string>("user_id"));

    fix = sample_fix();
    fix.longitude = -180.5;
    CHECK(validate_fix(fix) == std::optional<std::string>("longitude"));

    fix = sample_fix();
    fix.latitude = std::nan("");
    CHECK(validate_fix(fix) == std::optional<std::string>("latitude"));
}

TEST_CASE("validate_fix accepts exactly the set defined by the field bounds") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lon(-200.0, 200.0);
    std::uniform_real_distribution<double> lat(-100.0, 100.0);
    std::uniform_real_distribution<double> maybe_negative(-2.0, 10.0);
    std::uniform_int_distribution<std::int64_t> ts(-5, 5);
    for (int i = 0; i < 5000; ++i) {
        LocationFix fix = sample_fix();
        fix.longitude = lon(rng);
        fix.latitude = lat(rng);
        fix.accuracy = maybe_negative(rng);
        fix.speed = maybe_negative(rng);
        fix.timestamp_ms = ts(rng) <= 0 ? ts(rng) : 1'700'000'000'000 + i;
        bool in_bounds = fix.longitude >= -180.0 && fix.longitude <= 180.0
                         && fix.latitude >= -90.0 && fix.latitude <= 90.0
                         && fix.accuracy >= 0.0 && fix.speed >= 0.0
                         && fix.timestamp_ms > 0;
        CHECK(!validate_fix(fix).has_value() == in_bounds);
    }
}

TEST_CASE("fix json round trip uses canonical field names") {
    auto fix = sample_fix();
    auto j = to_json(fix);
    for (const char* field : {"user_id", "timestamp", "longitude", "latitude", "altitude",
                              "accuracy", "speed", "acceleration"}) {
        CHECK(j.contains(field));
    }
    auto back = fix_from_json(j);
    REQUIRE(back.has_value());
    CHECK(*back == fix);
}

TEST_CASE("fix_from_json rejects missing or mistyped fields") {
    auto j = to_json(sample_fix());
    j.erase("speed");
    CHECK(!fix_from_json(j).has_value());
    j = to_json(sample_fix());
    j["latitude"] = "55.4";
    CHECK(!fix_from_json(j).has_value());
    CHECK(!fix_from_json(nlohmann::json::array()).has_value());
}

TEST_CASE("haversine identity and half circumference") {
    GeoPoint odense{10.3852, 55.3997};
    CHECK(haversine_m(odense, odense) == 0.0);

    GeoPoint a{0.0, 0.0};
    GeoPoint b{180.0, 0.0};
    CHECK(haversine_m(a, b) == doctest::Approx(std::numbers::pi * kEarthRadiusM).epsilon(1e-12));
}

TEST_CASE("haversine agrees with the law-of-cosines oracle") {
    GeoPoint odense{10.3852, 55.3997};
    GeoPoint copenhagen{12.5683, 55.6761};
    double got = haversine_m(odense, copenhagen);
    double expect = law_of_cosines_m(odense, copenhagen);
    CHECK(got == doctest::Approx(expect).epsilon(0.005));
    // Sanity: this pair is roughly 140 km apart.
    CHECK(got > 120'000.0);
    CHECK(got < 160'000.0);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        GeoPoint p = random_point(rng);
        GeoPoint q = random_point(rng);
        double h = haversine_m(p, q);
        double o = law_of_cosines_m(p, q);
        // The law of cosines loses precision for near-identical points;
        // compare only when the distance is macroscopic.
        if (o > 1000.0) {
            CHECK(h == doctest::Approx(o).epsilon(0.005));
        }
    }
}

TEST_CASE("haversine is symmetric and non-negative") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 5000; ++i) {
        GeoPoint a = random_point(rng);
        GeoPoint b = random_point(rng);
        double ab = haversine_m(a, b);
        double ba = haversine_m(b, a);
        CHECK(ab == ba);  // bit-exact
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("haversine satisfies the triangle inequality") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 2000; ++i) {
        GeoPoint a = random_point(rng);
        GeoPoint b = random_point(rng);
        GeoPoint c = random_point(rng);
        double ab = haversine_m(a, b);
        double bc = haversine_m(b, c);
        double ac = haversine_m(a, c);
        CHECK(ac <= (ab + bc) * (1.0 + 1e-6) + 1e-6);
    }
}

TEST_CASE("roles parse and print") {
    CHECK(role_from_string("dementia") == Role::Dementia);
    CHECK(role_from_string("relative") == Role::Relative);
    CHECK(role_from_string("volunteer") == Role::Volunteer);
    CHECK(!role_from_string("admin").has_value());
    CHECK(to_string(Role::Dementia) == "dementia");
}
