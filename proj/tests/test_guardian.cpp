#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <thread>

#include "wayguard/broker/inproc.hpp"
#include "wayguard/faas/faas.hpp"
#include "wayguard/geo.hpp"
#include "wayguard/guardian/guardian.hpp"

using namespace wayguard;
using namespace wayguard::guardian;
using namespace std::chrono_literals;

namespace {

constexpr GeoPoint kCenter{10.3852, 55.3997};

GeoPoint offset_m(const GeoPoint& base, double east_m, double north_m) {
    constexpr double kMetersPerDegLat = 111'320.0;
    double lat = base.latitude + north_m / kMetersPerDegLat;
    double lon = base.longitude
                 + east_m / (kMetersPerDegLat * std::cos(base.latitude * std::numbers::pi / 180.0));
    return GeoPoint{lon, lat};
}

UserProfile profile(const std::string& id, Role role, std::optional<GeoPoint> at,
                    bool available = true) {
    UserProfile p;
    p.user = id;
    p.role = role;
    p.last_known = at;
    p.available = available;
    return p;
}

struct Fixture {
    broker::InProcBroker broker;
    Directory directory;
    std::vector<std::pair<UserId, nlohmann::json>> sent;
    std::mutex sent_mu;
    std::unique_ptr<Guardian> guardian;

    explicit Fixture(GuardianConfig cfg = {}) {
        guardian = std::make_unique<Guardian>(
            broker, directory, cfg,
            [this](const UserId& user, const nlohmann::json& message) {
                std::lock_guard lk(sent_mu);
                sent.emplace_back(user, message);
            },
            nullptr);
        directory.put(profile("subject", Role::Dementia, kCenter));
    }

    std::vector<UserId> notified_users() {
        std::lock_guard lk(sent_mu);
        std::vector<UserId> out;
        for (auto& [user, _] : sent) out.push_back(user);
        return out;
    }
};

}  // namespace

TEST_CASE("directory links enforce distinct priorities per dementia user") {
    Directory dir;
    dir.put(profile("dem", Role::Dementia, kCenter));
    dir.put(profile("rel1", Role::Relative, std::nullopt));
    dir.put(profile("rel2", Role::Relative, std::nullopt));
    CHECK(dir.link("rel1", "dem", 1));
    CHECK(!dir.link("rel2", "dem", 1));  // priority taken
    CHECK(dir.link("rel2", "dem", 2));
    CHECK(dir.link("rel1", "dem", 1));  // re-linking the same pair is fine

    auto rels = dir.relatives_of("dem");
    REQUIRE(rels.size() == 2);
    CHECK(rels[0].relative == "rel1");
    CHECK(rels[0].priority == 1);
    CHECK(rels[1].relative == "rel2");

    CHECK(!dir.link("rel1", "rel2", 1));  // wrong roles
}

TEST_CASE("select_responders ranks volunteers by distance with id tiebreak") {
    Fixture f;
    f.directory.put(profile("v100", Role::Volunteer, offset_m(kCenter, 100, 0)));
    f.directory.put(profile("v500", Role::Volunteer, offset_m(kCenter, 0, 500)));
    f.directory.put(profile("v200", Role::Volunteer, offset_m(kCenter, -200, 0)));
    auto selection = f.guardian->select_responders("subject", kCenter, 2);
    REQUIRE(selection.volunteers.size() == 2);
    CHECK(selection.volunteers[0] == "v100");
    CHECK(selection.volunteers[1] == "v200");

    // Ranking against an independent ordering of all candidates.
    auto all = f.guardian->select_responders("subject", kCenter, 10);
    std::vector<std::pair<double, UserId>> oracle;
    for (const auto& v : f.directory.volunteers()) {
        oracle.emplace_back(haversine_m(*v.last_known, kCenter), v.user);
    }
    std::sort(oracle.begin(), oracle.end());
    REQUIRE(all.volunteers.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(all.volunteers[i] == oracle[i].second);
    }

    // Prefix property: a larger K never reorders the selection.
    for (std::size_t i = 0; i < selection.volunteers.size(); ++i) {
        CHECK(selection.volunteers[i] == all.volunteers[i]);
    }
}

TEST_CASE("unavailable and out-of-radius volunteers are excluded") {
    Fixture f;
    f.directory.put(profile("near-busy", Role::Volunteer, offset_m(kCenter, 50, 0), false));
    f.directory.put(profile("near-free", Role::Volunteer, offset_m(kCenter, 300, 0)));
    f.directory.put(profile("too-far", Role::Volunteer, offset_m(kCenter, 20'000, 0)));
    f.directory.put(profile("no-fix", Role::Volunteer, std::nullopt));
    auto selection = f.guardian->select_responders("subject", kCenter, 5);
    REQUIRE(selection.volunteers.size() == 1);
    CHECK(selection.volunteers[0] == "near-free");
}

TEST_CASE("the available relative with the smallest priority number is chosen") {
    Fixture f;
    f.directory.put(profile("rel-a", Role::Relative, std::nullopt));
    f.directory.put(profile("rel-b", Role::Relative, std::nullopt));
    f.directory.link("rel-a", "subject", 2);
    f.directory.link("rel-b", "subject", 1);
    auto selection = f.guardian->select_responders("subject", kCenter, 5);
    CHECK(selection.relative == UserId("rel-b"));

    f.directory.set_available("rel-b", false);
    selection = f.guardian->select_responders("subject", kCenter, 5);
    CHECK(selection.relative == UserId("rel-a"));
}

TEST_CASE("trigger_alarm notifies and is idempotent per subject") {
    Fixture f;
    f.directory.put(profile("v1", Role::Volunteer, offset_m(kCenter, 100, 0)));
    f.directory.put(profile("rel", Role::Relative, std::nullopt));
    f.directory.link("rel", "subject", 1);

    auto first = f.guardian->trigger_alarm("subject", AlarmSource::Manual, kCenter);
    REQUIRE(first.ok());
    CHECK(f.notified_users().size() == 2);  // volunteer + relative

    auto second = f.guardian->trigger_alarm("subject", AlarmSource::Manual, kCenter);
    REQUIRE(second.ok());
    CHECK(second.value->id == first.value->id);
    CHECK(f.notified_users().size() == 2);  // no duplicate notifications

    auto unknown = f.guardian->trigger_alarm("ghost", AlarmSource::Manual, kCenter);
    CHECK(!unknown.ok());
    CHECK(unknown.error->http_status == 404);

    auto wrong_role = f.guardian->trigger_alarm("v1", AlarmSource::Manual, kCenter);
    CHECK(!wrong_role.ok());
}

TEST_CASE("respond transitions and participant sets") {
    Fixture f;
    f.directory.put(profile("v1", Role::Volunteer, offset_m(kCenter, 100, 0)));
    f.directory.put(profile("v2", Role::Volunteer, offset_m(kCenter, 200, 0)));
    auto alarm = f.guardian->trigger_alarm("subject", AlarmSource::Manual, kCenter);
    REQUIRE(alarm.ok());
    auto id = alarm.value->id;

    auto declined = f.guardian->respond(id, "v2", false);
    REQUIRE(declined.ok());
    CHECK(declined.value->state == MissionState::Notifying);

    auto accepted = f.guardian->respond(id, "v1", true);
    REQUIRE(accepted.ok());
    CHECK(accepted.value->state == MissionState::Active);
    CHECK(accepted.value->participants.size() == 1);

    auto second = f.guardian->respond(id, "v2", true);
    REQUIRE(second.ok());
    CHECK(second.value->participants.size() == 2);

    auto outsider = f.guardian->respond(id, "nobody", true);
    CHECK(!outsider.ok());
    CHECK(outsider.error->http_status == 403);
}

TEST_CASE("broadcast fan-out excludes the subject and needs an active mission") {
    Fixture f;
    for (int i = 1; i <= 3; ++i) {
        f.directory.put(profile("v" + std::to_string(i), Role::Volunteer,
                                offset_m(kCenter, 100.0 * i, 0)));
    }
    auto alarm = f.guardian->trigger_alarm("subject", AlarmSource::Manual, kCenter);
    REQUIRE(alarm.ok());

    LocationFix fix;
    fix.user = "subject";
    fix.timestamp_ms = 1;
    fix.longitude = kCenter.longitude;
    fix.latitude = kCenter.latitude;

    auto premature = f.guardian->broadcast_location("nope", fix);
    CHECK(!premature.ok());

    for (int i = 1; i <= 3; ++i) {
        REQUIRE(f.guardian->respond(alarm.value->id, "v" + std::to_string(i), true).ok());
    }
    auto mission = f.guardian->active_mission_of("subject");
    REQUIRE(mission.has_value());

    f.sent.clear();
    auto count = f.guardian->broadcast_location(mission->id, fix);
    REQUIRE(count.ok());
    CHECK(*count.value == 3);
    for (const auto& user : f.notified_users()) CHECK(user != "subject");

    LocationFix foreign = fix;
    foreign.user = "v1";
    CHECK(!f.guardian->broadcast_location(mission->id, foreign).ok());
}

TEST_CASE("close_mission is participant-only, terminal and idempotent") {
    Fixture f;
    f.directory.put(profile("v1", Role::Volunteer, offset_m(kCenter, 100, 0)));
    auto alarm = f.guardian->trigger_alarm("subject", AlarmSource::Manual, kCenter);
    REQUIRE(f.guardian->respond(alarm.value->id, "v1", true).ok());
    auto mission = f.guardian->active_mission_of("subject");
    REQUIRE(mission.has_value());

    CHECK(!f.guardian->close_mission(mission->id, "stranger").ok());

    auto closed = f.guardian->close_mission(mission->id, "v1");
    REQUIRE(closed.ok());
    CHECK(closed.value->state == MissionState::Closed);

    // Closed is terminal: broadcasts fail, a second close succeeds as a no-op.
    LocationFix fix;
    fix.user = "subject";
    fix.timestamp_ms = 2;
    CHECK(!f.guardian->broadcast_location(mission->id, fix).ok());
    CHECK(f.guardian->close_mission(mission->id, "v1").ok());

    // The subject can raise a fresh alarm afterwards.
    auto again = f.guardian->trigger_alarm("subject", AlarmSource::Manual, kCenter);
    REQUIRE(again.ok());
    CHECK(again.value->id != alarm.value->id);
}

TEST_CASE("state machine safety under random event interleavings") {
    std::mt19937_64 rng(41);
    for (int round = 0; round < 50; ++round) {
        Fixture f;
        std::vector<UserId> responders;
        for (int i = 0; i < 4; ++i) {
            UserId id = "v" + std::to_string(i);
            f.directory.put(profile(id, Role::Volunteer, offset_m(kCenter, 100 + i, 0)));
            responders.push_back(id);
        }
        auto alarm = f.guardian->trigger_alarm("subject", AlarmSource::Manual, kCenter);
        REQUIRE(alarm.ok());

        int last_rank = 0;  // 0 notifying, 1 active, 2 closed
        std::string mission_id;
        for (int step = 0; step < 20; ++step) {
            int action = static_cast<int>(rng() % 3);
            const UserId& who = responders[rng() % responders.size()];
            if (action == 0) {
                auto r = f.guardian->respond(alarm.value->id, who, rng() % 2 == 0);
                if (r.ok() && r.value->state == MissionState::Active) {
                    mission_id = r.value->id;
                }
            } else if (action == 1 && !mission_id.empty()) {
                f.guardian->close_mission(mission_id, who);
            } else if (!mission_id.empty()) {
                LocationFix fix;
                fix.user = "subject";
                fix.timestamp_ms = step + 1;
                f.guardian->broadcast_location(mission_id, fix);
            }
            int rank = 0;
            if (!mission_id.empty()) {
                auto m = f.guardian->mission(mission_id);
                REQUIRE(m.has_value());
                rank = m->state == MissionState::Closed  ? 2
                       : m->state == MissionState::Active ? 1
                                                          : 0;
            }
            CHECK(rank >= last_rank);  // never moves backwards
            last_rank = rank;
        }
    }
}

TEST_CASE("anomalous verdicts on the topic raise automatic alarms with debounce") {
    GuardianConfig cfg;
    cfg.automatic_debounce = 10s;
    Fixture f(cfg);
    f.directory.put(profile("v1", Role::Volunteer, offset_m(kCenter, 100, 0)));
    f.guardian->start();

    faas::AnomalyVerdict verdict{"subject", 123, kCenter, 450.0, true};
    f.broker.publish(cfg.anomaly_topic,
                     broker::Envelope::make(faas::to_json(verdict).dump()));
    f.broker.publish(cfg.anomaly_topic,
                     broker::Envelope::make(faas::to_json(verdict).dump()));

    std::optional<Mission> none;
    for (int waited = 0; waited < 100; ++waited) {
        if (f.guardian->active_mission_of("subject") || !f.notified_users().empty()) break;
        std::this_thread::sleep_for(10ms);
    }
    auto notified = f.notified_users();
    CHECK(notified.size() == 1);  // debounce folded the second verdict
    (void)none;

    // Non-anomalous verdicts never trigger.
    faas::AnomalyVerdict calm{"subject", 124, kCenter, 10.0, false};
    f.broker.publish(cfg.anomaly_topic, broker::Envelope::make(faas::to_json(calm).dump()));
    std::this_thread::sleep_for(100ms);
    CHECK(f.notified_users().size() == 1);
    f.guardian->stop();
}

TEST_CASE("rpc dispatch enforces authorization") {
    Fixture f;
    f.directory.put(profile("rel", Role::Relative, std::nullopt));
    f.directory.put(profile("vol", Role::Volunteer, offset_m(kCenter, 100, 0)));
    f.directory.link("rel", "subject", 1);

    auto call = [&](const nlohmann::json& req) {
        return dispatch_rpc(*f.guardian, f.directory, req);
    };

    // A stranger cannot raise a manual alarm for somebody else.
    auto denied = call({{"identity", {{"user", "vol"}, {"role", "volunteer"}}},
                        {"action", "trigger_alarm"},
                        {"body", {{"subject_id", "subject"}, {"source", "manual"}}}});
    CHECK(denied["http_status"] == 403);

    // The subject can.
    auto ok = call({{"identity", {{"user", "subject"}, {"role", "dementia"}}},
                    {"action", "trigger_alarm"},
                    {"body", {{"source", "manual"}}}});
    CHECK(ok["http_status"] == 201);
    auto alarm_id = ok["body"]["alarm_id"].get<std::string>();

    // A linked relative may track; a volunteer may not.
    auto track_ok = call({{"identity", {{"user", "rel"}, {"role", "relative"}}},
                          {"action", "get_location"},
                          {"body", {{"user_id", "subject"}}}});
    CHECK(track_ok["http_status"] == 200);
    auto track_denied = call({{"identity", {{"user", "vol"}, {"role", "volunteer"}}},
                              {"action", "get_location"},
                              {"body", {{"user_id", "subject"}}}});
    CHECK(track_denied["http_status"] == 403);

    // Relative-triggered alarms only through the link.
    auto rel_alarm = call({{"identity", {{"user", "rel"}, {"role", "relative"}}},
                           {"action", "trigger_alarm"},
                           {"body", {{"subject_id", "subject"}, {"source", "relative"}}}});
    CHECK(rel_alarm["http_status"] == 201);
    CHECK(rel_alarm["body"]["alarm_id"] == alarm_id);  // idempotent open alarm

    auto unknown = call({{"identity", {{"user", "vol"}, {"role", "volunteer"}}},
                         {"action", "shrug"},
                         {"body", nlohmann::json::object()}});
    CHECK(unknown["http_status"] == 400);
}
