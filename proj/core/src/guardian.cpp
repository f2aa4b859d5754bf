#include "wayguard/guardian/guardian.hpp"

#include <algorithm>

#include "wayguard/broker/envelope.hpp"
#include "wayguard/faas/faas.hpp"
#include "wayguard/geo.hpp"

namespace wayguard::guardian {

namespace {
std::int64_t now_epoch_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}
}  // namespace

// ---------------------------------------------------------------------------
// Directory

void Directory::put(UserProfile profile) {
    std::lock_guard lk(mu_);
    auto it = users_.find(profile.user);
    if (it != users_.end() && !profile.last_known && it->second.last_known) {
        profile.last_known = it->second.last_known;
    }
    for (const auto& link : profile.links) {
        relatives_[link.dementia_user][link.priority] = profile.user;
    }
    users_[profile.user] = std::move(profile);
}

std::optional<UserProfile> Directory::get(const UserId& user) const {
    std::lock_guard lk(mu_);
    auto it = users_.find(user);
    if (it == users_.end()) return std::nullopt;
    return it->second;
}

bool Directory::exists(const UserId& user) const {
    std::lock_guard lk(mu_);
    return users_.contains(user);
}

void Directory::set_available(const UserId& user, bool available) {
    std::lock_guard lk(mu_);
    auto it = users_.find(user);
    if (it != users_.end()) it->second.available = available;
}

void Directory::set_last_known(const UserId& user, GeoPoint p) {
    std::lock_guard lk(mu_);
    auto it = users_.find(user);
    if (it != users_.end()) it->second.last_known = p;
}

bool Directory::link(const UserId& relative, const UserId& dementia_user, int priority) {
    if (priority < 1) return false;
    std::lock_guard lk(mu_);
    auto rel = users_.find(relative);
    auto dem = users_.find(dementia_user);
    if (rel == users_.end() || dem == users_.end()) return false;
    if (rel->second.role != Role::Relative || dem->second.role != Role::Dementia) {
        return false;
    }
    auto& ranks = relatives_[dementia_user];
    auto existing = ranks.find(priority);
    if (existing != ranks.end() && existing->second != relative) return false;
    ranks[priority] = relative;
    auto& links = rel->second.links;
    if (std::none_of(links.begin(), links.end(), [&](const RelativeLink& l) {
            return l.dementia_user == dementia_user && l.priority == priority;
        })) {
        links.push_back({dementia_user, priority});
    }
    return true;
}

std::vector<UserProfile> Directory::volunteers() const {
    std::lock_guard lk(mu_);
    std::vector<UserProfile> out;
    for (const auto& [_, profile] : users_) {
        if (profile.role == Role::Volunteer) out.push_back(profile);
    }
    return out;
}

std::vector<Directory::RelativeEntry> Directory::relatives_of(
    const UserId& dementia_user) const {
    std::lock_guard lk(mu_);
    std::vector<RelativeEntry> out;
    auto it = relatives_.find(dementia_user);
    if (it == relatives_.end()) return out;
    for (const auto& [priority, relative] : it->second) {
        auto u = users_.find(relative);
        if (u == users_.end()) continue;
        out.push_back({relative, priority, u->second.available});
    }
    return out;
}

std::size_t Directory::size() const {
    std::lock_guard lk(mu_);
    return users_.size();
}

// ---------------------------------------------------------------------------
// Guardian

std::string_view to_string(AlarmSource s) {
    switch (s) {
        case AlarmSource::Manual: return "manual";
        case AlarmSource::Relative: return "relative";
        case AlarmSource::Automatic: return "automatic";
    }
    return "manual";
}

std::string_view to_string(MissionState s) {
    switch (s) {
        case MissionState::Notifying: return "notifying";
        case MissionState::Active: return "active";
        case MissionState::Closed: return "closed";
    }
    return "notifying";
}

Guardian::Guardian(broker::Broker& broker, Directory& directory, GuardianConfig cfg,
                   NotifySender sender, MetricsRegistry* metrics)
    : broker_(broker), directory_(directory), cfg_(std::move(cfg)),
      sender_(std::move(sender)), metrics_(metrics) {}

Guardian::~Guardian() { stop(); }

void Guardian::start() {
    stop_.store(false);
    anomaly_thread_ = std::thread([this] { consume_anomalies(); });
    fixes_thread_ = std::thread([this] { consume_fixes(); });
}

void Guardian::stop() {
    if (stop_.exchange(true)) return;
    if (anomaly_thread_.joinable()) anomaly_thread_.join();
    if (fixes_thread_.joinable()) fixes_thread_.join();
}

void Guardian::consume_anomalies() {
    auto sub = broker_.subscribe(cfg_.anomaly_topic);
    while (!stop_.load()) {
        auto env = sub->next(std::chrono::milliseconds(200));
        if (!env) continue;
        std::optional<faas::AnomalyVerdict> verdict;
        try {
            verdict = faas::verdict_from_json(nlohmann::json::parse(env->payload));
        } catch (const nlohmann::json::exception&) {
            continue;
        }
        if (!verdict || !verdict->anomalous) continue;
        {
            // Debounce: one automatic alarm per subject per window.
            std::lock_guard lk(mu_);
            auto it = last_automatic_.find(verdict->user);
            auto now = std::chrono::steady_clock::now();
            if (it != last_automatic_.end()
                && now - it->second < cfg_.automatic_debounce) {
                continue;
            }
            last_automatic_[verdict->user] = now;
        }
        trigger_alarm(verdict->user, AlarmSource::Automatic, std::nullopt);
    }
}

void Guardian::consume_fixes() {
    auto sub = broker_.subscribe(cfg_.fixes_topic);
    while (!stop_.load()) {
        auto env = sub->next(std::chrono::milliseconds(200));
        if (!env) continue;
        std::optional<LocationFix> fix;
        try {
            fix = fix_from_json(nlohmann::json::parse(env->payload));
        } catch (const nlohmann::json::exception&) {
            continue;
        }
        if (fix) on_fix(*fix);
    }
}

void Guardian::on_fix(const LocationFix& fix) {
    directory_.set_last_known(fix.user, fix.point());
    std::string mission_id;
    {
        std::lock_guard lk(mu_);
        auto open = open_alarm_by_subject_.find(fix.user);
        if (open == open_alarm_by_subject_.end()) return;
        auto mapping = mission_by_alarm_.find(open->second);
        if (mapping == mission_by_alarm_.end()) return;
        auto mit = missions_.find(mapping->second);
        if (mit == missions_.end() || mit->second.state != MissionState::Active) return;
        mission_id = mapping->second;
    }
    broadcast_location(mission_id, fix);
}

Selection Guardian::select_responders(const UserId& subject, const GeoPoint& at,
                                      int k) const {
    Selection out;
    struct Ranked {
        double distance_m;
        UserId user;
    };
    std::vector<Ranked> ranked;
    for (const auto& volunteer : directory_.volunteers()) {
        if (!volunteer.available || !volunteer.last_known) continue;
        double d = haversine_m(*volunteer.last_known, at);
        if (d > cfg_.max_radius_m) continue;
        ranked.push_back({d, volunteer.user});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.distance_m != b.distance_m) return a.distance_m < b.distance_m;
        return a.user < b.user;
    });
    for (const auto& r : ranked) {
        if (static_cast<int>(out.volunteers.size()) >= k) break;
        out.volunteers.push_back(r.user);
    }
    // Relatives are ordered by ascending priority number; rank 1 first.
    for (const auto& rel : directory_.relatives_of(subject)) {
        if (rel.available) {
            out.relative = rel.relative;
            break;
        }
    }
    return out;
}

Result<AlarmEvent> Guardian::trigger_alarm(const UserId& subject, AlarmSource source,
                                           std::optional<GeoPoint> location) {
    auto profile = directory_.get(subject);
    if (!profile) return Result<AlarmEvent>::fail(404, "unknown subject");
    if (profile->role != Role::Dementia) {
        return Result<AlarmEvent>::fail(409, "subject is not a dementia user");
    }

    std::lock_guard lk(mu_);
    if (auto open = open_alarm_by_subject_.find(subject);
        open != open_alarm_by_subject_.end()) {
        // Idempotent: a second trigger returns the open alarm untouched.
        return Result<AlarmEvent>::success(alarms_.at(open->second));
    }

    AlarmEvent alarm;
    alarm.id = broker::Uuid::random().to_string();
    alarm.subject = subject;
    alarm.source = source;
    alarm.raised_at_ms = now_epoch_ms();
    if (location) {
        alarm.location = *location;
    } else if (profile->last_known) {
        alarm.location = *profile->last_known;
    }
    alarms_[alarm.id] = alarm;
    open_alarm_by_subject_[subject] = alarm.id;
    if (metrics_) {
        metrics_->inc("guardian.alarms");
        metrics_->inc(std::string("guardian.alarms_") + std::string(to_string(source)));
    }
    notify_responders_locked(alarm);
    return Result<AlarmEvent>::success(alarm);
}

void Guardian::notify_responders_locked(const AlarmEvent& alarm) {
    Selection selection =
        select_responders(alarm.subject, alarm.location, cfg_.notify_volunteers);
    auto& notified = notified_[alarm.id];
    nlohmann::json message{
        {"type", "alarm"},
        {"alarm_id", alarm.id},
        {"subject", alarm.subject},
        {"source", std::string(to_string(alarm.source))},
        {"location", to_json(alarm.location)},
    };
    for (const auto& user : selection.volunteers) {
        notified.insert(user);
        if (sender_) sender_(user, message);
    }
    if (selection.relative) {
        notified.insert(*selection.relative);
        if (sender_) sender_(*selection.relative, message);
    }
    if (metrics_) {
        metrics_->inc("guardian.notifications", static_cast<double>(notified.size()));
    }
}

Result<Mission> Guardian::respond(const std::string& alarm_id, const UserId& user,
                                  bool accept) {
    std::lock_guard lk(mu_);
    auto ait = alarms_.find(alarm_id);
    if (ait == alarms_.end()) return Result<Mission>::fail(404, "unknown alarm");
    if (!ait->second.open) return Result<Mission>::fail(409, "alarm closed");
    auto nit = notified_.find(alarm_id);
    if (nit == notified_.end() || !nit->second.contains(user)) {
        return Result<Mission>::fail(403, "not notified for this alarm");
    }

    auto mission_it = mission_by_alarm_.find(alarm_id);
    if (!accept) {
        if (metrics_) metrics_->inc("guardian.declines");
        if (mission_it != mission_by_alarm_.end()) {
            return Result<Mission>::success(missions_.at(mission_it->second));
        }
        Mission placeholder;
        placeholder.alarm_id = alarm_id;
        placeholder.subject = ait->second.subject;
        placeholder.state = MissionState::Notifying;
        return Result<Mission>::success(placeholder);
    }

    if (mission_it == mission_by_alarm_.end()) {
        Mission mission;
        mission.id = broker::Uuid::random().to_string();
        mission.alarm_id = alarm_id;
        mission.subject = ait->second.subject;
        mission.participants.insert(user);
        mission.state = MissionState::Active;
        mission.opened_at_ms = now_epoch_ms();
        missions_[mission.id] = mission;
        mission_by_alarm_[alarm_id] = mission.id;
        if (metrics_) metrics_->inc("guardian.missions");
        return Result<Mission>::success(mission);
    }
    Mission& mission = missions_.at(mission_it->second);
    if (mission.state == MissionState::Closed) {
        return Result<Mission>::fail(409, "mission closed");
    }
    mission.participants.insert(user);
    return Result<Mission>::success(mission);
}

Result<int> Guardian::broadcast_location(const std::string& mission_id,
                                         const LocationFix& fix) {
    std::set<UserId> recipients;
    {
        std::lock_guard lk(mu_);
        auto it = missions_.find(mission_id);
        if (it == missions_.end()) return Result<int>::fail(404, "unknown mission");
        const Mission& mission = it->second;
        if (mission.state != MissionState::Active) {
            return Result<int>::fail(409, "mission not active");
        }
        if (fix.user != mission.subject) {
            return Result<int>::fail(409, "fix is not from the mission subject");
        }
        recipients = mission.participants;
        recipients.erase(mission.subject);
    }
    nlohmann::json message{
        {"type", "location"},
        {"mission_id", mission_id},
        {"fix", to_json(fix)},
    };
    int delivered = 0;
    for (const auto& user : recipients) {
        if (sender_) sender_(user, message);
        ++delivered;
    }
    if (metrics_) metrics_->inc("guardian.broadcasts", delivered);
    return Result<int>::success(delivered);
}

Result<Mission> Guardian::close_mission(const std::string& mission_id, const UserId& by) {
    std::lock_guard lk(mu_);
    auto it = missions_.find(mission_id);
    if (it == missions_.end()) return Result<Mission>::fail(404, "unknown mission");
    Mission& mission = it->second;
    if (!mission.participants.contains(by)) {
        return Result<Mission>::fail(403, "not a mission participant");
    }
    if (mission.state == MissionState::Closed) {
        return Result<Mission>::success(mission);  // idempotent
    }
    mission.state = MissionState::Closed;
    mission.closed_at_ms = now_epoch_ms();
    auto ait = alarms_.find(mission.alarm_id);
    if (ait != alarms_.end()) {
        ait->second.open = false;
        open_alarm_by_subject_.erase(ait->second.subject);
    }
    if (metrics_) metrics_->inc("guardian.missions_closed");
    return Result<Mission>::success(mission);
}

std::optional<AlarmEvent> Guardian::alarm(const std::string& id) const {
    std::lock_guard lk(mu_);
    auto it = alarms_.find(id);
    if (it == alarms_.end()) return std::nullopt;
    return it->second;
}

std::optional<Mission> Guardian::mission(const std::string& id) const {
    std::lock_guard lk(mu_);
    auto it = missions_.find(id);
    if (it == missions_.end()) return std::nullopt;
    return it->second;
}

std::optional<Mission> Guardian::active_mission_of(const UserId& subject) const {
    std::lock_guard lk(mu_);
    auto open = open_alarm_by_subject_.find(subject);
    if (open == open_alarm_by_subject_.end()) return std::nullopt;
    auto mapping = mission_by_alarm_.find(open->second);
    if (mapping == mission_by_alarm_.end()) return std::nullopt;
    return missions_.at(mapping->second);
}

std::vector<UserId> Guardian::notified_for(const std::string& alarm_id) const {
    std::lock_guard lk(mu_);
    auto it = notified_.find(alarm_id);
    if (it == notified_.end()) return {};
    return std::vector<UserId>(it->second.begin(), it->second.end());
}

// ---------------------------------------------------------------------------
// RPC dispatch

nlohmann::json to_json(const AlarmEvent& alarm) {
    return nlohmann::json{
        {"alarm_id", alarm.id},
        {"subject", alarm.subject},
        {"source", std::string(to_string(alarm.source))},
        {"raised_at", alarm.raised_at_ms},
        {"location", wayguard::to_json(alarm.location)},
        {"open", alarm.open},
    };
}

nlohmann::json to_json(const Mission& mission) {
    nlohmann::json participants = nlohmann::json::array();
    for (const auto& p : mission.participants) participants.push_back(p);
    return nlohmann::json{
        {"mission_id", mission.id},
        {"alarm_id", mission.alarm_id},
        {"subject", mission.subject},
        {"participants", participants},
        {"state", std::string(to_string(mission.state))},
        {"opened_at", mission.opened_at_ms},
        {"closed_at", mission.closed_at_ms},
    };
}

namespace {

nlohmann::json reply(int status, nlohmann::json body) {
    return nlohmann::json{{"http_status", status}, {"body", std::move(body)}};
}

nlohmann::json reply_error(int status, const std::string& message) {
    return reply(status, nlohmann::json{{"error", message}});
}

nlohmann::json reply_result(const GuardianError& e) {
    return reply_error(e.http_status, e.message);
}

bool is_linked_relative(Directory& directory, const UserId& relative,
                        const UserId& dementia_user) {
    for (const auto& entry : directory.relatives_of(dementia_user)) {
        if (entry.relative == relative) return true;
    }
    return false;
}

}  // namespace

nlohmann::json dispatch_rpc(Guardian& guardian, Directory& directory,
                            const nlohmann::json& request) {
    std::string action = request.value("action", "");
    const auto& identity = request.at("identity");
    UserId caller = identity.value("user", "");
    auto role = role_from_string(identity.value("role", ""));
    if (caller.empty() || !role) return reply_error(400, "missing identity");
    const auto body = request.value("body", nlohmann::json::object());

    if (action == "trigger_alarm") {
        std::string subject = body.value("subject_id", "");
        std::string source_name = body.value("source", "manual");
        std::optional<GeoPoint> location;
        if (body.contains("longitude") && body.contains("latitude")) {
            location = GeoPoint{body["longitude"].get<double>(),
                                body["latitude"].get<double>()};
        }
        AlarmSource source;
        if (source_name == "manual") {
            source = AlarmSource::Manual;
            if (subject.empty()) subject = caller;
            if (subject != caller) {
                return reply_error(403, "manual alarms are raised by the subject");
            }
        } else if (source_name == "relative") {
            source = AlarmSource::Relative;
            if (*role != Role::Relative || !is_linked_relative(directory, caller, subject)) {
                return reply_error(403, "only a linked relative may raise this alarm");
            }
        } else {
            return reply_error(400, "source must be manual or relative");
        }
        auto result = guardian.trigger_alarm(subject, source, location);
        if (!result.ok()) return reply_result(*result.error);
        return reply(201, to_json(*result.value));
    }

    if (action == "respond") {
        std::string alarm_id = body.value("alarm_id", "");
        std::string decision = body.value("decision", "");
        if (decision != "accept" && decision != "decline") {
            return reply_error(400, "decision must be accept or decline");
        }
        auto result = guardian.respond(alarm_id, caller, decision == "accept");
        if (!result.ok()) return reply_result(*result.error);
        return reply(200, to_json(*result.value));
    }

    if (action == "close_mission") {
        auto result = guardian.close_mission(body.value("mission_id", ""), caller);
        if (!result.ok()) return reply_result(*result.error);
        return reply(200, to_json(*result.value));
    }

    if (action == "get_location") {
        std::string target = body.value("user_id", "");
        if (*role != Role::Relative || !is_linked_relative(directory, caller, target)) {
            return reply_error(403, "only a linked relative may track this user");
        }
        auto profile = directory.get(target);
        if (!profile) return reply_error(404, "unknown user");
        if (!profile->last_known) return reply_error(404, "no location recorded");
        return reply(200, wayguard::to_json(*profile->last_known));
    }

    return reply_error(400, "unknown action");
}

}  // namespace wayguard::guardian
