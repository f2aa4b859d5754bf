#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <unordered_map>
#include <vector>

#include "wayguard/broker/broker.hpp"
#include "wayguard/metrics.hpp"
#include "wayguard/types.hpp"

namespace wayguard::guardian {

/// Thread-safe registry of user profiles, relative links, availability
/// and last known positions.
class Directory {
public:
    /// Upsert; keeps existing last_known when the new profile has none.
    void put(UserProfile profile);
    std::optional<UserProfile> get(const UserId& user) const;
    bool exists(const UserId& user) const;

    void set_available(const UserId& user, bool available);
    void set_last_known(const UserId& user, GeoPoint p);

    /// Adds a (relative -> dementia user) link. Fails when the priority is
    /// already taken within that dementia user's relative set or either
    /// role does not fit.
    bool link(const UserId& relative, const UserId& dementia_user, int priority);

    std::vector<UserProfile> volunteers() const;
    /// (relative id, priority, available) tuples for one dementia user.
    struct RelativeEntry {
        UserId relative;
        int priority = 0;
        bool available = false;
    };
    std::vector<RelativeEntry> relatives_of(const UserId& dementia_user) const;

    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::unordered_map<UserId, UserProfile> users_;
    // dementia user -> (priority -> relative)
    std::unordered_map<UserId, std::map<int, UserId>> relatives_;
};

enum class AlarmSource { Manual, Relative, Automatic };
std::string_view to_string(AlarmSource s);

struct AlarmEvent {
    std::string id;
    UserId subject;
    AlarmSource source = AlarmSource::Manual;
    std::int64_t raised_at_ms = 0;
    GeoPoint location;
    bool open = true;
};

enum class MissionState { Notifying, Active, Closed };
std::string_view to_string(MissionState s);

struct Mission {
    std::string id;
    std::string alarm_id;
    UserId subject;
    std::set<UserId> participants;
    MissionState state = MissionState::Notifying;
    std::int64_t opened_at_ms = 0;
    std::int64_t closed_at_ms = 0;
};

struct Selection {
    std::vector<UserId> volunteers;  // nearest first
    std::optional<UserId> relative;  // highest-priority available one
};

struct GuardianConfig {
    int notify_volunteers = 5;        // K
    double max_radius_m = 5000.0;
    std::chrono::milliseconds automatic_debounce{600000};
    std::string anomaly_topic = "anomaly";
    std::string fixes_topic = "fixes";
};

struct GuardianError {
    int http_status = 400;
    std::string message;
};

template <typename T>
struct Result {
    std::optional<T> value;
    std::optional<GuardianError> error;

    bool ok() const { return value.has_value(); }
    static Result success(T v) { return Result{std::move(v), std::nullopt}; }
    static Result fail(int status, std::string msg) {
        return Result{std::nullopt, GuardianError{status, std::move(msg)}};
    }
};

/// The help component: alarms from three sources, responder selection,
/// mission lifecycle and location fan-out to mission participants.
/// State transitions are serialized; notification sending goes through an
/// injected sender so transports stay pluggable.
class Guardian {
public:
    using NotifySender = std::function<void(const UserId&, const nlohmann::json&)>;

    Guardian(broker::Broker& broker, Directory& directory, GuardianConfig cfg,
             NotifySender sender, MetricsRegistry* metrics);
    ~Guardian();

    /// Starts the anomaly topic consumer (Automatic alarms) and the fixes
    /// topic consumer (last-known updates + mission broadcasts).
    void start();
    void stop();

    Result<AlarmEvent> trigger_alarm(const UserId& subject, AlarmSource source,
                                     std::optional<GeoPoint> location);
    Selection select_responders(const UserId& subject, const GeoPoint& at, int k) const;
    Result<Mission> respond(const std::string& alarm_id, const UserId& user, bool accept);
    Result<int> broadcast_location(const std::string& mission_id, const LocationFix& fix);
    Result<Mission> close_mission(const std::string& mission_id, const UserId& by);

    std::optional<AlarmEvent> alarm(const std::string& id) const;
    std::optional<Mission> mission(const std::string& id) const;
    std::optional<Mission> active_mission_of(const UserId& subject) const;
    std::vector<UserId> notified_for(const std::string& alarm_id) const;

    /// Feed of accepted fixes (driven by the fixes topic subscriber, or
    /// called directly in-process).
    void on_fix(const LocationFix& fix);

private:
    void notify_responders_locked(const AlarmEvent& alarm);
    void consume_anomalies();
    void consume_fixes();

    broker::Broker& broker_;
    Directory& directory_;
    GuardianConfig cfg_;
    NotifySender sender_;
    MetricsRegistry* metrics_;

    mutable std::mutex mu_;
    std::unordered_map<std::string, AlarmEvent> alarms_;
    std::unordered_map<std::string, Mission> missions_;
    std::unordered_map<UserId, std::string> open_alarm_by_subject_;
    std::unordered_map<std::string, std::string> mission_by_alarm_;
    std::unordered_map<std::string, std::set<UserId>> notified_;
    std::unordered_map<UserId, std::chrono::steady_clock::time_point> last_automatic_;

    std::atomic<bool> stop_{false};
    std::thread anomaly_thread_;
    std::thread fixes_thread_;
};

nlohmann::json to_json(const AlarmEvent& alarm);
nlohmann::json to_json(const Mission& mission);

/// Handler for the help component's sync request queue. `request` carries
/// the gateway-verified identity, an action name and an action body;
/// the reply is {"http_status": int, "body": object}. Authorization
/// decisions (who may trigger, track, respond, close) live here.
nlohmann::json dispatch_rpc(Guardian& guardian, Directory& directory,
                            const nlohmann::json& request);

}  // namespace wayguard::guardian
