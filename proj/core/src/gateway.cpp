#include "wayguard/gateway/gateway.hpp"

#include "wayguard/gateway/ws.hpp"
#include "wayguard/validate.hpp"

namespace wayguard::gateway {

namespace {

std::int64_t now_epoch_s() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

HttpResponse error_response(int status, const std::string& message) {
    return HttpResponse::json(status, nlohmann::json{{"error", message}}.dump());
}

}  // namespace

Gateway::Gateway(broker::Broker& broker, guardian::Directory& directory,
                 GatewayConfig cfg, MetricsRegistry* metrics)
    : broker_(broker), directory_(directory), cfg_(std::move(cfg)), metrics_(metrics),
      channels_(cfg_.notify, metrics) {
    stage_ = std::make_unique<scaler::ModeledStage>(
        "gateway", cfg_.scaling, cfg_.capacity_units_per_second, metrics_);
}

Gateway::~Gateway() { stop(); }

bool Gateway::start() {
    stage_->start();
    server_.set_handler([this](const HttpRequest& req) { return route(req); });
    server_.set_upgrade("/ws", [this](const HttpRequest& req, net::Socket sock) {
        handle_ws_upgrade(req, std::move(sock));
    });
    if (!server_.listen(cfg_.host, cfg_.port)) return false;
    notify_thread_ = std::thread([this] { notify_consumer(); });
    return true;
}

void Gateway::stop() {
    if (stop_.exchange(true)) return;
    server_.stop();
    if (notify_thread_.joinable()) notify_thread_.join();
    channels_.close_all();
    stage_->stop();
}

void Gateway::notify_consumer() {
    auto sub = broker_.subscribe(cfg_.notify_topic);
    while (!stop_.load()) {
        auto env = sub->next(std::chrono::milliseconds(200));
        if (!env) continue;
        try {
            auto doc = nlohmann::json::parse(env->payload);
            push_notification(doc.at("user").get<std::string>(),
                              doc.at("message").dump());
        } catch (const nlohmann::json::exception&) {
            if (metrics_) metrics_->inc("gateway.notify_malformed");
        }
    }
}

PushOutcome Gateway::push_notification(const UserId& user, const std::string& message) {
    return channels_.push(user, message);
}

std::optional<TokenClaims> Gateway::authenticate(const HttpRequest& req) const {
    std::string token;
    std::string auth = req.header("authorization");
    if (auth.rfind("Bearer ", 0) == 0) {
        token = auth.substr(7);
    } else if (auto it = req.query.find("token"); it != req.query.end()) {
        token = it->second;
    }
    if (token.empty()) return std::nullopt;
    return verify_token(token, cfg_.secret, now_epoch_s());
}

HttpResponse Gateway::route(const HttpRequest& req) {
    if (metrics_) metrics_->inc("gateway.requests");
    const auto deadline = std::chrono::steady_clock::now() + cfg_.request_budget;

    if (req.method == "GET" && req.path == "/metrics") {
        return HttpResponse::text(200, metrics_ ? metrics_->render() : "");
    }
    if (req.method == "POST" && req.path == "/auth/login") {
        if (!stage_->run(cfg_.work_units_per_request)) {
            return error_response(503, "shutting down");
        }
        return handle_login(req);
    }

    // Everything else is authenticated exactly once, here.
    auto identity = authenticate(req);
    if (!identity) {
        if (metrics_) metrics_->inc("gateway.responses_401");
        return error_response(401, "invalid or missing token");
    }

    if (!stage_->run(cfg_.work_units_per_request)) {
        return error_response(503, "shutting down");
    }
    if (std::chrono::steady_clock::now() >= deadline) {
        if (metrics_) metrics_->inc("gateway.responses_408");
        return error_response(408, "request budget exceeded");
    }

    if (req.method == "POST" && req.path == "/locations") {
        return handle_locations(req, *identity, deadline);
    }

    nlohmann::json identity_json{
        {"user", identity->subject},
        {"role", std::string(to_string(identity->role))},
    };

    if (req.method == "POST" && req.path == "/alarms") {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            return error_response(400, "malformed JSON body");
        }
        return guardian_rpc(
            nlohmann::json{
                {"identity", identity_json}, {"action", "trigger_alarm"}, {"body", body}},
            deadline);
    }

    // POST /alarms/{id}/respond
    if (req.method == "POST" && req.path.rfind("/alarms/", 0) == 0
        && req.path.size() > 8 && req.path.find("/respond", 8) != std::string::npos
        && req.path.compare(req.path.size() - 8, 8, "/respond") == 0) {
        std::string alarm_id = req.path.substr(8, req.path.size() - 8 - 8);
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            return error_response(400, "malformed JSON body");
        }
        body["alarm_id"] = alarm_id;
        return guardian_rpc(
            nlohmann::json{
                {"identity", identity_json}, {"action", "respond"}, {"body", body}},
            deadline);
    }

    // POST /missions/{id}/close
    if (req.method == "POST" && req.path.rfind("/missions/", 0) == 0
        && req.path.size() > 10 && req.path.compare(req.path.size() - 6, 6, "/close") == 0) {
        std::string mission_id = req.path.substr(10, req.path.size() - 10 - 6);
        nlohmann::json body = nlohmann::json::object();
        if (!req.body.empty()) {
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                return error_response(400, "malformed JSON body");
            }
        }
        body["mission_id"] = mission_id;
        return guardian_rpc(
            nlohmann::json{
                {"identity", identity_json}, {"action", "close_mission"}, {"body", body}},
            deadline);
    }

    // GET /users/{id}/location
    if (req.method == "GET" && req.path.rfind("/users/", 0) == 0
        && req.path.size() > 7 && req.path.compare(req.path.size() - 9, 9, "/location") == 0) {
        std::string user_id = req.path.substr(7, req.path.size() - 7 - 9);
        return guardian_rpc(nlohmann::json{{"identity", identity_json},
                                           {"action", "get_location"},
                                           {"body", {{"user_id", user_id}}}},
                            deadline);
    }

    if (metrics_) metrics_->inc("gateway.responses_404");
    return error_response(404, "unknown route");
}

HttpResponse Gateway::handle_login(const HttpRequest& req) {
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
        return error_response(400, "malformed JSON body");
    }
    if (!body.contains("user_id") || !body["user_id"].is_string()) {
        return error_response(400, "user_id required");
    }
    UserId user = body["user_id"].get<std::string>();
    if (user.empty()) return error_response(400, "user_id must be non-empty");

    Role role = Role::Volunteer;
    if (body.contains("role")) {
        auto parsed = role_from_string(body["role"].get<std::string>());
        if (!parsed) return error_response(400, "unknown role");
        role = *parsed;
    }

    auto existing = directory_.get(user);
    if (existing) {
        if (body.contains("role") && existing->role != role) {
            return error_response(409, "role does not match registration");
        }
        role = existing->role;
    } else {
        UserProfile profile;
        profile.user = user;
        profile.role = role;
        profile.available = true;
        directory_.put(std::move(profile));
        if (metrics_) metrics_->inc("gateway.registrations");
    }

    TokenClaims claims;
    claims.subject = user;
    claims.role = role;
    claims.issued_at = now_epoch_s();
    claims.expires_at = claims.issued_at + cfg_.token_ttl.count();
    std::string token = issue_token(claims, cfg_.secret);
    if (metrics_) metrics_->inc("gateway.logins");
    return HttpResponse::json(200, nlohmann::json{
                                       {"token", token},
                                       {"user_id", user},
                                       {"role", std::string(to_string(role))},
                                       {"expires_at", claims.expires_at},
                                   }
                                       .dump());
}

HttpResponse Gateway::handle_locations(const HttpRequest& req,
                                       const TokenClaims& identity,
                                       std::chrono::steady_clock::time_point deadline) {
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
        return error_response(400, "malformed JSON body");
    }
    auto fix = fix_from_json(body);
    if (!fix) return error_response(400, "malformed location fix");
    if (fix->user != identity.subject) {
        return error_response(403, "fix user does not match token subject");
    }
    if (auto bad = validate_fix(*fix)) {
        return HttpResponse::json(
            400, nlohmann::json{{"error", "invalid fix"}, {"field", *bad}}.dump());
    }

    nlohmann::json payload{
        {"identity",
         {{"user", identity.subject}, {"role", std::string(to_string(identity.role))}}},
        {"fix", to_json(*fix)},
    };
    broker::SyncCallOptions opts = cfg_.sync;
    opts.deadline = deadline;
    auto result = broker::sync_call(broker_, cfg_.ingest_queue, payload.dump(),
                                    nlohmann::json{{"status", "unavailable"}}.dump(), opts);
    if (std::chrono::steady_clock::now() >= deadline) {
        if (metrics_) metrics_->inc("gateway.responses_408");
        return error_response(408, "request budget exceeded");
    }
    if (!result.ok) {
        if (metrics_) metrics_->inc("gateway.responses_503");
        return HttpResponse::json(503, result.payload);
    }
    try {
        auto doc = nlohmann::json::parse(result.payload);
        if (doc.value("status", "") == "accepted") {
            if (metrics_) metrics_->inc("gateway.locations_accepted");
            return HttpResponse::json(202, result.payload);
        }
        return HttpResponse::json(400, result.payload);
    } catch (const nlohmann::json::exception&) {
        return error_response(500, "bad downstream payload");
    }
}

HttpResponse Gateway::guardian_rpc(const nlohmann::json& request,
                                   std::chrono::steady_clock::time_point deadline) {
    broker::SyncCallOptions opts = cfg_.sync;
    opts.deadline = deadline;
    auto result = broker::sync_call(
        broker_, cfg_.guardian_queue, request.dump(),
        nlohmann::json{{"error", "help service unavailable"}}.dump(), opts);
    if (std::chrono::steady_clock::now() >= deadline) {
        if (metrics_) metrics_->inc("gateway.responses_408");
        return error_response(408, "request budget exceeded");
    }
    if (!result.ok) {
        if (metrics_) metrics_->inc("gateway.responses_503");
        return HttpResponse::json(503, result.payload);
    }
    try {
        auto doc = nlohmann::json::parse(result.payload);
        int status = doc.value("http_status", 500);
        std::string body = doc.contains("body") ? doc["body"].dump() : "{}";
        return HttpResponse::json(status, body);
    } catch (const nlohmann::json::exception&) {
        return error_response(500, "bad downstream payload");
    }
}

void Gateway::handle_ws_upgrade(const HttpRequest& req, net::Socket sock) {
    auto identity = authenticate(req);
    if (!identity) {
        HttpServer::write_response(sock.fd(),
                                   error_response(401, "invalid or missing token"), false);
        return;
    }
    std::string key = req.header("sec-websocket-key");
    if (key.empty() || req.header("upgrade").find("websocket") == std::string::npos) {
        HttpServer::write_response(sock.fd(), error_response(400, "not a websocket upgrade"),
                                   false);
        return;
    }
    if (!ws::complete_upgrade(sock.fd(), key)) return;
    if (metrics_) metrics_->inc("gateway.ws_connections");
    channels_.attach(identity->subject, std::move(sock));
}

}  // namespace wayguard::gateway
