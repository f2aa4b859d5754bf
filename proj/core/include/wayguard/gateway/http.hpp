#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wayguard/net.hpp"

namespace wayguard::gateway {

struct HttpRequest {
    std::string method;
    std::string path;                            // percent-decoded, no query
    std::map<std::string, std::string> query;    // decoded key/value pairs
    std::map<std::string, std::string> headers;  // keys lowercased
    std::string body;

    std::string header(const std::string& name) const {
        auto it = headers.find(name);
        return it == headers.end() ? std::string() : it->second;
    }
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;

    static HttpResponse json(int status, const std::string& body) {
        return HttpResponse{status, "application/json", body};
    }
    static HttpResponse text(int status, const std::string& body) {
        return HttpResponse{status, "text/plain; charset=utf-8", body};
    }
};

/// Minimal threaded HTTP/1.1 server: keep-alive, Content-Length bodies,
/// and a connection-upgrade hook so `GET /ws` can switch the socket to
/// the WebSocket protocol on the same port. Serves exactly the subset the
/// gateway needs; malformed requests close the connection with 400.
class HttpServer {
public:
    using Handler = std::function<HttpResponse(const HttpRequest&)>;
    // Takes ownership of the connection socket.
    using UpgradeHandler = std::function<void(const HttpRequest&, net::Socket)>;

    HttpServer() = default;
    ~HttpServer();

    void set_handler(Handler handler) { handler_ = std::move(handler); }
    void set_upgrade(std::string path, UpgradeHandler handler) {
        upgrade_path_ = std::move(path);
        upgrade_ = std::move(handler);
    }

    bool listen(const std::string& host, std::uint16_t port);
    void stop();
    std::uint16_t port() const { return port_; }

    static std::optional<HttpRequest> read_request(int fd);
    static bool write_response(int fd, const HttpResponse& resp, bool keep_alive);

private:
    void accept_loop();
    void serve(net::Socket sock);

    Handler handler_;
    std::string upgrade_path_;
    UpgradeHandler upgrade_;

    net::Socket listener_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stop_{false};
    std::thread accept_thread_;
    std::mutex conns_mu_;
    std::vector<std::thread> conns_;
};

std::string url_decode(const std::string& in);

}  // namespace wayguard::gateway
