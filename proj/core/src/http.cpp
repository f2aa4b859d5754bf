#include "wayguard/gateway/http.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <string_view>
#include <thread>

namespace wayguard::gateway {

namespace {

constexpr std::size_t kMaxHeadBytes = 16 * 1024;
constexpr std::size_t kMaxBodyBytes = 256 * 1024;

const char* reason_phrase(int status) {
    switch (status) {
        case 200: return "OK";
        case 201: return "Created";
        case 202: return "Accepted";
        case 400: return "Bad Request";
        case 401: return "Unauthorized";
        case 403: return "Forbidden";
        case 404: return "Not Found";
        case 405: return "Method Not Allowed";
        case 408: return "Request Timeout";
        case 409: return "Conflict";
        case 500: return "Internal Server Error";
        case 503: return "Service Unavailable";
        default: return "Status";
    }
}

}  // namespace

std::string url_decode(const std::string& in) {
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == '%' && i + 2 < in.size() && std::isxdigit(in[i + 1])
            && std::isxdigit(in[i + 2])) {
            auto hex = [](char c) {
                return c <= '9' ? c - '0' : (std::tolower(c) - 'a' + 10);
            };
            out.push_back(static_cast<char>(hex(in[i + 1]) * 16 + hex(in[i + 2])));
            i += 2;
        } else if (in[i] == '+') {
            out.push_back(' ');
        } else {
            out.push_back(in[i]);
        }
    }
    return out;
}

std::optional<HttpRequest> HttpServer::read_request(int fd) {
    // Peek for the blank line, then consume exactly the head. Heads are
    // small, so this is almost always a single peek + single read.
    std::string head;
    {
        char buf[kMaxHeadBytes];
        std::size_t head_len = 0;
        while (true) {
            ssize_t r = ::recv(fd, buf, sizeof(buf), MSG_PEEK);
            if (r <= 0) return std::nullopt;
            std::string_view view(buf, static_cast<std::size_t>(r));
            auto pos = view.find("\r\n\r\n");
            if (pos != std::string_view::npos) {
                head_len = pos + 4;
                break;
            }
            if (static_cast<std::size_t>(r) >= sizeof(buf)) return std::nullopt;
            // Head split across segments; brief pause instead of spinning.
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
        head.resize(head_len);
        if (!net::read_exact(fd, head.data(), head_len)) return std::nullopt;
    }

    HttpRequest req;
    std::size_t line_end = head.find("\r\n");
    std::string request_line = head.substr(0, line_end);
    std::size_t sp1 = request_line.find(' ');
    std::size_t sp2 = request_line.rfind(' ');
    if (sp1 == std::string::npos || sp2 == sp1) return std::nullopt;
    req.method = request_line.substr(0, sp1);
    std::string target = request_line.substr(sp1 + 1, sp2 - sp1 - 1);

    std::size_t qpos = target.find('?');
    if (qpos != std::string::npos) {
        std::string qs = target.substr(qpos + 1);
        target = target.substr(0, qpos);
        std::size_t start = 0;
        while (start < qs.size()) {
            std::size_t amp = qs.find('&', start);
            if (amp == std::string::npos) amp = qs.size();
            std::string pair = qs.substr(start, amp - start);
            std::size_t eq = pair.find('=');
            if (eq == std::string::npos) {
                req.query[url_decode(pair)] = "";
            } else {
                req.query[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
            }
            start = amp + 1;
        }
    }
    req.path = url_decode(target);

    std::size_t pos = line_end + 2;
    while (pos + 2 <= head.size()) {
        std::size_t eol = head.find("\r\n", pos);
        if (eol == std::string::npos || eol == pos) break;
        std::string line = head.substr(pos, eol - pos);
        pos = eol + 2;
        std::size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string name = line.substr(0, colon);
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char ch) { return std::tolower(ch); });
        std::size_t vstart = line.find_first_not_of(' ', colon + 1);
        req.headers[name] =
            vstart == std::string::npos ? std::string() : line.substr(vstart);
    }

    auto it = req.headers.find("content-length");
    if (it != req.headers.end()) {
        std::size_t len = 0;
        try {
            len = static_cast<std::size_t>(std::stoull(it->second));
        } catch (...) {
            return std::nullopt;
        }
        if (len > kMaxBodyBytes) return std::nullopt;
        req.body.resize(len);
        if (len > 0 && !net::read_exact(fd, req.body.data(), len)) return std::nullopt;
    }
    return req;
}

bool HttpServer::write_response(int fd, const HttpResponse& resp, bool keep_alive) {
    std::string out = "HTTP/1.1 " + std::to_string(resp.status) + " "
                      + reason_phrase(resp.status) + "\r\n";
    out += "Content-Type: " + resp.content_type + "\r\n";
    out += "Content-Length: " + std::to_string(resp.body.size()) + "\r\n";
    out += keep_alive ? "Connection: keep-alive\r\n" : "Connection: close\r\n";
    out += "\r\n";
    out += resp.body;
    return net::write_all(fd, out.data(), out.size());
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, std::uint16_t port) {
    listener_ = net::listen_on(host, port, 512);
    if (!listener_.valid()) return false;
    port_ = net::bound_port(listener_.fd());
    accept_thread_ = std::thread([this] { accept_loop(); });
    return true;
}

void HttpServer::stop() {
    if (stop_.exchange(true)) return;
    listener_.close();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard lk(conns_mu_);
    for (auto& t : conns_) {
        if (t.joinable()) t.join();
    }
    conns_.clear();
}

void HttpServer::accept_loop() {
    while (!stop_.load()) {
        int fd = ::accept(listener_.fd(), nullptr, nullptr);
        if (fd < 0) {
            if (stop_.load()) break;
            continue;
        }
        net::set_nodelay(fd);
        std::lock_guard lk(conns_mu_);
        conns_.emplace_back([this, fd] { serve(net::Socket(fd)); });
    }
}

void HttpServer::serve(net::Socket sock) {
    while (!stop_.load()) {
        // Peek before committing to a request read so keep-alive idling
        // never consumes partial bytes and shutdown stays responsive.
        {
            net::set_recv_timeout(sock.fd(), std::chrono::milliseconds(500));
            char b;
            ssize_t r = ::recv(sock.fd(), &b, 1, MSG_PEEK);
            if (r == 0) break;
            if (r < 0) {
                if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
                break;
            }
        }
        net::set_recv_timeout(sock.fd(), std::chrono::milliseconds(10000));
        auto req = read_request(sock.fd());
        if (!req) break;
        if (!upgrade_path_.empty() && req->path == upgrade_path_
            && req->method == "GET") {
            upgrade_(*req, std::move(sock));
            return;
        }
        if (!handler_) {
            write_response(sock.fd(), HttpResponse::json(500, "{}"), false);
            break;
        }
        HttpResponse resp = handler_(*req);
        bool keep_alive = req->header("connection") != "close";
        if (!write_response(sock.fd(), resp, keep_alive)) break;
        if (!keep_alive) break;
    }
}

}  // namespace wayguard::gateway
