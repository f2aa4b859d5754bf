#include "wayguard/broker/tcp.hpp"

#include <sys/socket.h>

#include <cerrno>
#include <cstring>

namespace wayguard::broker {

namespace wire {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(p[i]);
    return v;
}

}  // namespace

std::string encode_envelope(const Envelope& e) {
    std::string out;
    out.reserve(24 + e.payload.size());
    out.append(reinterpret_cast<const char*>(e.uuid.bytes.data()), 16);
    put_u64(out, static_cast<std::uint64_t>(e.enqueued_at.time_since_epoch().count()));
    out += e.payload;
    return out;
}

std::optional<Envelope> decode_envelope(const std::string& buf) {
    if (buf.size() < 24) return std::nullopt;
    Envelope e;
    std::memcpy(e.uuid.bytes.data(), buf.data(), 16);
    e.enqueued_at = std::chrono::steady_clock::time_point(
        std::chrono::steady_clock::duration(static_cast<std::int64_t>(get_u64(buf.data() + 16))));
    e.payload = buf.substr(24);
    return e;
}

bool write_request(int fd, Opcode op, const std::string& name, const std::string& payload) {
    if (name.size() > 0xffff) return false;
    std::string frame;
    frame.reserve(7 + name.size() + payload.size());
    put_u32(frame, static_cast<std::uint32_t>(3 + name.size() + payload.size()));
    frame.push_back(static_cast<char>(op));
    put_u16(frame, static_cast<std::uint16_t>(name.size()));
    frame += name;
    frame += payload;
    return net::write_all(fd, frame.data(), frame.size());
}

bool read_request(int fd, Opcode& op, std::string& name, std::string& payload) {
    std::uint8_t len_buf[4];
    if (!net::read_exact(fd, len_buf, 4)) return false;
    std::uint32_t len = len_buf[0] | (len_buf[1] << 8) | (len_buf[2] << 16)
                        | (static_cast<std::uint32_t>(len_buf[3]) << 24);
    if (len < 3 || len > 1u << 24) return false;
    std::string body(len, '\0');
    if (!net::read_exact(fd, body.data(), len)) return false;
    op = static_cast<Opcode>(static_cast<std::uint8_t>(body[0]));
    std::uint16_t name_len = static_cast<std::uint8_t>(body[1])
                             | (static_cast<std::uint16_t>(static_cast<std::uint8_t>(body[2])) << 8);
    if (3u + name_len > len) return false;
    name = body.substr(3, name_len);
    payload = body.substr(3 + name_len);
    return true;
}

bool write_response(int fd, RespStatus status, const std::string& payload) {
    std::string frame;
    frame.reserve(5 + payload.size());
    put_u32(frame, static_cast<std::uint32_t>(1 + payload.size()));
    frame.push_back(static_cast<char>(status));
    frame += payload;
    return net::write_all(fd, frame.data(), frame.size());
}

bool read_response(int fd, RespStatus& status, std::string& payload) {
    std::uint8_t len_buf[4];
    if (!net::read_exact(fd, len_buf, 4)) return false;
    std::uint32_t len = len_buf[0] | (len_buf[1] << 8) | (len_buf[2] << 16)
                        | (static_cast<std::uint32_t>(len_buf[3]) << 24);
    if (len < 1 || len > 1u << 24) return false;
    std::string body(len, '\0');
    if (!net::read_exact(fd, body.data(), len)) return false;
    status = static_cast<RespStatus>(static_cast<std::uint8_t>(body[0]));
    payload = body.substr(1);
    return true;
}

}  // namespace wire

namespace {

std::string encode_u32(std::uint32_t v) {
    std::string out;
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    return out;
}

std::string encode_u64(std::uint64_t v) {
    std::string out;
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// TcpBroker

class TcpBroker::Conn {
public:
    net::Socket sock;
    bool usable() const { return sock.valid(); }
};

TcpBroker::TcpBroker(std::string host, std::uint16_t port)
    : host_(std::move(host)), port_(port) {}

TcpBroker::~TcpBroker() = default;

std::unique_ptr<TcpBroker::Conn> TcpBroker::checkout() {
    {
        std::lock_guard lk(pool_mu_);
        if (!pool_.empty()) {
            auto conn = std::move(pool_.back());
            pool_.pop_back();
            return conn;
        }
    }
    auto conn = std::make_unique<Conn>();
    conn->sock = net::connect_to(host_, port_);
    return conn;
}

void TcpBroker::checkin(std::unique_ptr<Conn> conn) {
    if (!conn || !conn->usable()) return;
    std::lock_guard lk(pool_mu_);
    if (pool_.size() < 16) pool_.push_back(std::move(conn));
}

bool TcpBroker::roundtrip(wire::Opcode op, const std::string& name,
                          const std::string& payload, wire::RespStatus& status,
                          std::string& out, std::chrono::milliseconds recv_timeout) {
    auto conn = checkout();
    if (!conn->usable()) return false;
    net::set_recv_timeout(conn->sock.fd(), recv_timeout);
    bool ok = wire::write_request(conn->sock.fd(), op, name, payload)
              && wire::read_response(conn->sock.fd(), status, out);
    if (ok) {
        checkin(std::move(conn));
    }
    return ok;
}

Status TcpBroker::enqueue(const std::string& queue, Envelope e) {
    wire::RespStatus status;
    std::string out;
    if (!roundtrip(wire::ENQ, queue, wire::encode_envelope(e), status, out,
                   std::chrono::milliseconds(5000))) {
        return Status::Error;
    }
    if (status == wire::OK) return Status::Ok;
    return out == "payload too large" ? Status::PayloadTooLarge : Status::Error;
}

std::optional<Envelope> TcpBroker::dequeue(const std::string& queue,
                                           std::chrono::milliseconds wait) {
    wire::RespStatus status;
    std::string out;
    auto recv_timeout = wait + std::chrono::milliseconds(2000);
    if (!roundtrip(wire::DEQ, queue, encode_u32(static_cast<std::uint32_t>(wait.count())),
                   status, out, recv_timeout)) {
        return std::nullopt;
    }
    if (status != wire::OK) return std::nullopt;
    return wire::decode_envelope(out);
}

std::size_t TcpBroker::queue_len(const std::string& queue) {
    wire::RespStatus status;
    std::string out;
    if (!roundtrip(wire::LEN, queue, "", status, out, std::chrono::milliseconds(2000))
        || status != wire::OK || out.size() != 8) {
        return 0;
    }
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(out[i]);
    return static_cast<std::size_t>(v);
}

Status TcpBroker::publish(const std::string& topic, Envelope e) {
    wire::RespStatus status;
    std::string out;
    if (!roundtrip(wire::PUB, topic, wire::encode_envelope(e), status, out,
                   std::chrono::milliseconds(5000))) {
        return Status::Error;
    }
    return status == wire::OK ? Status::Ok : Status::Error;
}

namespace {

// Peek one byte so that an idle timeout never consumes part of a frame.
// Returns 1 when data is ready, 0 on clean timeout, -1 on close/error.
int peek_ready(int fd, std::chrono::milliseconds wait) {
    net::set_recv_timeout(fd, std::max(wait, std::chrono::milliseconds(1)));
    char b;
    ssize_t r = ::recv(fd, &b, 1, MSG_PEEK);
    if (r == 1) return 1;
    if (r < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) return 0;
    return -1;
}

}  // namespace

class TcpBroker::TcpSubscription final : public Subscription {
public:
    explicit TcpSubscription(net::Socket sock) : sock_(std::move(sock)) {}

    std::optional<Envelope> next(std::chrono::milliseconds wait) override {
        if (!sock_.valid()) return std::nullopt;
        int ready = peek_ready(sock_.fd(), wait);
        if (ready == 0) return std::nullopt;
        if (ready < 0) {
            sock_.close();
            return std::nullopt;
        }
        net::set_recv_timeout(sock_.fd(), std::chrono::milliseconds(5000));
        wire::RespStatus status;
        std::string out;
        if (!wire::read_response(sock_.fd(), status, out)) {
            sock_.close();
            return std::nullopt;
        }
        if (status != wire::OK) return std::nullopt;
        return wire::decode_envelope(out);
    }

private:
    net::Socket sock_;
};

std::unique_ptr<Subscription> TcpBroker::subscribe(const std::string& topic) {
    auto sock = net::connect_to(host_, port_);
    if (!sock.valid()) return nullptr;
    if (!wire::write_request(sock.fd(), wire::SUB, topic, "")) return nullptr;
    return std::make_unique<TcpSubscription>(std::move(sock));
}

void TcpBroker::kv_set(const std::string& key, std::string value,
                       std::chrono::milliseconds ttl) {
    wire::RespStatus status;
    std::string out;
    std::string payload = encode_u64(static_cast<std::uint64_t>(ttl.count())) + value;
    roundtrip(wire::SET, key, payload, status, out, std::chrono::milliseconds(2000));
}

std::optional<std::string> TcpBroker::kv_get(const std::string& key) {
    wire::RespStatus status;
    std::string out;
    if (!roundtrip(wire::GET, key, "", status, out, std::chrono::milliseconds(2000))
        || status != wire::OK) {
        return std::nullopt;
    }
    return out;
}

std::vector<std::string> TcpBroker::list_queues(const std::string& prefix) {
    wire::RespStatus status;
    std::string out;
    std::vector<std::string> names;
    if (!roundtrip(wire::LSQ, prefix, "", status, out, std::chrono::milliseconds(2000))
        || status != wire::OK) {
        return names;
    }
    std::size_t start = 0;
    while (start < out.size()) {
        std::size_t nl = out.find('\n', start);
        if (nl == std::string::npos) nl = out.size();
        if (nl > start) names.push_back(out.substr(start, nl - start));
        start = nl + 1;
    }
    return names;
}

// ---------------------------------------------------------------------------
// BrokerServer

BrokerServer::BrokerServer(InProcBroker& fabric) : fabric_(fabric) {}

BrokerServer::~BrokerServer() { stop(); }

bool BrokerServer::start(const std::string& host, std::uint16_t port) {
    listener_ = net::listen_on(host, port);
    if (!listener_.valid()) return false;
    port_ = net::bound_port(listener_.fd());
    accept_thread_ = std::thread([this] { accept_loop(); });
    return true;
}

void BrokerServer::stop() {
    if (stop_.exchange(true)) return;
    listener_.close();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard lk(conns_mu_);
    for (auto& t : conns_) {
        if (t.joinable()) t.join();
    }
    conns_.clear();
}

void BrokerServer::accept_loop() {
    while (!stop_.load()) {
        int fd = ::accept(listener_.fd(), nullptr, nullptr);
        if (fd < 0) {
            if (stop_.load()) break;
            continue;
        }
        net::set_nodelay(fd);
        std::lock_guard lk(conns_mu_);
        conns_.emplace_back([this, fd] { serve(fd); });
    }
}

void BrokerServer::serve(int fd) {
    net::Socket sock(fd);
    while (!stop_.load()) {
        // Idle poll keeps shutdown responsive without consuming frame bytes.
        int ready = peek_ready(fd, std::chrono::milliseconds(250));
        if (ready == 0) continue;
        if (ready < 0) break;
        net::set_recv_timeout(fd, std::chrono::milliseconds(10000));
        wire::Opcode op;
        std::string name;
        std::string payload;
        if (!wire::read_request(fd, op, name, payload)) break;
        switch (op) {
            case wire::ENQ: {
                auto env = wire::decode_envelope(payload);
                if (!env) {
                    wire::write_response(fd, wire::ERR, "bad envelope");
                    break;
                }
                Status s = fabric_.enqueue(name, std::move(*env));
                if (s == Status::Ok) {
                    wire::write_response(fd, wire::OK, "");
                } else if (s == Status::PayloadTooLarge) {
                    wire::write_response(fd, wire::ERR, "payload too large");
                } else {
                    wire::write_response(fd, wire::ERR, "shut down");
                }
                break;
            }
            case wire::DEQ: {
                std::uint32_t wait_ms = 0;
                if (payload.size() == 4) {
                    for (int i = 3; i >= 0; --i) {
                        wait_ms = (wait_ms << 8) | static_cast<std::uint8_t>(payload[i]);
                    }
                }
                auto env = fabric_.dequeue(name, std::chrono::milliseconds(wait_ms));
                if (env) {
                    wire::write_response(fd, wire::OK, wire::encode_envelope(*env));
                } else {
                    wire::write_response(fd, wire::EMPTY, "");
                }
                break;
            }
            case wire::LEN: {
                wire::write_response(fd, wire::OK,
                                     encode_u64(fabric_.queue_len(name)));
                break;
            }
            case wire::PUB: {
                auto env = wire::decode_envelope(payload);
                if (!env) {
                    wire::write_response(fd, wire::ERR, "bad envelope");
                    break;
                }
                fabric_.publish(name, std::move(*env));
                wire::write_response(fd, wire::OK, "");
                break;
            }
            case wire::SUB: {
                auto sub = fabric_.subscribe(name);
                while (!stop_.load()) {
                    auto env = sub->next(std::chrono::milliseconds(250));
                    if (!env) continue;
                    if (!wire::write_response(fd, wire::OK, wire::encode_envelope(*env))) {
                        return;  // subscriber went away
                    }
                }
                return;
            }
            case wire::SET: {
                if (payload.size() < 8) {
                    wire::write_response(fd, wire::ERR, "bad ttl");
                    break;
                }
                std::uint64_t ttl_ms = 0;
                for (int i = 7; i >= 0; --i) {
                    ttl_ms = (ttl_ms << 8) | static_cast<std::uint8_t>(payload[i]);
                }
                fabric_.kv_set(name, payload.substr(8), std::chrono::milliseconds(ttl_ms));
                wire::write_response(fd, wire::OK, "");
                break;
            }
            case wire::GET: {
                auto value = fabric_.kv_get(name);
                if (value) {
                    wire::write_response(fd, wire::OK, *value);
                } else {
                    wire::write_response(fd, wire::EMPTY, "");
                }
                break;
            }
            case wire::LSQ: {
                std::string joined;
                for (const auto& q : fabric_.list_queues(name)) {
                    joined += q;
                    joined.push_back('\n');
                }
                wire::write_response(fd, wire::OK, joined);
                break;
            }
            default:
                wire::write_response(fd, wire::ERR, "bad opcode");
                return;
        }
    }
}

}  // namespace wayguard::broker
