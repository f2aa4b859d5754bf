#include "wayguard/gateway/ws.hpp"

#include <sys/socket.h>

#include <cerrno>
#include <cstring>
#include <random>

#include "wayguard/gateway/auth.hpp"

namespace wayguard::ws {

namespace {
constexpr const char* kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::uint32_t random_mask() {
    thread_local std::mt19937 rng{std::random_device{}()};
    return rng();
}

bool send_frame(int fd, std::uint8_t opcode, std::string_view payload, bool mask) {
    std::string frame;
    frame.reserve(payload.size() + 14);
    frame.push_back(static_cast<char>(0x80 | opcode));  // FIN + opcode
    std::uint8_t mask_bit = mask ? 0x80 : 0x00;
    if (payload.size() < 126) {
        frame.push_back(static_cast<char>(mask_bit | payload.size()));
    } else if (payload.size() <= 0xffff) {
        frame.push_back(static_cast<char>(mask_bit | 126));
        frame.push_back(static_cast<char>((payload.size() >> 8) & 0xff));
        frame.push_back(static_cast<char>(payload.size() & 0xff));
    } else {
        frame.push_back(static_cast<char>(mask_bit | 127));
        for (int i = 7; i >= 0; --i) {
            frame.push_back(static_cast<char>((payload.size() >> (8 * i)) & 0xff));
        }
    }
    if (mask) {
        std::uint32_t key = random_mask();
        char key_bytes[4];
        for (int i = 0; i < 4; ++i) key_bytes[i] = static_cast<char>((key >> (8 * i)) & 0xff);
        frame.append(key_bytes, 4);
        std::size_t offset = frame.size();
        frame.resize(offset + payload.size());
        for (std::size_t i = 0; i < payload.size(); ++i) {
            frame[offset + i] = static_cast<char>(payload[i] ^ key_bytes[i % 4]);
        }
    } else {
        frame.append(payload.data(), payload.size());
    }
    return net::write_all(fd, frame.data(), frame.size());
}

}  // namespace

std::string accept_key(const std::string& client_key) {
    return gateway::base64_encode(gateway::sha1(client_key + kGuid));
}

bool complete_upgrade(int fd, const std::string& client_key) {
    std::string resp = "HTTP/1.1 101 Switching Protocols\r\n"
                       "Upgrade: websocket\r\n"
                       "Connection: Upgrade\r\n"
                       "Sec-WebSocket-Accept: " + accept_key(client_key) + "\r\n\r\n";
    return net::write_all(fd, resp.data(), resp.size());
}

bool send_text(int fd, std::string_view message, bool mask) {
    return send_frame(fd, 0x1, message, mask);
}

bool send_close(int fd, bool mask) { return send_frame(fd, 0x8, "", mask); }

bool send_pong(int fd, std::string_view payload, bool mask) {
    return send_frame(fd, 0xA, payload, mask);
}

Frame read_frame(int fd, std::chrono::milliseconds timeout) {
    // Peek first so a timeout never eats part of a frame.
    net::set_recv_timeout(fd, std::max(timeout, std::chrono::milliseconds(1)));
    char peek;
    ssize_t r = ::recv(fd, &peek, 1, MSG_PEEK);
    if (r == 0) return Frame{FrameType::Close, ""};
    if (r < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) {
            return Frame{FrameType::Timeout, ""};
        }
        return Frame{FrameType::Error, ""};
    }

    net::set_recv_timeout(fd, std::chrono::milliseconds(10000));
    std::uint8_t hdr[2];
    if (!net::read_exact(fd, hdr, 2)) return Frame{FrameType::Error, ""};
    std::uint8_t opcode = hdr[0] & 0x0f;
    bool masked = (hdr[1] & 0x80) != 0;
    std::uint64_t len = hdr[1] & 0x7f;
    if (len == 126) {
        std::uint8_t ext[2];
        if (!net::read_exact(fd, ext, 2)) return Frame{FrameType::Error, ""};
        len = (static_cast<std::uint64_t>(ext[0]) << 8) | ext[1];
    } else if (len == 127) {
        std::uint8_t ext[8];
        if (!net::read_exact(fd, ext, 8)) return Frame{FrameType::Error, ""};
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | ext[i];
    }
    if (len > (1u << 24)) return Frame{FrameType::Error, ""};

    char mask_key[4] = {0, 0, 0, 0};
    if (masked && !net::read_exact(fd, mask_key, 4)) return Frame{FrameType::Error, ""};

    std::string payload(len, '\0');
    if (len > 0 && !net::read_exact(fd, payload.data(), len)) {
        return Frame{FrameType::Error, ""};
    }
    if (masked) {
        for (std::size_t i = 0; i < payload.size(); ++i) {
            payload[i] = static_cast<char>(payload[i] ^ mask_key[i % 4]);
        }
    }

    Frame frame;
    frame.payload = std::move(payload);
    switch (opcode) {
        case 0x1: frame.type = FrameType::Text; break;
        case 0x2: frame.type = FrameType::Binary; break;
        case 0x8: frame.type = FrameType::Close; break;
        case 0x9: frame.type = FrameType::Ping; break;
        case 0xA: frame.type = FrameType::Pong; break;
        default: frame.type = FrameType::Error; break;
    }
    return frame;
}

net::Socket client_connect(const std::string& host, std::uint16_t port,
                           const std::string& target, std::chrono::milliseconds timeout) {
    net::Socket sock = net::connect_to(host, port, timeout);
    if (!sock.valid()) return {};

    std::string key_raw(16, '\0');
    std::mt19937 rng{std::random_device{}()};
    for (auto& c : key_raw) c = static_cast<char>(rng() & 0xff);
    std::string key = gateway::base64_encode(key_raw);

    std::string req = "GET " + target + " HTTP/1.1\r\n"
                      "Host: " + host + "\r\n"
                      "Upgrade: websocket\r\n"
                      "Connection: Upgrade\r\n"
                      "Sec-WebSocket-Key: " + key + "\r\n"
                      "Sec-WebSocket-Version: 13\r\n\r\n";
    if (!net::write_all(sock.fd(), req.data(), req.size())) return {};

    net::set_recv_timeout(sock.fd(), timeout);
    std::string head;
    char c;
    while (head.size() < 8192) {
        if (::recv(sock.fd(), &c, 1, 0) != 1) return {};
        head.push_back(c);
        if (head.size() >= 4 && head.compare(head.size() - 4, 4, "\r\n\r\n") == 0) break;
    }
    if (head.find("101") == std::string::npos) return {};
    if (head.find(accept_key(key)) == std::string::npos) return {};
    return sock;
}

}  // namespace wayguard::ws
