#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "wayguard/net.hpp"

namespace wayguard::ws {

enum class FrameType { Text, Binary, Ping, Pong, Close, Error, Timeout };

struct Frame {
    FrameType type = FrameType::Error;
    std::string payload;
};

/// Sec-WebSocket-Accept value for a client key.
std::string accept_key(const std::string& client_key);

/// Server side: completes the 101 upgrade on a socket whose upgrade
/// request headers were already parsed.
bool complete_upgrade(int fd, const std::string& client_key);

/// Single frame write. Servers send unmasked, clients masked.
bool send_text(int fd, std::string_view message, bool mask);
bool send_close(int fd, bool mask);
bool send_pong(int fd, std::string_view payload, bool mask);

/// Blocking frame read with timeout (Timeout type on idle). Control
/// frames are returned to the caller; masking is undone.
Frame read_frame(int fd, std::chrono::milliseconds timeout);

/// Client side: opens a socket and performs the upgrade handshake.
/// `target` is the request path including any query string.
net::Socket client_connect(const std::string& host, std::uint16_t port,
                           const std::string& target,
                           std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

}  // namespace wayguard::ws
