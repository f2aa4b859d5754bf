#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace wayguard::net {

/// Owning socket fd with close-on-destroy.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { close(); }

    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release() {
        int fd = fd_;
        fd_ = -1;
        return fd;
    }
    void close();

private:
    int fd_ = -1;
};

/// Listening TCP socket bound to host:port (port 0 picks an ephemeral
/// port; bound_port() reports the actual one). Returns invalid on error.
Socket listen_on(const std::string& host, std::uint16_t port, int backlog = 128);
std::uint16_t bound_port(int fd);

Socket connect_to(const std::string& host, std::uint16_t port,
                  std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

bool set_recv_timeout(int fd, std::chrono::milliseconds timeout);
void set_nodelay(int fd);

/// Reads exactly n bytes; false on EOF/error/timeout.
bool read_exact(int fd, void* buf, std::size_t n);
/// Writes all n bytes; false on error.
bool write_all(int fd, const void* buf, std::size_t n);

/// Raises the process fd soft limit toward the hard limit. Call once in
/// binaries that hold many concurrent connections.
void raise_nofile_limit(std::uint64_t want = 65536);

}  // namespace wayguard::net
