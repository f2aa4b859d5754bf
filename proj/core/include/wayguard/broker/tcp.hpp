#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "wayguard/broker/broker.hpp"
#include "wayguard/broker/inproc.hpp"
#include "wayguard/net.hpp"

namespace wayguard::broker {

// Wire protocol for multi-process deployments. Requests are framed as
//
//   u32 length | u8 opcode | u16 name_len | name | payload
//
// where `length` counts everything after itself and integers are
// little-endian. Responses are framed as
//
//   u32 length | u8 status | payload
//
// with status 0 = ok, 1 = empty/absent, 2 = error. Envelope payloads are
// encoded as 16 uuid bytes, u64 enqueue nanos, then the body. A SUB
// request turns the connection into a one-way stream of envelope frames.
namespace wire {
enum Opcode : std::uint8_t {
    ENQ = 1,
    DEQ = 2,
    LEN = 3,
    PUB = 4,
    SUB = 5,
    SET = 6,
    GET = 7,
    LSQ = 8,  // list queues by prefix (extension)
};

enum RespStatus : std::uint8_t {
    OK = 0,
    EMPTY = 1,
    ERR = 2,
};

std::string encode_envelope(const Envelope& e);
std::optional<Envelope> decode_envelope(const std::string& buf);

bool write_request(int fd, Opcode op, const std::string& name, const std::string& payload);
bool read_request(int fd, Opcode& op, std::string& name, std::string& payload);
bool write_response(int fd, RespStatus status, const std::string& payload);
bool read_response(int fd, RespStatus& status, std::string& payload);
}  // namespace wire

/// Broker client speaking the frame protocol against a BrokerServer.
/// Connections are pooled; each subscription holds its own connection.
class TcpBroker final : public Broker {
public:
    TcpBroker(std::string host, std::uint16_t port);
    ~TcpBroker() override;

    Status enqueue(const std::string& queue, Envelope e) override;
    std::optional<Envelope> dequeue(const std::string& queue,
                                    std::chrono::milliseconds wait) override;
    std::size_t queue_len(const std::string& queue) override;
    Status publish(const std::string& topic, Envelope e) override;
    std::unique_ptr<Subscription> subscribe(const std::string& topic) override;
    void kv_set(const std::string& key, std::string value,
                std::chrono::milliseconds ttl) override;
    std::optional<std::string> kv_get(const std::string& key) override;
    std::vector<std::string> list_queues(const std::string& prefix) override;

private:
    class Conn;
    class TcpSubscription;

    std::unique_ptr<Conn> checkout();
    void checkin(std::unique_ptr<Conn> conn);
    bool roundtrip(wire::Opcode op, const std::string& name, const std::string& payload,
                   wire::RespStatus& status, std::string& out,
                   std::chrono::milliseconds recv_timeout);

    std::string host_;
    std::uint16_t port_;
    std::mutex pool_mu_;
    std::vector<std::unique_ptr<Conn>> pool_;
};

/// Serves the frame protocol on top of an in-process fabric. One thread
/// per connection; a SUB request upgrades the connection to a push stream.
class BrokerServer {
public:
    explicit BrokerServer(InProcBroker& fabric);
    ~BrokerServer();

    bool start(const std::string& host, std::uint16_t port);
    void stop();
    std::uint16_t port() const { return port_; }

private:
    void accept_loop();
    void serve(int fd);

    InProcBroker& fabric_;
    net::Socket listener_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stop_{false};
    std::thread accept_thread_;
    std::mutex conns_mu_;
    std::vector<std::thread> conns_;
};

}  // namespace wayguard::broker
