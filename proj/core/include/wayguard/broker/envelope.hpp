#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>

namespace wayguard::broker {

/// Random (version 4) UUID used as the correlation id of every message.
struct Uuid {
    std::array<std::uint8_t, 16> bytes{};

    static Uuid random();
    static Uuid nil() { return Uuid{}; }

    std::string to_string() const;  // canonical 8-4-4-4-12 hex form

    bool operator==(const Uuid&) const = default;
    auto operator<=>(const Uuid&) const = default;
};

struct UuidHash {
    std::size_t operator()(const Uuid& u) const noexcept {
        std::uint64_t hi = 0;
        std::uint64_t lo = 0;
        for (int i = 0; i < 8; ++i) hi = (hi << 8) | u.bytes[i];
        for (int i = 8; i < 16; ++i) lo = (lo << 8) | u.bytes[i];
        return std::hash<std::uint64_t>{}(hi ^ (lo * 0x9e3779b97f4a7c15ULL));
    }
};

/// One broker message: correlation UUID, opaque payload bytes and the
/// enqueue time on the producing node's monotonic clock.
struct Envelope {
    Uuid uuid;
    std::string payload;
    std::chrono::steady_clock::time_point enqueued_at{};

    static Envelope make(std::string payload) {
        return Envelope{Uuid::random(), std::move(payload),
                        std::chrono::steady_clock::now()};
    }
};

}  // namespace wayguard::broker
