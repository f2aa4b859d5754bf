#include "wayguard/broker/envelope.hpp"

#include <random>

namespace wayguard::broker {

namespace {

std::mt19937_64& thread_rng() {
    thread_local std::mt19937_64 rng = [] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd(),
                          static_cast<unsigned>(
                              std::chrono::steady_clock::now().time_since_epoch().count())};
        return std::mt19937_64(seq);
    }();
    return rng;
}

}  // namespace

Uuid Uuid::random() {
    Uuid u;
    auto& rng = thread_rng();
    std::uint64_t hi = rng();
    std::uint64_t lo = rng();
    for (int i = 0; i < 8; ++i) {
        u.bytes[i] = static_cast<std::uint8_t>(hi >> (8 * (7 - i)));
        u.bytes[8 + i] = static_cast<std::uint8_t>(lo >> (8 * (7 - i)));
    }
    u.bytes[6] = static_cast<std::uint8_t>((u.bytes[6] & 0x0f) | 0x40);  // version 4
    u.bytes[8] = static_cast<std::uint8_t>((u.bytes[8] & 0x3f) | 0x80);  // variant 1
    return u;
}

std::string Uuid::to_string() const {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(36);
    for (int i = 0; i < 16; ++i) {
        if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
        out.push_back(kHex[bytes[i] >> 4]);
        out.push_back(kHex[bytes[i] & 0x0f]);
    }
    return out;
}

}  // namespace wayguard::broker
