#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "wayguard/types.hpp"

namespace wayguard::gateway {

struct TokenClaims {
    UserId subject;
    Role role = Role::Volunteer;
    std::int64_t issued_at = 0;   // epoch seconds
    std::int64_t expires_at = 0;  // epoch seconds
};

/// Compact signed token: base64url(header).base64url(claims).base64url(mac)
/// with an HMAC-SHA256 signature over the first two parts.
std::string issue_token(const TokenClaims& claims, const std::string& secret);

/// Claims iff the signature matches and the token has not expired at
/// `now_epoch_s`.
std::optional<TokenClaims> verify_token(const std::string& token,
                                        const std::string& secret,
                                        std::int64_t now_epoch_s);

std::string base64url_encode(const std::string& in);
std::optional<std::string> base64url_decode(const std::string& in);
std::string base64_encode(const std::string& in);

std::string hmac_sha256(const std::string& key, const std::string& message);
std::string sha1(const std::string& message);

}  // namespace wayguard::gateway
