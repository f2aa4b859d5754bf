#include "wayguard/gateway/auth.hpp"

#include <openssl/hmac.h>
#include <openssl/sha.h>

#include "json.hpp"

namespace wayguard::gateway {

namespace {

constexpr char kStdAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr char kUrlAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

std::string b64(const std::string& in, const char* alphabet, bool pad) {
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= in.size()) {
        std::uint32_t v = (static_cast<std::uint8_t>(in[i]) << 16)
                          | (static_cast<std::uint8_t>(in[i + 1]) << 8)
                          | static_cast<std::uint8_t>(in[i + 2]);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
        i += 3;
    }
    std::size_t rest = in.size() - i;
    if (rest == 1) {
        std::uint32_t v = static_cast<std::uint8_t>(in[i]) << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        if (pad) out += "==";
    } else if (rest == 2) {
        std::uint32_t v = (static_cast<std::uint8_t>(in[i]) << 16)
                          | (static_cast<std::uint8_t>(in[i + 1]) << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        if (pad) out.push_back('=');
    }
    return out;
}

int url_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '-') return 62;
    if (c == '_') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(const std::string& in) { return b64(in, kStdAlphabet, true); }

std::string base64url_encode(const std::string& in) { return b64(in, kUrlAlphabet, false); }

std::optional<std::string> base64url_decode(const std::string& in) {
    std::string out;
    out.reserve(in.size() * 3 / 4);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : in) {
        int v = url_value(c);
        if (v < 0) return std::nullopt;
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

std::string hmac_sha256(const std::string& key, const std::string& message) {
    unsigned char mac[EVP_MAX_MD_SIZE];
    unsigned int mac_len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
         reinterpret_cast<const unsigned char*>(message.data()), message.size(), mac,
         &mac_len);
    return std::string(reinterpret_cast<char*>(mac), mac_len);
}

std::string sha1(const std::string& message) {
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(message.data()), message.size(), digest);
    return std::string(reinterpret_cast<char*>(digest), SHA_DIGEST_LENGTH);
}

std::string issue_token(const TokenClaims& claims, const std::string& secret) {
    nlohmann::json header{{"alg", "HS256"}, {"typ", "JWT"}};
    nlohmann::json body{
        {"sub", claims.subject},
        {"role", std::string(to_string(claims.role))},
        {"iat", claims.issued_at},
        {"exp", claims.expires_at},
    };
    std::string signing_input =
        base64url_encode(header.dump()) + "." + base64url_encode(body.dump());
    return signing_input + "." + base64url_encode(hmac_sha256(secret, signing_input));
}

std::optional<TokenClaims> verify_token(const std::string& token,
                                        const std::string& secret,
                                        std::int64_t now_epoch_s) {
    auto dot1 = token.find('.');
    if (dot1 == std::string::npos) return std::nullopt;
    auto dot2 = token.find('.', dot1 + 1);
    if (dot2 == std::string::npos) return std::nullopt;

    std::string signing_input = token.substr(0, dot2);
    auto mac = base64url_decode(token.substr(dot2 + 1));
    if (!mac) return std::nullopt;
    std::string expected = hmac_sha256(secret, signing_input);
    if (mac->size() != expected.size()) return std::nullopt;
    // Constant-time comparison.
    unsigned char diff = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        diff |= static_cast<unsigned char>((*mac)[i]) ^ static_cast<unsigned char>(expected[i]);
    }
    if (diff != 0) return std::nullopt;

    auto body_raw = base64url_decode(token.substr(dot1 + 1, dot2 - dot1 - 1));
    if (!body_raw) return std::nullopt;
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(*body_raw);
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    if (!body.contains("sub") || !body.contains("role") || !body.contains("exp")) {
        return std::nullopt;
    }
    auto role = role_from_string(body["role"].get<std::string>());
    if (!role) return std::nullopt;

    TokenClaims claims;
    claims.subject = body["sub"].get<std::string>();
    claims.role = *role;
    claims.issued_at = body.value("iat", std::int64_t{0});
    claims.expires_at = body["exp"].get<std::int64_t>();
    if (claims.expires_at < now_epoch_s) return std::nullopt;
    return claims;
}

}  // namespace wayguard::gateway
