#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "floff/util.hpp"

namespace floff {

// Fernet symmetric tokens: 0x80 | 8-byte BE timestamp | 16-byte IV |
// AES-128-CBC/PKCS7 ciphertext | HMAC-SHA256 tag over everything before it.
// Keys are 32 bytes (16 signing + 16 encryption), base64url, 44 characters.

std::string fernet_generate_key();
void fernet_validate_key(const std::string& key44);

// random IV, current time
std::string fernet_encrypt(const std::string& key44, std::span<const uint8_t> plaintext);
// fixed IV and timestamp, for reproducing known tokens
std::string fernet_encrypt_at(const std::string& key44, std::span<const uint8_t> plaintext,
                              int64_t timestamp, const uint8_t iv[16]);

// ttl: when set, tokens older than ttl seconds raise Err::crypto_expired;
// timestamps more than 60 s in the future are rejected as invalid.
// now_override is for tests.
Bytes fernet_decrypt(const std::string& key44, const std::string& token,
                     std::optional<int64_t> ttl = std::nullopt,
                     std::optional<int64_t> now_override = std::nullopt);

int64_t fernet_token_timestamp(const std::string& token);

// seconds for one encrypt+decrypt of a payload of the given size (best of reps)
double measure_crypto_time(const std::string& key44, size_t payload_bytes, int reps = 3);

constexpr int64_t kFernetMaxClockSkewS = 60;

}  // namespace floff
