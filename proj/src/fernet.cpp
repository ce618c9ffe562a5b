#include "floff/fernet.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <memory>

namespace floff {

namespace {

constexpr size_t kKeyBytes = 32;
constexpr size_t kIvBytes = 16;
constexpr size_t kTagBytes = 32;
constexpr size_t kHeaderBytes = 1 + 8 + kIvBytes;
constexpr uint8_t kVersion = 0x80;

Bytes decode_key(const std::string& key44) {
  Bytes key;
  try {
    key = base64url_decode(key44);
  } catch (const Error&) {
    throw Error(Err::crypto_invalid, "fernet: key is not valid base64url");
  }
  if (key.size() != kKeyBytes) throw Error(Err::crypto_invalid, "fernet: key must be 32 bytes");
  return key;
}

struct CipherCtx {
  EVP_CIPHER_CTX* p = EVP_CIPHER_CTX_new();
  ~CipherCtx() { EVP_CIPHER_CTX_free(p); }
};

Bytes aes128cbc(bool enc, const uint8_t* key, const uint8_t* iv, std::span<const uint8_t> in) {
  CipherCtx ctx;
  if (!ctx.p) throw Error(Err::runtime, "fernet: EVP context allocation failed");
  if (EVP_CipherInit_ex(ctx.p, EVP_aes_128_cbc(), nullptr, key, iv, enc ? 1 : 0) != 1)
    throw Error(Err::runtime, "fernet: cipher init failed");
  Bytes out(in.size() + kIvBytes);
  int n1 = 0, n2 = 0;
  if (EVP_CipherUpdate(ctx.p, out.data(), &n1, in.data(), int(in.size())) != 1)
    throw Error(Err::crypto_invalid, "fernet: cipher update failed");
  if (EVP_CipherFinal_ex(ctx.p, out.data() + n1, &n2) != 1)
    throw Error(Err::crypto_invalid, "fernet: padding check failed");
  out.resize(size_t(n1) + size_t(n2));
  return out;
}

Bytes hmac_sha256(const uint8_t* key, std::span<const uint8_t> data) {
  Bytes tag(kTagBytes);
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key, int(16), data.data(), data.size(), tag.data(), &len) ||
      len != kTagBytes)
    throw Error(Err::runtime, "fernet: hmac failed");
  return tag;
}

}  // namespace

std::string fernet_generate_key() {
  uint8_t key[kKeyBytes];
  if (RAND_bytes(key, sizeof(key)) != 1) throw Error(Err::runtime, "fernet: RAND_bytes failed");
  return base64url_encode(std::span<const uint8_t>(key, sizeof(key)));
}

void fernet_validate_key(const std::string& key44) { decode_key(key44); }

std::string fernet_encrypt_at(const std::string& key44, std::span<const uint8_t> plaintext,
                              int64_t timestamp, const uint8_t iv[16]) {
  Bytes key = decode_key(key44);
  const uint8_t* sign_key = key.data();
  const uint8_t* enc_key = key.data() + 16;

  Bytes ct = aes128cbc(true, enc_key, iv, plaintext);
  ByteWriter w;
  w.u8(kVersion);
  w.u64be(uint64_t(timestamp));
  w.raw(std::span<const uint8_t>(iv, kIvBytes));
  w.raw(ct);
  Bytes body = w.take();
  Bytes tag = hmac_sha256(sign_key, body);
  body.insert(body.end(), tag.begin(), tag.end());
  OPENSSL_cleanse(key.data(), key.size());
  return base64url_encode(body);
}

std::string fernet_encrypt(const std::string& key44, std::span<const uint8_t> plaintext) {
  uint8_t iv[kIvBytes];
  if (RAND_bytes(iv, sizeof(iv)) != 1) throw Error(Err::runtime, "fernet: RAND_bytes failed");
  return fernet_encrypt_at(key44, plaintext, now_epoch_s(), iv);
}

int64_t fernet_token_timestamp(const std::string& token) {
  Bytes raw = base64url_decode(token);
  if (raw.size() < kHeaderBytes + kTagBytes) throw Error(Err::crypto_invalid, "fernet: token too short");
  uint64_t ts = 0;
  for (int i = 1; i <= 8; i++) ts = ts << 8 | raw[size_t(i)];
  return int64_t(ts);
}

Bytes fernet_decrypt(const std::string& key44, const std::string& token,
                     std::optional<int64_t> ttl, std::optional<int64_t> now_override) {
  Bytes key = decode_key(key44);
  Bytes raw;
  try {
    raw = base64url_decode(token);
  } catch (const Error&) {
    throw Error(Err::crypto_invalid, "fernet: token is not canonical base64url");
  }
  if (raw.size() < kHeaderBytes + kTagBytes + 16)
    throw Error(Err::crypto_invalid, "fernet: token too short");
  size_t ct_len = raw.size() - kHeaderBytes - kTagBytes;
  if (ct_len % 16 != 0) throw Error(Err::crypto_invalid, "fernet: ciphertext length not a block multiple");
  if (raw[0] != kVersion) throw Error(Err::crypto_invalid, "fernet: unknown token version");

  // authenticate before touching the ciphertext
  std::span<const uint8_t> body(raw.data(), raw.size() - kTagBytes);
  Bytes expect = hmac_sha256(key.data(), body);
  if (CRYPTO_memcmp(expect.data(), raw.data() + body.size(), kTagBytes) != 0)
    throw Error(Err::crypto_invalid, "fernet: signature mismatch");

  uint64_t ts_u = 0;
  for (int i = 1; i <= 8; i++) ts_u = ts_u << 8 | raw[size_t(i)];
  int64_t ts = int64_t(ts_u);
  int64_t now = now_override.value_or(now_epoch_s());
  if (ttl.has_value()) {
    if (ts + *ttl < now) throw Error(Err::crypto_expired, "fernet: token expired");
    if (ts > now + kFernetMaxClockSkewS)
      throw Error(Err::crypto_invalid, "fernet: token timestamp is in the future");
  }

  const uint8_t* iv = raw.data() + 9;
  std::span<const uint8_t> ct(raw.data() + kHeaderBytes, ct_len);
  Bytes pt = aes128cbc(false, key.data() + 16, iv, ct);
  OPENSSL_cleanse(key.data(), key.size());
  return pt;
}

double measure_crypto_time(const std::string& key44, size_t payload_bytes, int reps) {
  fernet_validate_key(key44);
  Bytes payload(payload_bytes);
  Rng rng(payload_bytes + 1);
  for (auto& b : payload) b = uint8_t(rng.u64());
  double best = 0;
  for (int r = 0; r < std::max(reps, 1); r++) {
    double t0 = now_monotonic_s();
    std::string tok = fernet_encrypt(key44, payload);
    Bytes back = fernet_decrypt(key44, tok);
    double dt = now_monotonic_s() - t0;
    if (back.size() != payload.size()) throw Error(Err::runtime, "crypto roundtrip mismatch");
    if (r == 0 || dt < best) best = dt;
  }
  return best;
}

}  // namespace floff
