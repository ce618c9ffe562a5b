#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace floff {

enum class Err {
  invalid_argument,
  io,
  protocol,
  crypto_invalid,
  crypto_expired,
  timeout,
  diverged,
  runtime,
};

class Error : public std::runtime_error {
public:
  Error(Err code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Err code() const { return code_; }

private:
  Err code_;
};

using Bytes = std::vector<uint8_t>;

// 64-bit FNV-1a, used for weight checksums and task result digests.
inline uint64_t fnv1a64(std::span<const uint8_t> data, uint64_t h = 0xcbf29ce484222325ull) {
  for (uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64_str(const std::string& s) {
  return fnv1a64(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

// Mixes a base seed with stream tags so derived streams are independent.
inline uint64_t derive_seed(uint64_t base, uint64_t tag_a, uint64_t tag_b = 0) {
  uint8_t buf[24];
  for (int i = 0; i < 8; i++) buf[i] = uint8_t(base >> (56 - 8 * i));
  for (int i = 0; i < 8; i++) buf[8 + i] = uint8_t(tag_a >> (56 - 8 * i));
  for (int i = 0; i < 8; i++) buf[16 + i] = uint8_t(tag_b >> (56 - 8 * i));
  return fnv1a64(std::span<const uint8_t>(buf, sizeof(buf)));
}

// Deterministic RNG. The mt19937_64 engine output is pinned by the standard;
// all derived values are computed here because the std::*_distribution
// adapters are implementation-defined and would break reproducibility.
class Rng {
public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // uniform in [0,1) with 53-bit resolution
  double uniform01() { return double(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) { return n ? u64() % n : 0; }

  double normal(double mean, double sd) {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return mean + sd * v;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    return mean + sd * (r * std::cos(a));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; i--) {
      size_t j = size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 eng_;
  std::optional<double> spare_;
};

// Bounds-checked big-endian readers/writers for wire payloads.
class ByteWriter {
public:
  Bytes take() { return std::move(buf_); }
  const Bytes& data() const { return buf_; }
  size_t size() const { return buf_.size(); }

  void u8(uint8_t v) { buf_.push_back(v); }
  void u16be(uint16_t v) {
    buf_.push_back(uint8_t(v >> 8));
    buf_.push_back(uint8_t(v));
  }
  void u32be(uint32_t v) {
    for (int i = 3; i >= 0; i--) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void u64be(uint64_t v) {
    for (int i = 7; i >= 0; i--) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void i64be(int64_t v) { u64be(uint64_t(v)); }
  void f32le(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; i++) buf_.push_back(uint8_t(bits >> (8 * i)));
  }
  void raw(std::span<const uint8_t> s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void str(const std::string& s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

private:
  Bytes buf_;
};

class ByteReader {
public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint16_t u16be() {
    need(2);
    uint16_t v = uint16_t(data_[pos_]) << 8 | data_[pos_ + 1];
    pos_ += 2;
    return v;
  }
  uint32_t u32be() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; i++) v = v << 8 | data_[pos_ + i];
    pos_ += 4;
    return v;
  }
  uint64_t u64be() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v = v << 8 | data_[pos_ + i];
    pos_ += 8;
    return v;
  }
  int64_t i64be() { return int64_t(u64be()); }
  float f32le() {
    need(4);
    uint32_t bits = 0;
    for (int i = 3; i >= 0; i--) bits = bits << 8 | data_[pos_ + i];
    pos_ += 4;
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  Bytes raw(size_t n) {
    need(n);
    Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  std::string str(size_t n) {
    need(n);
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return out;
  }

private:
  void need(size_t n) const {
    if (pos_ + n > data_.size()) throw Error(Err::protocol, "truncated payload");
  }
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

// Strict canonical base64url with padding; rejects any non-canonical input
// so a single-bit change of encoded text never decodes to the same bytes.
std::string base64url_encode(std::span<const uint8_t> data);
Bytes base64url_decode(const std::string& text);

std::string to_hex(std::span<const uint8_t> data);
std::string to_hex_u64(uint64_t v);

double now_monotonic_s();
int64_t now_epoch_s();

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s);
uint64_t parse_u64(const std::string& s);
int64_t parse_i64(const std::string& s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> data);
void write_file(const std::string& path, const std::string& data);

}  // namespace floff
