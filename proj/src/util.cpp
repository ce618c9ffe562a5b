#include "floff/util.hpp"

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace floff {

namespace {
const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

int8_t b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return int8_t(c - 'A');
  if (c >= 'a' && c <= 'z') return int8_t(c - 'a' + 26);
  if (c >= '0' && c <= '9') return int8_t(c - '0' + 52);
  if (c == '-') return 62;
  if (c == '_') return 63;
  return -1;
}
}  // namespace

std::string base64url_encode(std::span<const uint8_t> data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    uint32_t v = uint32_t(data[i]) << 16 | uint32_t(data[i + 1]) << 8 | data[i + 2];
    out.push_back(kB64[v >> 18]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out.push_back(kB64[v & 63]);
  }
  size_t rem = data.size() - i;
  if (rem == 1) {
    uint32_t v = uint32_t(data[i]) << 16;
    out.push_back(kB64[v >> 18]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rem == 2) {
    uint32_t v = uint32_t(data[i]) << 16 | uint32_t(data[i + 1]) << 8;
    out.push_back(kB64[v >> 18]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

Bytes base64url_decode(const std::string& text) {
  if (text.size() % 4 != 0)
    throw Error(Err::crypto_invalid, "base64url: length not a multiple of 4");
  if (text.empty()) return {};
  size_t pad = 0;
  if (text[text.size() - 1] == '=') pad++;
  if (pad && text[text.size() - 2] == '=') pad++;
  Bytes out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i < text.size(); i += 4) {
    bool last = i + 4 == text.size();
    size_t chars = last ? 4 - pad : 4;
    uint32_t v = 0;
    int8_t digit[4] = {0, 0, 0, 0};
    for (size_t k = 0; k < 4; k++) {
      char c = text[i + k];
      if (k < chars) {
        digit[k] = b64_value(c);
        if (digit[k] < 0) throw Error(Err::crypto_invalid, "base64url: invalid character");
      } else if (c != '=') {
        throw Error(Err::crypto_invalid, "base64url: misplaced padding");
      }
      v = v << 6 | uint32_t(k < chars ? uint8_t(digit[k]) : 0);
    }
    // canonical form: unused low bits of the final data character are zero
    if (last && pad == 2 && (digit[1] & 0x0f))
      throw Error(Err::crypto_invalid, "base64url: non-canonical padding bits");
    if (last && pad == 1 && (digit[2] & 0x03))
      throw Error(Err::crypto_invalid, "base64url: non-canonical padding bits");
    out.push_back(uint8_t(v >> 16));
    if (chars >= 3) out.push_back(uint8_t(v >> 8));
    if (chars == 4) out.push_back(uint8_t(v));
  }
  return out;
}

std::string to_hex(std::span<const uint8_t> data) {
  static const char* d = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(d[b >> 4]);
    out.push_back(d[b & 15]);
  }
  return out;
}

std::string to_hex_u64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

double now_monotonic_s() {
  auto t = std::chrono::steady_clock::now().time_since_epoch();
  return std::chrono::duration<double>(t).count();
}

int64_t now_epoch_s() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string format_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; prec++) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw Error(Err::invalid_argument, "bad number: " + s);
  return v;
}

uint64_t parse_u64(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw Error(Err::invalid_argument, "bad integer: " + s);
  return v;
}

int64_t parse_i64(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw Error(Err::invalid_argument, "bad integer: " + s);
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Err::io, "cannot open " + path);
  std::string out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw Error(Err::io, "read failed: " + path);
  return out;
}

void write_file(const std::string& path, std::span<const uint8_t> data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Err::io, "cannot create " + path);
  f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
  f.flush();
  if (!f) throw Error(Err::io, "write failed: " + path);
}

void write_file(const std::string& path, const std::string& data) {
  write_file(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(data.data()),
                                            data.size()));
}

}  // namespace floff
