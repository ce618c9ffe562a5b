#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "floff/util.hpp"

namespace floff {

// [4-byte BE payload length][1-byte message type][payload]
enum class MsgType : uint8_t {
  Hello = 0x01,
  Welcome = 0x02,
  GlobalWeights = 0x10,
  ClientWeights = 0x11,
  DataShard = 0x20,
  Release = 0x30,
  TaskRequest = 0x40,
  TaskResult = 0x41,
  Error = 0x7F,
};

struct Message {
  MsgType type = MsgType::Error;
  Bytes payload;
};

constexpr size_t kMaxFrameBytes = 256u << 20;

class Socket {
public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void close();
  void shutdown_both();

  // deadline helpers use SO_RCVTIMEO/SO_SNDTIMEO; seconds <= 0 means block
  void set_recv_timeout(double seconds);
  void set_send_timeout(double seconds);

  void send_all(std::span<const uint8_t> data);
  // reads exactly n bytes; Err::timeout on deadline, Err::io on close
  Bytes recv_exact(size_t n);

  void send_msg(const Message& m);
  void send_msg(MsgType type, std::span<const uint8_t> payload);
  Message recv_msg();

private:
  int fd_ = -1;
};

// connect with retry until deadline (covers server start-up races)
Socket tcp_connect(const std::string& host, uint16_t port, double timeout_s = 10.0);

class Listener {
public:
  // port 0 binds an ephemeral port; bound_port() reports the real one
  Listener(const std::string& host, uint16_t port);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  uint16_t bound_port() const { return port_; }
  // Err::timeout when deadline passes, Err::io when the listener is closed
  Socket accept_one(double timeout_s);
  void close();

private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

// "host:port" split; host defaults to 127.0.0.1 when absent
std::pair<std::string, uint16_t> parse_endpoint(const std::string& s);

}  // namespace floff
