#include "floff/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

namespace floff {

namespace {
void set_timeout(int fd, int which, double seconds) {
  timeval tv{};
  if (seconds > 0) {
    tv.tv_sec = time_t(seconds);
    tv.tv_usec = suseconds_t((seconds - double(tv.tv_sec)) * 1e6);
  }
  setsockopt(fd, SOL_SOCKET, which, &tv, sizeof(tv));
}

sockaddr_in make_addr(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw Error(Err::invalid_argument, "bad IPv4 address: " + host);
  return addr;
}
}  // namespace

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown_both() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::set_recv_timeout(double seconds) { set_timeout(fd_, SO_RCVTIMEO, seconds); }
void Socket::set_send_timeout(double seconds) { set_timeout(fd_, SO_SNDTIMEO, seconds); }

void Socket::send_all(std::span<const uint8_t> data) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw Error(Err::timeout, "send timed out");
      throw Error(Err::io, std::string("send failed: ") + std::strerror(errno));
    }
    off += size_t(n);
  }
}

Bytes Socket::recv_exact(size_t n) {
  Bytes out(n);
  size_t off = 0;
  while (off < n) {
    ssize_t r = ::recv(fd_, out.data() + off, n - off, 0);
    if (r == 0) throw Error(Err::io, "connection closed");
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw Error(Err::timeout, "recv timed out");
      throw Error(Err::io, std::string("recv failed: ") + std::strerror(errno));
    }
    off += size_t(r);
  }
  return out;
}

void Socket::send_msg(const Message& m) {
  send_msg(m.type, m.payload);
}

void Socket::send_msg(MsgType type, std::span<const uint8_t> payload) {
  if (payload.size() > kMaxFrameBytes) throw Error(Err::protocol, "frame too large");
  Bytes frame;
  frame.reserve(5 + payload.size());
  uint32_t len = uint32_t(payload.size());
  for (int i = 3; i >= 0; i--) frame.push_back(uint8_t(len >> (8 * i)));
  frame.push_back(uint8_t(type));
  frame.insert(frame.end(), payload.begin(), payload.end());
  send_all(frame);
}

Message Socket::recv_msg() {
  Bytes head = recv_exact(5);
  uint32_t len = uint32_t(head[0]) << 24 | uint32_t(head[1]) << 16 | uint32_t(head[2]) << 8 |
                 uint32_t(head[3]);
  if (len > kMaxFrameBytes) throw Error(Err::protocol, "frame length out of range");
  Message m;
  m.type = MsgType(head[4]);
  m.payload = recv_exact(len);
  return m;
}

Socket tcp_connect(const std::string& host, uint16_t port, double timeout_s) {
  if (port == 0) throw Error(Err::invalid_argument, "cannot connect to port 0");
  sockaddr_in addr = make_addr(host, port);
  double deadline = now_monotonic_s() + timeout_s;
  for (;;) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(Err::io, "socket() failed");
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    ::close(fd);
    if (now_monotonic_s() >= deadline)
      throw Error(Err::timeout, "connect to " + host + ":" + std::to_string(port) + " timed out");
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

Listener::Listener(const std::string& host, uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error(Err::io, "socket() failed");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    throw Error(Err::io, "bind to " + host + ":" + std::to_string(port) + " failed: " +
                             std::strerror(errno));
  }
  if (::listen(fd_, 64) != 0) {
    ::close(fd_);
    throw Error(Err::io, "listen failed");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

Socket Listener::accept_one(double timeout_s) {
  if (fd_ < 0) throw Error(Err::io, "listener closed");
  set_timeout(fd_, SO_RCVTIMEO, timeout_s);
  for (;;) {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) {
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) throw Error(Err::timeout, "accept timed out");
    throw Error(Err::io, std::string("accept failed: ") + std::strerror(errno));
  }
}

std::pair<std::string, uint16_t> parse_endpoint(const std::string& s) {
  auto pos = s.rfind(':');
  std::string host = pos == std::string::npos ? std::string("127.0.0.1") : s.substr(0, pos);
  std::string port_s = pos == std::string::npos ? s : s.substr(pos + 1);
  if (host.empty()) host = "127.0.0.1";
  // port 0 is allowed: listeners treat it as "pick an ephemeral port"
  uint64_t port = parse_u64(port_s);
  if (port > 65535) throw Error(Err::invalid_argument, "bad port: " + port_s);
  return {host, uint16_t(port)};
}

}  // namespace floff
