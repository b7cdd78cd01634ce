#include "voxstream/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace voxstream {

namespace {

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host.empty() ? "0.0.0.0" : ep.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    throw TransportError("cannot resolve host " + host);
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw TransportError("address must be host:port, got '" + text + "'");
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw TransportError("invalid port in '" + text + "'");
  }
  return ep;
}

TcpConnection::~TcpConnection() { close(); }

TcpConnection::TcpConnection(TcpConnection&& other) noexcept
    : fd_(other.fd_), decoder_(std::move(other.decoder_)), bytes_received_(other.bytes_received_) {
  other.fd_ = -1;
}

TcpConnection& TcpConnection::operator=(TcpConnection&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    decoder_ = std::move(other.decoder_);
    bytes_received_ = other.bytes_received_;
    other.fd_ = -1;
  }
  return *this;
}

TcpConnection TcpConnection::connect(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(sys_error("socket"));
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string msg = sys_error("connect to " + ep.str());
    ::close(fd);
    throw TransportError(msg);
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return TcpConnection(fd);
}

std::size_t TcpConnection::send(const protocol::Message& m) {
  if (fd_ < 0) throw TransportError("send on closed connection");
  const std::vector<std::uint8_t> bytes = protocol::encode(m);
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(sys_error("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
  return sent;
}

std::optional<protocol::Message> TcpConnection::receive() {
  if (fd_ < 0) throw TransportError("receive on closed connection");
  std::uint8_t buf[64 * 1024];
  for (;;) {
    if (auto m = decoder_.next()) return m;
    const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n == 0) {
      if (decoder_.buffered() != 0) throw TransportError("connection closed mid-message");
      return std::nullopt;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(sys_error("recv"));
    }
    bytes_received_ += static_cast<std::size_t>(n);
    decoder_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
  }
}

void TcpConnection::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpConnection::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpListener::TcpListener(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(sys_error("socket"));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string msg = sys_error("bind " + ep.str());
    ::close(fd);
    throw TransportError(msg);
  }
  if (::listen(fd, 64) != 0) {
    const std::string msg = sys_error("listen");
    ::close(fd);
    throw TransportError(msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  fd_ = fd;
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::optional<TcpConnection> TcpListener::accept() {
  for (;;) {
    const int fd = fd_.load();
    if (fd < 0) return std::nullopt;
    const int c = ::accept(fd, nullptr, nullptr);
    if (c >= 0) {
      const int one = 1;
      ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return TcpConnection(c);
    }
    if (errno == EINTR) continue;
    return std::nullopt;
  }
}

void TcpListener::close() {
  const int fd = fd_.exchange(-1);
  if (fd >= 0) {
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }
}

}  // namespace voxstream
