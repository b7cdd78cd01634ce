#pragma once

#include "voxstream/protocol.hpp"

#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace voxstream {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// Parses "host:port" or ":port".
  static Endpoint parse(const std::string& text);
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Owning TCP stream socket that sends and receives whole protocol messages.
class TcpConnection {
 public:
  TcpConnection() = default;
  explicit TcpConnection(int fd) : fd_(fd) {}
  ~TcpConnection();
  TcpConnection(TcpConnection&& other) noexcept;
  TcpConnection& operator=(TcpConnection&& other) noexcept;
  TcpConnection(const TcpConnection&) = delete;
  TcpConnection& operator=(const TcpConnection&) = delete;

  static TcpConnection connect(const Endpoint& ep);

  bool is_open() const { return fd_ >= 0; }
  int native_handle() const { return fd_; }
  /// Returns the number of bytes written.
  std::size_t send(const protocol::Message& m);
  /// Blocks until one message arrives; nullopt on orderly shutdown by the peer.
  std::optional<protocol::Message> receive();
  std::size_t bytes_received() const { return bytes_received_; }
  void shutdown();
  void close();

 private:
  int fd_ = -1;
  protocol::StreamDecoder decoder_;
  std::size_t bytes_received_ = 0;
};

class TcpListener {
 public:
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks for the next connection; nullopt once the listener is closed.
  std::optional<TcpConnection> accept();
  /// Safe to call from another thread to wake a blocked accept().
  void close();

 private:
  std::atomic<int> fd_{-1};
  std::uint16_t port_ = 0;
};

}  // namespace voxstream
