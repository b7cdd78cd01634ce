#pragma once

#include "voxstream/capture.hpp"
#include "voxstream/datagen.hpp"
#include "voxstream/server.hpp"
#include "voxstream/transport.hpp"

#include <chrono>
#include <condition_variable>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace voxstream {

/// TCP front end of ServerState. One thread per connection; every access
/// to the state happens under a single mutex, so a request observes each
/// batch either entirely or not at all.
class NetworkServer {
 public:
  NetworkServer(const ServerConfig& cfg, const Endpoint& listen);
  ~NetworkServer();
  NetworkServer(const NetworkServer&) = delete;
  NetworkServer& operator=(const NetworkServer&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  void start();
  void stop();

  /// Blocks until a reconstruction session has ended and no client is
  /// connected, or until stop().
  void wait_until_done();

  ServerStats stats() const;
  void inspect(const std::function<void(const ServerState&)>& f) const;

 private:
  struct Connection {
    std::thread thread;
    int fd = -1;
    bool finished = false;
  };

  void accept_loop();
  void serve_connection(TcpConnection conn, Connection* self);
  void reap_finished();
  double now() const;

  mutable std::mutex state_mutex_;
  ServerState state_;
  std::map<ClientId, const Connection*> owners_;  // connection holding each client's session
  TcpListener listener_;
  std::chrono::steady_clock::time_point epoch_;

  std::mutex conn_mutex_;
  std::condition_variable conn_cv_;
  std::list<Connection> connections_;
  std::thread accept_thread_;
  bool stopping_ = false;
  bool capture_ended_ = false;
  int open_clients_ = 0;
};

struct CaptureStats {
  std::size_t frames = 0;
  std::size_t blocks_sent = 0;
  std::size_t bytes_sent = 0;
};

/// Reconstruction process: reads frames, runs the pipeline and uploads one
/// FRAME_BATCH per frame at `rate` Hz (0 = as fast as possible), then BYE.
CaptureStats run_capture(DatasetReader& reader, const PipelineConfig& cfg, const Endpoint& server, double rate = 30.0);

}  // namespace voxstream
