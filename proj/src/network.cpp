#include "voxstream/network.hpp"

#include "voxstream/errors.hpp"

#include <sys/socket.h>

namespace voxstream {

NetworkServer::NetworkServer(const ServerConfig& cfg, const Endpoint& listen)
    : state_(cfg), listener_(listen), epoch_(std::chrono::steady_clock::now()) {}

NetworkServer::~NetworkServer() { stop(); }

double NetworkServer::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void NetworkServer::start() {
  if (accept_thread_.joinable()) return;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void NetworkServer::stop() {
  {
    std::lock_guard lock(conn_mutex_);
    if (stopping_ && !accept_thread_.joinable()) return;
    stopping_ = true;
    for (Connection& c : connections_)
      if (c.fd >= 0) ::shutdown(c.fd, SHUT_RDWR);
  }
  conn_cv_.notify_all();
  listener_.close();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::list<Connection> remaining;
  {
    std::lock_guard lock(conn_mutex_);
    remaining.swap(connections_);
  }
  for (Connection& c : remaining)
    if (c.thread.joinable()) c.thread.join();
}

void NetworkServer::wait_until_done() {
  std::unique_lock lock(conn_mutex_);
  conn_cv_.wait(lock, [this] { return stopping_ || (capture_ended_ && open_clients_ == 0); });
}

ServerStats NetworkServer::stats() const {
  std::lock_guard lock(state_mutex_);
  return state_.stats();
}

void NetworkServer::inspect(const std::function<void(const ServerState&)>& f) const {
  std::lock_guard lock(state_mutex_);
  f(state_);
}

void NetworkServer::reap_finished() {
  std::list<Connection> done;
  {
    std::lock_guard lock(conn_mutex_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (it->finished) {
        auto next = std::next(it);
        done.splice(done.end(), connections_, it);
        it = next;
      } else {
        ++it;
      }
    }
  }
  for (Connection& c : done) c.thread.join();
}

void NetworkServer::accept_loop() {
  for (;;) {
    std::optional<TcpConnection> conn = listener_.accept();
    if (!conn) return;
    reap_finished();
    std::lock_guard lock(conn_mutex_);
    if (stopping_) return;
    Connection& slot = connections_.emplace_back();
    slot.fd = conn->native_handle();
    slot.thread = std::thread([this, c = std::move(*conn), &slot]() mutable { serve_connection(std::move(c), &slot); });
  }
}

void NetworkServer::serve_connection(TcpConnection conn, Connection* self) {
  std::optional<protocol::Role> role;
  std::optional<ClientId> client;
  try {
    auto first = conn.receive();
    const auto* hello = first ? std::get_if<protocol::Hello>(&*first) : nullptr;
    if (hello) {
      role = hello->role;
      if (*role == protocol::Role::Client) {
        client = hello->client_id;
        {
          std::lock_guard lock(state_mutex_);
          // A repeated HELLO with a known id starts a fresh session.
          state_.unregister_client(*client);
          state_.register_client(*client, now());
          owners_[*client] = self;
        }
        std::lock_guard lock(conn_mutex_);
        ++open_clients_;
      }
    }
    while (hello) {
      auto m = conn.receive();
      if (!m || std::holds_alternative<protocol::Bye>(*m)) break;
      if (auto* batch = std::get_if<protocol::FrameBatch>(&*m)) {
        if (*role != protocol::Role::Reconstruction) break;
        std::lock_guard lock(state_mutex_);
        const std::vector<BlockPosition> p_mc = state_.integrate_batch(batch->positions, batch->blocks);
        state_.enqueue_updates(p_mc, now());
      } else if (auto* req = std::get_if<protocol::BlockRequest>(&*m)) {
        if (!client) break;
        ServedPackage served;
        {
          std::lock_guard lock(state_mutex_);
          if (owners_[*client] != self) break;  // superseded by a newer connection
          served = state_.serve_request(*client, req->max_blocks);
          state_.streams().session(*client).delivered_bytes += protocol::block_package_bytes(served.positions.size());
        }
        conn.send(protocol::BlockPackage{std::move(served.positions), std::move(served.blocks)});
      } else {
        break;
      }
    }
  } catch (const std::exception&) {
    // Malformed input or transport loss ends the session.
  }
  if (client) {
    std::lock_guard lock(state_mutex_);
    if (owners_[*client] == self) {
      state_.unregister_client(*client);
      owners_.erase(*client);
    }
  }
  std::lock_guard lock(conn_mutex_);
  if (client) --open_clients_;
  if (role == protocol::Role::Reconstruction) capture_ended_ = true;
  self->fd = -1;
  conn.close();
  self->finished = true;
  conn_cv_.notify_all();
}

CaptureStats run_capture(DatasetReader& reader, const PipelineConfig& cfg, const Endpoint& server, double rate) {
  if (rate < 0.0) throw ArgumentError("reconstruction rate must be non-negative");
  ReconstructionPipeline pipeline(cfg, reader.intrinsics());
  TcpConnection conn = TcpConnection::connect(server);
  CaptureStats stats;
  stats.bytes_sent += conn.send(protocol::Hello{protocol::Role::Reconstruction, 0});
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  while (auto frame = reader.next()) {
    if (rate > 0.0)
      std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                                std::chrono::duration<double>(stats.frames / rate)));
    protocol::FrameBatch batch = pipeline.process(*frame);
    stats.blocks_sent += batch.positions.size();
    stats.bytes_sent += conn.send(batch);
    ++stats.frames;
  }
  stats.bytes_sent += conn.send(protocol::Bye{});
  conn.shutdown();
  return stats;
}

}  // namespace voxstream
