#include "voxstream/client.hpp"

#include "voxstream/errors.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

namespace voxstream {

void ClientConfig::validate() const {
  if (!(request_rate > 0.0)) throw ArgumentError("request rate must be positive");
  if (package_size < 1) throw ArgumentError("package size must be at least 1");
  if (package_size > 0xFFFFFFFFu) throw ArgumentError("package size does not fit the wire format");
  if (duration < 0.0) throw ArgumentError("duration must be non-negative");
  if (!(idle_timeout > 0.0)) throw ArgumentError("idle timeout must be positive");
  if (!(sample_rate > 0.0)) throw ArgumentError("sample rate must be positive");
}

void MetricsTimeline::add(const MetricsSample& s) {
  if (!samples_.empty() && !(s.t > samples_.back().t))
    throw ArgumentError("metrics sample times must be strictly increasing");
  samples_.push_back(s);
}

void MetricsTimeline::write_csv(std::ostream& os) const {
  os << kMetricsCsvHeader << '\n';
  char t[32];
  for (const MetricsSample& s : samples_) {
    std::snprintf(t, sizeof(t), "%.6f", s.t);
    os << t << ',' << s.server_tsdf << ',' << s.server_mc << ',' << s.update_set << ',' << s.client_blocks << ','
       << s.bytes << ',' << s.requests << '\n';
  }
}

void MetricsTimeline::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(os);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

ClientRunner::ClientRunner(ClientMode mode, const GridConfig& grid) : mode_(mode) {
  if (mode == ClientMode::Exploration) mesh_ = std::make_unique<ClientMesh>(grid);
}

void ClientRunner::on_package(const protocol::BlockPackage& pkg) {
  if (pkg.positions.size() != pkg.blocks.size()) throw ArgumentError("package positions and blocks differ in length");
  ++requests_;
  bytes_ += protocol::block_package_bytes(pkg.positions.size());
  for (std::size_t i = 0; i < pkg.positions.size(); ++i) {
    received_.insert(pkg.positions[i]);
    if (mesh_) integrate_block(*mesh_, pkg.positions[i], pkg.blocks[i]);
  }
}

void ClientRunner::on_positions(std::span<const BlockPosition> positions) {
  if (mesh_) throw ArgumentError("an exploration client needs block payloads");
  ++requests_;
  bytes_ += protocol::block_package_bytes(positions.size());
  received_.insert(positions.begin(), positions.end());
}

RemoteServer::RemoteServer(const Endpoint& ep, ClientId id) : conn_(TcpConnection::connect(ep)) {
  conn_.send(protocol::Hello{protocol::Role::Client, id});
}

std::optional<protocol::BlockPackage> RemoteServer::request(std::uint32_t max_blocks) {
  if (!conn_.is_open()) return std::nullopt;
  try {
    conn_.send(protocol::BlockRequest{max_blocks});
    auto m = conn_.receive();
    if (!m) return std::nullopt;
    if (auto* pkg = std::get_if<protocol::BlockPackage>(&*m)) return std::move(*pkg);
    if (std::holds_alternative<protocol::Bye>(*m)) return std::nullopt;
    throw ProtocolError("expected BLOCK_PACKAGE in reply to BLOCK_REQUEST", conn_.bytes_received());
  } catch (const TransportError&) {
    conn_.close();
    return std::nullopt;
  }
}

void RemoteServer::close() {
  if (!conn_.is_open()) return;
  try {
    conn_.send(protocol::Bye{});
  } catch (const TransportError&) {
  }
  conn_.close();
}

LocalServer::LocalServer(ServerState& server, std::mutex& mutex, ClientId id) : server_(server), mutex_(mutex), id_(id) {
  std::lock_guard lock(mutex_);
  server_.register_client(id_);
}

LocalServer::~LocalServer() {
  std::lock_guard lock(mutex_);
  server_.unregister_client(id_);
}

std::optional<protocol::BlockPackage> LocalServer::request(std::uint32_t max_blocks) {
  std::lock_guard lock(mutex_);
  ServedPackage served = server_.serve_request(id_, max_blocks);
  return protocol::BlockPackage{std::move(served.positions), std::move(served.blocks)};
}

std::optional<ServerStats> LocalServer::server_stats() const {
  std::lock_guard lock(mutex_);
  return server_.stats();
}

ClientResult run_client(const ClientConfig& cfg, BlockSource& source, const GridConfig& grid,
                        const std::atomic<bool>* stop) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto period = std::chrono::duration<double>(1.0 / cfg.request_rate);
  const double sample_period = 1.0 / cfg.sample_rate;

  ClientRunner runner(cfg.mode, grid);
  ClientResult result;
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  auto sample = [&](double t) {
    if (!result.timeline.empty() && !(t > result.timeline.back().t)) return;
    MetricsSample s;
    s.t = t;
    if (auto st = source.server_stats()) {
      s.server_tsdf = static_cast<std::int64_t>(st->tsdf_blocks);
      s.server_mc = static_cast<std::int64_t>(st->mc_blocks);
      s.update_set = static_cast<std::int64_t>(st->update_set);
    }
    s.client_blocks = runner.client_blocks();
    s.bytes = runner.bytes();
    s.requests = runner.requests();
    result.timeline.add(s);
  };

  sample(0.0);
  double next_sample = sample_period;
  double last_activity = 0.0;
  auto next_request = start;
  while (!(stop && stop->load())) {
    std::this_thread::sleep_until(next_request);
    next_request += std::chrono::duration_cast<Clock::duration>(period);
    auto pkg = source.request(static_cast<std::uint32_t>(cfg.package_size));
    const double t = elapsed();
    if (!pkg) {
      result.timeline.mark_truncated();
      break;
    }
    if (!pkg->positions.empty()) last_activity = t;
    runner.on_package(*pkg);
    if (t >= next_sample) {
      sample(t);
      while (next_sample <= t) next_sample += sample_period;
    }
    if (cfg.duration > 0.0 ? t >= cfg.duration : t - last_activity >= cfg.idle_timeout) break;
    // A slow round trip must not cause a burst of catch-up requests.
    if (next_request < Clock::now()) next_request = Clock::now();
  }
  sample(elapsed());
  result.received = runner.received();
  result.mesh = runner.take_mesh();
  return result;
}

MetricsTimeline run_benchmark_client(const ClientConfig& cfg, BlockSource& source, const std::atomic<bool>* stop) {
  ClientConfig c = cfg;
  c.mode = ClientMode::Benchmark;
  return std::move(run_client(c, source, {}, stop).timeline);
}

ExplorationResult run_exploration_client(const ClientConfig& cfg, BlockSource& source, const GridConfig& grid,
                                         const std::atomic<bool>* stop) {
  ClientConfig c = cfg;
  c.mode = ClientMode::Exploration;
  ClientResult r = run_client(c, source, grid, stop);
  return {std::move(*r.mesh), std::move(r.timeline)};
}

}  // namespace voxstream
