#pragma once

#include "voxstream/meshing.hpp"
#include "voxstream/protocol.hpp"
#include "voxstream/server.hpp"
#include "voxstream/transport.hpp"

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_set>
#include <vector>

namespace voxstream {

enum class ClientMode { Benchmark, Exploration };

struct ClientConfig {
  double request_rate = 100.0;  // Hz
  std::size_t package_size = 512;
  ClientMode mode = ClientMode::Benchmark;
  double duration = 0.0;      // seconds; 0 runs until the stream has been idle for idle_timeout
  double idle_timeout = 2.0;  // seconds
  double sample_rate = 10.0;  // Hz

  void validate() const;
};

/// Server columns are -1 when the client cannot observe them.
struct MetricsSample {
  double t = 0.0;
  std::int64_t server_tsdf = -1;
  std::int64_t server_mc = -1;
  std::int64_t update_set = -1;
  std::uint64_t client_blocks = 0;
  std::uint64_t bytes = 0;
  std::uint64_t requests = 0;

  friend bool operator==(const MetricsSample&, const MetricsSample&) = default;
};

class MetricsTimeline {
 public:
  /// Throws ArgumentError unless s.t is greater than the previous sample time.
  void add(const MetricsSample& s);
  const std::vector<MetricsSample>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }
  const MetricsSample& back() const { return samples_.back(); }

  /// Set when the connection was lost before the run finished.
  bool truncated() const { return truncated_; }
  void mark_truncated() { truncated_ = true; }

  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<MetricsSample> samples_;
  bool truncated_ = false;
};

inline constexpr const char* kMetricsCsvHeader = "t,server_tsdf,server_mc,update_set,client_blocks,bytes,requests";

/// Client-side bookkeeping shared by the networked runners and the simulator.
class ClientRunner {
 public:
  ClientRunner(ClientMode mode, const GridConfig& grid);

  /// Accounts for one response. Exploration mode integrates the payload.
  void on_package(const protocol::BlockPackage& pkg);
  /// Accounts for a response of which only the positions are known.
  void on_positions(std::span<const BlockPosition> positions);

  ClientMode mode() const { return mode_; }
  std::size_t client_blocks() const { return received_.size(); }
  std::uint64_t bytes() const { return bytes_; }
  std::uint64_t requests() const { return requests_; }
  const std::unordered_set<BlockPosition>& received() const { return received_; }
  const ClientMesh* mesh() const { return mesh_.get(); }
  std::unique_ptr<ClientMesh> take_mesh() { return std::move(mesh_); }

 private:
  ClientMode mode_;
  std::unordered_set<BlockPosition> received_;
  std::uint64_t bytes_ = 0;
  std::uint64_t requests_ = 0;
  std::unique_ptr<ClientMesh> mesh_;
};

/// Something that answers block requests.
class BlockSource {
 public:
  virtual ~BlockSource() = default;
  /// One request/response round trip; nullopt when the connection is gone.
  virtual std::optional<protocol::BlockPackage> request(std::uint32_t max_blocks) = 0;
  virtual std::optional<ServerStats> server_stats() const { return std::nullopt; }
};

/// A server reached over TCP.
class RemoteServer : public BlockSource {
 public:
  RemoteServer(const Endpoint& ep, ClientId id);
  std::optional<protocol::BlockPackage> request(std::uint32_t max_blocks) override;
  void close();

 private:
  TcpConnection conn_;
};

/// A ServerState in the same process, guarded by the caller's mutex.
class LocalServer : public BlockSource {
 public:
  LocalServer(ServerState& server, std::mutex& mutex, ClientId id);
  ~LocalServer() override;
  std::optional<protocol::BlockPackage> request(std::uint32_t max_blocks) override;
  std::optional<ServerStats> server_stats() const override;

 private:
  ServerState& server_;
  std::mutex& mutex_;
  ClientId id_;
};

struct ClientResult {
  MetricsTimeline timeline;
  std::unique_ptr<ClientMesh> mesh;  // exploration mode only
  std::unordered_set<BlockPosition> received;
};

/// Wall-clock request loop at cfg.request_rate with at most one request in
/// flight. `stop` may be set from another thread to end the run early.
ClientResult run_client(const ClientConfig& cfg, BlockSource& source, const GridConfig& grid = {},
                        const std::atomic<bool>* stop = nullptr);

MetricsTimeline run_benchmark_client(const ClientConfig& cfg, BlockSource& source,
                                     const std::atomic<bool>* stop = nullptr);

struct ExplorationResult {
  ClientMesh mesh;
  MetricsTimeline timeline;
};

ExplorationResult run_exploration_client(const ClientConfig& cfg, BlockSource& source, const GridConfig& grid = {},
                                         const std::atomic<bool>* stop = nullptr);

}  // namespace voxstream
