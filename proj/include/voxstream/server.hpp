#pragma once

#include "voxstream/block_hash_map.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <unordered_set>
#include <vector>

namespace voxstream {

using ClientId = std::uint32_t;

/// A block position waiting in a client's stream set, with the time it was
/// first queued (virtual or wall clock seconds, caller-defined).
struct PendingBlock {
  BlockPosition pos;
  double enqueued_at = 0.0;
};

struct ClientSession {
  std::deque<PendingBlock> pending;
  std::unordered_set<BlockPosition> pending_set;
  std::uint64_t delivered_blocks = 0;
  std::uint64_t delivered_bytes = 0;
  std::uint64_t requests = 0;

  std::size_t pending_count() const { return pending.size(); }
};

/// Per-client FIFO stream sets with per-client deduplication.
class StreamSets {
 public:
  /// Throws ArgumentError if id is already registered.
  ClientSession& add(ClientId id, std::span<const BlockPosition> baseline, double now);
  bool remove(ClientId id);
  bool contains(ClientId id) const { return sessions_.count(id) != 0; }

  /// Appends every position to every session unless already pending there.
  void enqueue(std::span<const BlockPosition> positions, double now);

  /// Pops up to max_blocks entries in FIFO order. Throws ArgumentError for unknown ids.
  std::vector<PendingBlock> pop(ClientId id, std::size_t max_blocks);

  ClientSession& session(ClientId id);
  const ClientSession& session(ClientId id) const;
  const std::map<ClientId, ClientSession>& sessions() const { return sessions_; }
  bool all_drained() const;

 private:
  std::map<ClientId, ClientSession> sessions_;
};

struct ServerConfig {
  GridConfig grid;
  double c_w = 2.0;
  /// When false, every recomputed block is flagged and stored (no MC block
  /// pruning) and cells are classified with c_w = 0.
  bool prune_blocks = true;
};

struct ServedPackage {
  std::vector<BlockPosition> positions;
  std::vector<McBlock> blocks;       // empty when served without payload
  std::vector<double> enqueued_at;   // per position
};

struct ServerStats {
  std::size_t tsdf_blocks = 0;
  std::size_t mc_blocks = 0;
  std::size_t update_set = 0;
};

/// Central server state: the unpruned TSDF model, the pruned MC model, the
/// global update set and the per-client stream sets.
class ServerState {
 public:
  explicit ServerState(const ServerConfig& cfg);

  /// Integrates received TSDF blocks and returns the positions whose MC
  /// content must be (re)streamed. Throws ArgumentError on length mismatch.
  std::vector<BlockPosition> integrate_batch(std::span<const BlockPosition> positions,
                                             std::span<const TsdfBlock> data);

  /// Queues positions (which must all be in the update set) for every client.
  void enqueue_updates(std::span<const BlockPosition> p_mc, double now = 0.0);

  /// New session whose stream set holds the current MC model positions.
  void register_client(ClientId id, double now = 0.0);
  bool unregister_client(ClientId id);

  /// Up to max_blocks queued positions with their current MC content; a
  /// position pruned since it was queued is served as an all-zero block.
  ServedPackage serve_request(ClientId id, std::size_t max_blocks);

  /// As serve_request, but without copying voxel payloads.
  ServedPackage serve_positions(ClientId id, std::size_t max_blocks);

  const ServerConfig& config() const { return cfg_; }
  const BlockHashMap<TsdfVoxel>& tsdf() const { return tsdf_; }
  const BlockHashMap<McVoxel>& mc() const { return mc_; }
  const std::unordered_set<BlockPosition>& update_set() const { return update_set_; }
  const StreamSets& streams() const { return streams_; }
  StreamSets& streams() { return streams_; }
  ServerStats stats() const { return {tsdf_.size(), mc_.size(), update_set_.size()}; }

 private:
  ServedPackage serve(ClientId id, std::size_t max_blocks, bool with_payload);

  ServerConfig cfg_;
  BlockHashMap<TsdfVoxel> tsdf_;
  BlockHashMap<McVoxel> mc_;
  std::unordered_set<BlockPosition> update_set_;
  StreamSets streams_;
};

}  // namespace voxstream
