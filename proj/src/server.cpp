#include "voxstream/server.hpp"

#include "voxstream/errors.hpp"
#include "voxstream/meshing.hpp"

#include <string>

namespace voxstream {

ClientSession& StreamSets::add(ClientId id, std::span<const BlockPosition> baseline, double now) {
  auto [it, inserted] = sessions_.try_emplace(id);
  if (!inserted) throw ArgumentError("client " + std::to_string(id) + " is already registered");
  ClientSession& s = it->second;
  for (const BlockPosition& p : baseline)
    if (s.pending_set.insert(p).second) s.pending.push_back({p, now});
  return s;
}

bool StreamSets::remove(ClientId id) { return sessions_.erase(id) != 0; }

void StreamSets::enqueue(std::span<const BlockPosition> positions, double now) {
  for (auto& [id, s] : sessions_)
    for (const BlockPosition& p : positions)
      if (s.pending_set.insert(p).second) s.pending.push_back({p, now});
}

std::vector<PendingBlock> StreamSets::pop(ClientId id, std::size_t max_blocks) {
  ClientSession& s = session(id);
  std::vector<PendingBlock> out;
  const std::size_t n = std::min(max_blocks, s.pending.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(s.pending.front());
    s.pending_set.erase(s.pending.front().pos);
    s.pending.pop_front();
  }
  return out;
}

ClientSession& StreamSets::session(ClientId id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ArgumentError("unknown client " + std::to_string(id));
  return it->second;
}

const ClientSession& StreamSets::session(ClientId id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ArgumentError("unknown client " + std::to_string(id));
  return it->second;
}

bool StreamSets::all_drained() const {
  for (const auto& [id, s] : sessions_)
    if (!s.pending.empty()) return false;
  return true;
}

ServerState::ServerState(const ServerConfig& cfg)
    : cfg_(cfg),
      tsdf_(cfg.grid.tsdf_bucket_count, cfg.grid.tsdf_pool_blocks),
      mc_(cfg.grid.mc_bucket_count, cfg.grid.mc_pool_blocks) {
  cfg_.grid.validate();
  if (cfg_.c_w < 0.0) throw ArgumentError("c_w must be non-negative");
}

std::vector<BlockPosition> ServerState::integrate_batch(std::span<const BlockPosition> positions,
                                                        std::span<const TsdfBlock> data) {
  if (positions.size() != data.size()) throw ArgumentError("batch positions and voxel data differ in length");

  for (std::size_t i = 0; i < positions.size(); ++i) tsdf_.insert_or_assign(positions[i], data[i]);

  // Blocks whose cells read corners from an updated block: the block itself
  // and the seven neighbours at p - {0,1}^3.
  std::vector<BlockPosition> candidates;
  std::unordered_set<BlockPosition> seen;
  candidates.reserve(positions.size() * 2);
  for (const BlockPosition& p : positions)
    if (seen.insert(p).second) candidates.push_back(p);
  for (const BlockPosition& p : positions) {
    for (int o = 1; o < 8; ++o) {
      const long nx = p.x - (o & 1), ny = p.y - ((o >> 1) & 1), nz = p.z - ((o >> 2) & 1);
      if (!block_in_range(nx, ny, nz)) continue;
      const BlockPosition q{static_cast<std::int16_t>(nx), static_cast<std::int16_t>(ny),
                            static_cast<std::int16_t>(nz)};
      if (tsdf_.contains(q) && seen.insert(q).second) candidates.push_back(q);
    }
  }

  const double c_w = cfg_.prune_blocks ? cfg_.c_w : 0.0;
  std::vector<BlockPosition> p_mc;
  p_mc.reserve(candidates.size());
  for (const BlockPosition& p : candidates) {
    McBlockResult r = compute_block_mc(p, tsdf_, c_w);
    const bool flag = cfg_.prune_blocks ? r.flag : true;
    if (flag)
      mc_.insert_or_assign(p, r.voxels);
    else
      mc_.erase(p);
    if (flag || update_set_.count(p) != 0) p_mc.push_back(p);
  }
  update_set_.insert(p_mc.begin(), p_mc.end());
  return p_mc;
}

void ServerState::enqueue_updates(std::span<const BlockPosition> p_mc, double now) {
  for (const BlockPosition& p : p_mc)
    if (update_set_.count(p) == 0) throw ArgumentError("enqueued position is not in the update set");
  streams_.enqueue(p_mc, now);
}

void ServerState::register_client(ClientId id, double now) {
  const std::vector<BlockPosition> baseline = mc_.positions();
  streams_.add(id, baseline, now);
}

bool ServerState::unregister_client(ClientId id) { return streams_.remove(id); }

ServedPackage ServerState::serve(ClientId id, std::size_t max_blocks, bool with_payload) {
  ClientSession& s = streams_.session(id);
  ServedPackage pkg;
  for (const PendingBlock& pb : streams_.pop(id, max_blocks)) {
    pkg.positions.push_back(pb.pos);
    pkg.enqueued_at.push_back(pb.enqueued_at);
    if (with_payload) {
      const McBlock* b = mc_.find(pb.pos);
      pkg.blocks.push_back(b ? *b : McBlock{});
    }
  }
  ++s.requests;
  s.delivered_blocks += pkg.positions.size();
  return pkg;
}

ServedPackage ServerState::serve_request(ClientId id, std::size_t max_blocks) { return serve(id, max_blocks, true); }

ServedPackage ServerState::serve_positions(ClientId id, std::size_t max_blocks) {
  return serve(id, max_blocks, false);
}

}  // namespace voxstream
