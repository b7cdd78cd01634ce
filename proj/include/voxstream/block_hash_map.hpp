#pragma once

#include "voxstream/errors.hpp"
#include "voxstream/grid.hpp"
#include "voxstream/voxel.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace voxstream {

/// Sparse block storage addressed by BlockPosition through the spatial hash.
///
/// Buckets hold the head of a singly linked overflow chain of slots. Erased
/// slots are recycled; iteration visits live slots in slot order, which is
/// deterministic for a given sequence of operations. Allocating more than
/// `pool_blocks` live blocks throws PoolExhaustedError.
///
/// Not thread-safe for concurrent mutation; concurrent readers are fine.
template <class V>
class BlockHashMap {
 public:
  using Block = VoxelBlock<V>;

  BlockHashMap(std::size_t bucket_count, std::size_t pool_blocks)
      : heads_(bucket_count, kNone), pool_blocks_(pool_blocks) {
    if (bucket_count == 0 || (bucket_count & (bucket_count - 1)) != 0)
      throw ArgumentError("bucket_count must be a power of two");
    if (pool_blocks == 0) throw ArgumentError("pool size must be positive");
  }

  BlockHashMap(const BlockHashMap& other)
      : heads_(other.heads_), slots_(other.slots_), free_(other.free_),
        pool_blocks_(other.pool_blocks_), live_(other.live_) {
    blocks_.reserve(other.blocks_.size());
    for (const auto& b : other.blocks_) blocks_.push_back(b ? std::make_unique<Block>(*b) : nullptr);
  }

  BlockHashMap& operator=(const BlockHashMap& other) {
    if (this != &other) *this = BlockHashMap(other);
    return *this;
  }

  BlockHashMap(BlockHashMap&&) noexcept = default;
  BlockHashMap& operator=(BlockHashMap&&) noexcept = default;

  std::size_t size() const { return live_; }
  bool empty() const { return live_ == 0; }
  std::size_t bucket_count() const { return heads_.size(); }
  std::size_t pool_capacity() const { return pool_blocks_; }

  Block* find(BlockPosition p) {
    const std::int32_t s = find_slot(p);
    return s == kNone ? nullptr : blocks_[static_cast<std::size_t>(s)].get();
  }

  const Block* find(BlockPosition p) const {
    const std::int32_t s = find_slot(p);
    return s == kNone ? nullptr : blocks_[static_cast<std::size_t>(s)].get();
  }

  bool contains(BlockPosition p) const { return find_slot(p) != kNone; }

  /// Returns the block at p, allocating a default-initialized one if absent.
  /// The bool is true when a new block was allocated.
  std::pair<Block*, bool> insert(BlockPosition p) {
    if (Block* b = find(p)) return {b, false};
    return {allocate(p), true};
  }

  Block& insert_or_assign(BlockPosition p, const Block& value) {
    auto [b, inserted] = insert(p);
    *b = value;
    return *b;
  }

  bool erase(BlockPosition p) {
    const std::size_t bucket = block_hash(p, heads_.size());
    std::int32_t prev = kNone;
    for (std::int32_t s = heads_[bucket]; s != kNone; s = slots_[static_cast<std::size_t>(s)].next) {
      Slot& slot = slots_[static_cast<std::size_t>(s)];
      if (slot.pos == p) {
        if (prev == kNone)
          heads_[bucket] = slot.next;
        else
          slots_[static_cast<std::size_t>(prev)].next = slot.next;
        slot.live = false;
        slot.next = kNone;
        blocks_[static_cast<std::size_t>(s)].reset();
        free_.push_back(s);
        --live_;
        return true;
      }
      prev = s;
    }
    return false;
  }

  void clear() {
    std::fill(heads_.begin(), heads_.end(), kNone);
    slots_.clear();
    blocks_.clear();
    free_.clear();
    live_ = 0;
  }

  /// Calls f(position, block) for each live block in slot order.
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t s = 0; s < slots_.size(); ++s)
      if (slots_[s].live) f(slots_[s].pos, *blocks_[s]);
  }

  template <class F>
  void for_each(F&& f) {
    for (std::size_t s = 0; s < slots_.size(); ++s)
      if (slots_[s].live) f(slots_[s].pos, *blocks_[s]);
  }

  std::vector<BlockPosition> positions() const {
    std::vector<BlockPosition> out;
    out.reserve(live_);
    for (const Slot& slot : slots_)
      if (slot.live) out.push_back(slot.pos);
    return out;
  }

 private:
  static constexpr std::int32_t kNone = -1;

  struct Slot {
    BlockPosition pos;
    std::int32_t next = kNone;
    bool live = false;
  };

  std::int32_t find_slot(BlockPosition p) const {
    for (std::int32_t s = heads_[block_hash(p, heads_.size())]; s != kNone;
         s = slots_[static_cast<std::size_t>(s)].next)
      if (slots_[static_cast<std::size_t>(s)].pos == p) return s;
    return kNone;
  }

  Block* allocate(BlockPosition p) {
    if (live_ >= pool_blocks_) throw PoolExhaustedError("voxel block pool exhausted");
    std::int32_t s;
    if (!free_.empty()) {
      s = free_.back();
      free_.pop_back();
    } else {
      s = static_cast<std::int32_t>(slots_.size());
      slots_.emplace_back();
      blocks_.emplace_back();
    }
    const std::size_t bucket = block_hash(p, heads_.size());
    Slot& slot = slots_[static_cast<std::size_t>(s)];
    slot.pos = p;
    slot.live = true;
    slot.next = heads_[bucket];
    heads_[bucket] = s;
    blocks_[static_cast<std::size_t>(s)] = std::make_unique<Block>();
    ++live_;
    return blocks_[static_cast<std::size_t>(s)].get();
  }

  std::vector<std::int32_t> heads_;
  std::vector<Slot> slots_;
  std::vector<std::unique_ptr<Block>> blocks_;
  std::vector<std::int32_t> free_;
  std::size_t pool_blocks_;
  std::size_t live_ = 0;
};

/// Voxel at a global index, or nullptr if its block is not allocated or the
/// index lies outside the addressable range.
template <class V>
const V* find_voxel(const BlockHashMap<V>& map, const VoxelIndex& g) {
  if (g.x() < -32768 * kBlockDim || g.x() >= 32768 * kBlockDim || g.y() < -32768 * kBlockDim ||
      g.y() >= 32768 * kBlockDim || g.z() < -32768 * kBlockDim || g.z() >= 32768 * kBlockDim)
    return nullptr;
  const VoxelAddress a = split_index(g);
  const auto* block = map.find(a.block);
  return block ? &block->at(a.local.x, a.local.y, a.local.z) : nullptr;
}

}  // namespace voxstream
