#pragma once

#include "voxstream/voxel.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace voxstream::protocol {

// Frame: [type: u8][payload_len: u32 LE][payload]. All integers little-endian.
//   HELLO          role u8, client_id u32
//   FRAME_BATCH    count u32, count x (position 3 x i16, 512 x (D i16, W u16, RGB))
//   BLOCK_REQUEST  max_blocks u32
//   BLOCK_PACKAGE  count u32, count x (position 3 x i16, 512 x (I u8, RGB))
//   BYE            (empty)
enum class MessageType : std::uint8_t {
  Hello = 1,
  FrameBatch = 2,
  BlockRequest = 3,
  BlockPackage = 4,
  Bye = 5,
};

enum class Role : std::uint8_t { Reconstruction = 1, Client = 2 };

inline constexpr std::size_t kHeaderBytes = 5;
inline constexpr std::size_t kPositionBytes = 6;
inline constexpr std::size_t kTsdfVoxelBytes = 7;
inline constexpr std::size_t kMcVoxelBytes = 4;
inline constexpr std::size_t kTsdfBlockBytes = kTsdfVoxelBytes * kBlockVoxels;  // 3584
inline constexpr std::size_t kMcBlockBytes = kMcVoxelBytes * kBlockVoxels;      // 2048
inline constexpr std::size_t kMaxPayloadBytes = std::size_t{1} << 30;

struct Hello {
  Role role = Role::Client;
  std::uint32_t client_id = 0;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct FrameBatch {
  std::vector<BlockPosition> positions;
  std::vector<TsdfBlock> blocks;
  friend bool operator==(const FrameBatch&, const FrameBatch&) = default;
};

struct BlockRequest {
  std::uint32_t max_blocks = 0;
  friend bool operator==(const BlockRequest&, const BlockRequest&) = default;
};

struct BlockPackage {
  std::vector<BlockPosition> positions;
  std::vector<McBlock> blocks;
  friend bool operator==(const BlockPackage&, const BlockPackage&) = default;
};

struct Bye {
  friend bool operator==(const Bye&, const Bye&) = default;
};

using Message = std::variant<Hello, FrameBatch, BlockRequest, BlockPackage, Bye>;

MessageType type_of(const Message& m);

/// Encoded size of a BLOCK_PACKAGE / FRAME_BATCH with `count` blocks, header included.
constexpr std::size_t block_package_bytes(std::size_t count) {
  return kHeaderBytes + 4 + count * (kPositionBytes + kMcBlockBytes);
}
constexpr std::size_t frame_batch_bytes(std::size_t count) {
  return kHeaderBytes + 4 + count * (kPositionBytes + kTsdfBlockBytes);
}

/// Bytes per second implied by a request rate and package size, assuming
/// every package is full.
constexpr double package_bandwidth_bytes_per_s(double request_rate, std::size_t package_size) {
  return request_rate * static_cast<double>(block_package_bytes(package_size));
}

std::size_t encoded_size(const Message& m);

void encode_into(const Message& m, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> encode(const Message& m);

struct Decoded {
  Message message;
  std::size_t consumed = 0;
};

/// Decodes one message from the front of `bytes`. Returns nullopt if the
/// buffer does not yet hold a complete message (nothing is consumed).
/// Throws ProtocolError on an unknown type, oversize length or malformed payload.
std::optional<Decoded> decode(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream split at arbitrary boundaries.
class StreamDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Message> next();
  std::size_t buffered() const { return buffer_.size() - read_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t read_ = 0;
  std::size_t offset_ = 0;  // stream offset of buffer_[0], for error reporting
};

}  // namespace voxstream::protocol
