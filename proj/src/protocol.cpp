#include "voxstream/protocol.hpp"

#include "voxstream/errors.hpp"

#include <cstring>
#include <string>

namespace voxstream::protocol {

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_position(std::vector<std::uint8_t>& out, const BlockPosition& p) {
  put_u16(out, static_cast<std::uint16_t>(p.x));
  put_u16(out, static_cast<std::uint16_t>(p.y));
  put_u16(out, static_cast<std::uint16_t>(p.z));
}

std::size_t payload_size(const Message& m) {
  return std::visit(
      [](const auto& msg) -> std::size_t {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, Hello>) return 5;
        else if constexpr (std::is_same_v<T, FrameBatch>) return frame_batch_bytes(msg.positions.size()) - kHeaderBytes;
        else if constexpr (std::is_same_v<T, BlockRequest>) return 4;
        else if constexpr (std::is_same_v<T, BlockPackage>) return block_package_bytes(msg.positions.size()) - kHeaderBytes;
        else return 0;
      },
      m);
}

/// Bounds-checked little-endian reader over one payload.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t base) : bytes_(bytes), base_(base) {}

  std::size_t offset() const { return base_ + pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  BlockPosition position() {
    BlockPosition p;
    p.x = static_cast<std::int16_t>(u16());
    p.y = static_cast<std::int16_t>(u16());
    p.z = static_cast<std::int16_t>(u16());
    return p;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw ProtocolError("payload shorter than its declared contents", offset());
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

std::uint32_t read_count(Reader& r, std::size_t entry_bytes, std::size_t payload_len) {
  const std::size_t at = r.offset();
  const std::uint32_t count = r.u32();
  if (static_cast<std::uint64_t>(count) * entry_bytes + 4 != payload_len)
    throw ProtocolError("block count " + std::to_string(count) + " does not match payload length", at);
  return count;
}

Message decode_payload(MessageType type, std::span<const std::uint8_t> payload, std::size_t base) {
  Reader r(payload, base);
  switch (type) {
    case MessageType::Hello: {
      if (payload.size() != 5) throw ProtocolError("HELLO payload must be 5 bytes", base);
      Hello h;
      const std::size_t at = r.offset();
      const std::uint8_t role = r.u8();
      if (role != 1 && role != 2) throw ProtocolError("unknown role " + std::to_string(role), at);
      h.role = static_cast<Role>(role);
      h.client_id = r.u32();
      return h;
    }
    case MessageType::FrameBatch: {
      FrameBatch b;
      const std::uint32_t count = read_count(r, kPositionBytes + kTsdfBlockBytes, payload.size());
      b.positions.reserve(count);
      b.blocks.resize(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        b.positions.push_back(r.position());
        for (TsdfVoxel& v : b.blocks[i].voxels) {
          v.d = static_cast<std::int16_t>(r.u16());
          v.w = r.u16();
          v.c = {r.u8(), r.u8(), r.u8()};
        }
      }
      return b;
    }
    case MessageType::BlockRequest: {
      if (payload.size() != 4) throw ProtocolError("BLOCK_REQUEST payload must be 4 bytes", base);
      return BlockRequest{r.u32()};
    }
    case MessageType::BlockPackage: {
      BlockPackage p;
      const std::uint32_t count = read_count(r, kPositionBytes + kMcBlockBytes, payload.size());
      p.positions.reserve(count);
      p.blocks.resize(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        p.positions.push_back(r.position());
        for (McVoxel& v : p.blocks[i].voxels) {
          v.index = r.u8();
          v.c = {r.u8(), r.u8(), r.u8()};
        }
      }
      return p;
    }
    case MessageType::Bye:
      if (!payload.empty()) throw ProtocolError("BYE carries no payload", base);
      return Bye{};
  }
  throw ProtocolError("unknown message type", base - kHeaderBytes);
}

}  // namespace

MessageType type_of(const Message& m) {
  return std::visit(
      [](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, Hello>) return MessageType::Hello;
        else if constexpr (std::is_same_v<T, FrameBatch>) return MessageType::FrameBatch;
        else if constexpr (std::is_same_v<T, BlockRequest>) return MessageType::BlockRequest;
        else if constexpr (std::is_same_v<T, BlockPackage>) return MessageType::BlockPackage;
        else return MessageType::Bye;
      },
      m);
}

std::size_t encoded_size(const Message& m) { return kHeaderBytes + payload_size(m); }

void encode_into(const Message& m, std::vector<std::uint8_t>& out) {
  const std::size_t payload = payload_size(m);
  if (payload > kMaxPayloadBytes) throw ProtocolError("message exceeds maximum payload size", 0);
  out.reserve(out.size() + kHeaderBytes + payload);
  put_u8(out, static_cast<std::uint8_t>(type_of(m)));
  put_u32(out, static_cast<std::uint32_t>(payload));
  std::visit(
      [&out](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, Hello>) {
          put_u8(out, static_cast<std::uint8_t>(msg.role));
          put_u32(out, msg.client_id);
        } else if constexpr (std::is_same_v<T, FrameBatch>) {
          if (msg.positions.size() != msg.blocks.size()) throw ArgumentError("FRAME_BATCH positions/blocks mismatch");
          put_u32(out, static_cast<std::uint32_t>(msg.positions.size()));
          for (std::size_t i = 0; i < msg.positions.size(); ++i) {
            put_position(out, msg.positions[i]);
            for (const TsdfVoxel& v : msg.blocks[i].voxels) {
              put_u16(out, static_cast<std::uint16_t>(v.d));
              put_u16(out, v.w);
              out.insert(out.end(), v.c.begin(), v.c.end());
            }
          }
        } else if constexpr (std::is_same_v<T, BlockRequest>) {
          put_u32(out, msg.max_blocks);
        } else if constexpr (std::is_same_v<T, BlockPackage>) {
          if (msg.positions.size() != msg.blocks.size()) throw ArgumentError("BLOCK_PACKAGE positions/blocks mismatch");
          put_u32(out, static_cast<std::uint32_t>(msg.positions.size()));
          for (std::size_t i = 0; i < msg.positions.size(); ++i) {
            put_position(out, msg.positions[i]);
            for (const McVoxel& v : msg.blocks[i].voxels) {
              put_u8(out, v.index);
              out.insert(out.end(), v.c.begin(), v.c.end());
            }
          }
        }
      },
      m);
}

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out;
  encode_into(m, out);
  return out;
}

namespace {

std::optional<Decoded> decode_at(std::span<const std::uint8_t> bytes, std::size_t base) {
  if (bytes.empty()) return std::nullopt;
  const std::uint8_t type = bytes[0];
  if (type < 1 || type > 5) throw ProtocolError("unknown message type " + std::to_string(type), base);
  if (bytes.size() < kHeaderBytes) return std::nullopt;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[1 + static_cast<std::size_t>(i)]) << (8 * i);
  if (len > kMaxPayloadBytes) throw ProtocolError("payload length " + std::to_string(len) + " exceeds limit", base + 1);
  if (bytes.size() - kHeaderBytes < len) return std::nullopt;
  Decoded d{decode_payload(static_cast<MessageType>(type), bytes.subspan(kHeaderBytes, len), base + kHeaderBytes),
            kHeaderBytes + len};
  return d;
}

}  // namespace

std::optional<Decoded> decode(std::span<const std::uint8_t> bytes) { return decode_at(bytes, 0); }

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (read_ > 0 && read_ * 2 >= buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(read_));
    offset_ += read_;
    read_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> StreamDecoder::next() {
  auto d = decode_at(std::span<const std::uint8_t>(buffer_).subspan(read_), offset_ + read_);
  if (!d) return std::nullopt;
  read_ += d->consumed;
  return std::move(d->message);
}

}  // namespace voxstream::protocol
