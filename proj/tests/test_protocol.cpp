#include "voxstream/errors.hpp"
#include "voxstream/protocol.hpp"

#include <doctest.h>

#include <random>

using namespace voxstream;
using namespace voxstream::protocol;

namespace {

Message random_message(std::mt19937_64& rng, int max_count = 6) {
  std::uniform_int_distribution<int> type(0, 4), count(0, max_count), byte(0, 255);
  std::uniform_int_distribution<int> coord(-32768, 32767);
  std::uniform_int_distribution<std::uint32_t> u32;
  auto position = [&] {
    return BlockPosition{static_cast<std::int16_t>(coord(rng)), static_cast<std::int16_t>(coord(rng)),
                         static_cast<std::int16_t>(coord(rng))};
  };
  auto b8 = [&] { return static_cast<std::uint8_t>(byte(rng)); };
  switch (type(rng)) {
    case 0: return Hello{byte(rng) % 2 ? Role::Client : Role::Reconstruction, u32(rng)};
    case 1: {
      FrameBatch b;
      const int n = count(rng);
      for (int i = 0; i < n; ++i) {
        b.positions.push_back(position());
        TsdfBlock blk;
        for (TsdfVoxel& v : blk.voxels)
          v = TsdfVoxel{static_cast<std::int16_t>(coord(rng)), static_cast<std::uint16_t>(coord(rng) + 32768), {b8(), b8(), b8()}};
        b.blocks.push_back(blk);
      }
      return b;
    }
    case 2: return BlockRequest{u32(rng)};
    case 3: {
      BlockPackage p;
      const int n = count(rng);
      for (int i = 0; i < n; ++i) {
        p.positions.push_back(position());
        McBlock blk;
        for (McVoxel& v : blk.voxels) v = McVoxel{b8(), {b8(), b8(), b8()}};
        p.blocks.push_back(blk);
      }
      return p;
    }
    default: return Bye{};
  }
}

}  // namespace

TEST_CASE("encoded sizes") {
  CHECK(encode(Bye{}).size() == 5);
  CHECK(encode(BlockRequest{512}).size() == 9);
  CHECK(encode(Hello{Role::Client, 3}).size() == 10);
  BlockPackage one;
  one.positions.push_back({1, 2, 3});
  one.blocks.emplace_back();
  CHECK(encode(one).size() == 5 + 2058);
  CHECK(block_package_bytes(1) == 2063);
  CHECK(block_package_bytes(0) == 9);
  FrameBatch fb;
  fb.positions.push_back({0, 0, 0});
  fb.blocks.emplace_back();
  fb.positions.push_back({0, 0, 1});
  fb.blocks.emplace_back();
  CHECK(encode(fb).size() == 5 + 7184);
  CHECK(package_bandwidth_bytes_per_s(12.0, 512) == doctest::Approx(12.0 * (9 + 512 * 2054)));
}

TEST_CASE("byte layout is little-endian") {
  const auto hello = encode(Hello{Role::Reconstruction, 0x01020304});
  const std::vector<std::uint8_t> want{1, 5, 0, 0, 0, 1, 4, 3, 2, 1};
  CHECK(hello == want);
  BlockPackage p;
  p.positions.push_back({-1, 2, 0x0304});
  McBlock b;
  b.voxels[0] = McVoxel{0xAB, {1, 2, 3}};
  p.blocks.push_back(b);
  const auto bytes = encode(p);
  CHECK(bytes[0] == 4);
  CHECK(bytes[5] == 1);
  CHECK(bytes[9] == 0xFF);
  CHECK(bytes[10] == 0xFF);
  CHECK(bytes[11] == 2);
  CHECK(bytes[13] == 4);
  CHECK(bytes[14] == 3);
  CHECK(bytes[15] == 0xAB);
  CHECK(bytes[16] == 1);
}

TEST_CASE("random round trips are bit exact") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10000; ++i) {
    const Message m = random_message(rng, i % 100 == 0 ? 40 : 3);
    const auto bytes = encode(m);
    CHECK(bytes.size() == encoded_size(m));
    const auto d = decode(bytes);
    REQUIRE(d);
    CHECK(d->consumed == bytes.size());
    REQUIRE(d->message == m);
    CHECK(encode(d->message) == bytes);
  }
}

TEST_CASE("extreme counts") {
  BlockPackage empty;
  CHECK(decode(encode(empty))->message == Message{empty});
  BlockPackage big;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 4096; ++i) {
    big.positions.push_back({static_cast<std::int16_t>(i), static_cast<std::int16_t>(-i), 32767});
    McBlock b;
    b.voxels[static_cast<std::size_t>(i % 512)] = McVoxel{static_cast<std::uint8_t>(rng()), {1, 2, 3}};
    big.blocks.push_back(b);
  }
  const auto bytes = encode(big);
  CHECK(bytes.size() == block_package_bytes(4096));
  CHECK(decode(bytes)->message == Message{big});
  // A header announcing more than the payload limit is rejected up front.
  CHECK_THROWS_AS(decode(std::vector<std::uint8_t>{2, 0xFF, 0xFF, 0xFF, 0xFF}), ProtocolError);
}

TEST_CASE("a stream split at arbitrary boundaries decodes identically") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Message> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 20; ++i) {
      sent.push_back(random_message(rng));
      encode_into(sent.back(), stream);
    }
    StreamDecoder dec;
    std::vector<Message> got;
    std::size_t at = 0;
    std::uniform_int_distribution<std::size_t> chunk(1, trial % 2 ? 20 : 5000);
    while (at < stream.size()) {
      const std::size_t n = std::min(chunk(rng), stream.size() - at);
      dec.feed(std::span<const std::uint8_t>(stream).subspan(at, n));
      at += n;
      while (auto m = dec.next()) got.push_back(std::move(*m));
    }
    CHECK(dec.buffered() == 0);
    REQUIRE(got.size() == sent.size());
    CHECK(got == sent);
  }
}

TEST_CASE("incomplete input consumes nothing") {
  std::mt19937_64 rng(8);
  BlockPackage p;
  p.positions.push_back({0, 0, 0});
  p.blocks.emplace_back();
  const auto bytes = encode(p);
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{4}, std::size_t{5}, bytes.size() - 1})
    CHECK_FALSE(decode(std::span<const std::uint8_t>(bytes).first(n)));
}

TEST_CASE("malformed input reports the offset") {
  auto offset_of = [](const std::vector<std::uint8_t>& bytes) -> std::size_t {
    try {
      decode(bytes);
    } catch (const ProtocolError& e) {
      return e.offset();
    }
    FAIL("expected a protocol error");
    return 0;
  };
  CHECK(offset_of({9, 0, 0, 0, 0}) == 0);
  CHECK(offset_of({1, 5, 0, 0, 0, 3, 0, 0, 0, 0}) == 5);
  CHECK(offset_of({1, 4, 0, 0, 0, 1, 0, 0, 0}) == 5);
  CHECK(offset_of({5, 1, 0, 0, 0, 0}) == 5);
  CHECK(offset_of({4, 0xFF, 0xFF, 0xFF, 0x7F}) == 1);
  // Count says one block but the payload holds none.
  CHECK(offset_of({4, 4, 0, 0, 0, 1, 0, 0, 0}) == 5);

  // Errors in a stream are reported at their stream offset.
  std::vector<std::uint8_t> stream = encode(Bye{});
  const std::vector<std::uint8_t> bad{1, 5, 0, 0, 0, 7, 0, 0, 0, 0};
  stream.insert(stream.end(), bad.begin(), bad.end());
  StreamDecoder dec;
  dec.feed(stream);
  CHECK(dec.next());
  try {
    dec.next();
    FAIL("expected a protocol error");
  } catch (const ProtocolError& e) {
    CHECK(e.offset() == 10);
  }
}

TEST_CASE("mismatched positions and blocks cannot be encoded") {
  BlockPackage p;
  p.positions.push_back({0, 0, 0});
  CHECK_THROWS_AS(encode(p), ArgumentError);
}
