#include <doctest.h>

#include <zlib.h>

#include <random>

#include "mdctcodec/bitstream.hpp"
#include "mdctcodec/config.hpp"
#include "mdctcodec/error.hpp"

using namespace mdctcodec;

namespace {

Bitstream small_stream() {
  Bitstream s;
  s.header.sample_rate = 48000;
  s.header.frame_shift = 40;
  s.header.rate = 8;
  s.header.num_quantizers = 2;
  s.header.log2_codebook = 3;
  s.header.num_frames = 1;
  s.header.sample_count = 100;
  for (std::uint8_t i = 0; i < 16; ++i) s.header.fingerprint[i] = i;
  s.tokens = {5, 2};
  return s;
}

ErrorKind unpack_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    unpack(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kContract;
}

Bitstream random_stream(std::size_t q, unsigned bits, std::size_t frames, std::mt19937_64& rng) {
  Bitstream s;
  s.header.num_quantizers = static_cast<std::uint8_t>(q);
  s.header.log2_codebook = static_cast<std::uint8_t>(bits);
  s.header.num_frames = static_cast<std::uint32_t>(frames);
  s.header.sample_count = frames * 320;
  std::uniform_int_distribution<std::uint32_t> pick(0, (1u << bits) - 1);
  s.tokens.resize(frames * q);
  for (auto& t : s.tokens) t = pick(rng);
  return s;
}

}  // namespace

TEST_CASE("frozen byte layout of a one-frame stream") {
  const auto bytes = pack(small_stream());
  CHECK(hex(bytes) ==
        "4d444331" "0100" "80bb0000" "2800" "0800" "02" "03" "01000000" "6400000000000000"
        "000102030405060708090a0b0c0d0e0f" "a8" "a0b55ae8");
  CHECK(unpack(bytes) == small_stream());
}

TEST_CASE("MSB-first index packing") {
  const std::uint32_t idx[] = {1, 0, 1023, 512};
  const auto bytes = pack_indices(idx, 10);
  CHECK(hex(bytes) == "00400ffe00");
  CHECK(unpack_indices(bytes, 4, 10) == std::vector<std::uint32_t>(std::begin(idx), std::end(idx)));
  const std::uint32_t big[] = {8};
  CHECK_THROWS_AS(pack_indices(big, 3), Error);
  CHECK_THROWS_AS(unpack_indices(bytes, 5, 10), Error);
}

TEST_CASE("one second at Q=4 has a 750-byte payload") {
  std::mt19937_64 rng(1);
  auto s = random_stream(4, 10, 150, rng);
  s.header.sample_count = 48000;
  const auto bytes = pack(s);
  CHECK(s.header.payload_bits() == 6000);
  CHECK(bytes.size() == kStreamHeaderBytes + 750 + kStreamTrailerBytes);
}

TEST_CASE("empty audio gives a valid zero-frame stream") {
  Bitstream s;
  s.header.num_frames = 0;
  s.header.sample_count = 0;
  const auto bytes = pack(s);
  CHECK(bytes.size() == kStreamHeaderBytes + kStreamTrailerBytes);
  const auto back = unpack(bytes);
  CHECK(back.tokens.empty());
  CHECK(back.header == s.header);
}

TEST_CASE("round trip over a grid of Q and M") {
  std::mt19937_64 rng(4);
  for (std::size_t q : {1, 2, 3, 4, 6, 8})
    for (unsigned bits = 1; bits <= 16; ++bits) {
      const auto s = random_stream(q, bits, 1 + rng() % 40, rng);
      CHECK(unpack(pack(s)) == s);
    }
}

TEST_CASE("every malformed stream is rejected with its own reason") {
  const auto good = pack(small_stream());
  auto bad = good;
  bad[0] = 'X';
  CHECK(unpack_kind(bad) == ErrorKind::kCorruptStream);
  CHECK(unpack_kind({good.begin(), good.begin() + 20}) == ErrorKind::kTruncatedStream);
  bad = good;
  bad[4] = 2;
  CHECK(unpack_kind(bad) == ErrorKind::kCorruptStream);
  bad = good;
  bad[14] = 0;  // Q
  CHECK(unpack_kind(bad) == ErrorKind::kCorruptStream);
  bad = good;
  bad[16] = 2;  // frames disagree with the sample count
  CHECK(unpack_kind(bad) == ErrorKind::kCorruptStream);
  CHECK(unpack_kind({good.begin(), good.end() - 1}) == ErrorKind::kTruncatedStream);
  bad = good;
  bad.push_back(0);
  CHECK(unpack_kind(bad) == ErrorKind::kCorruptStream);
  bad = good;
  bad[44] ^= 0x80;  // payload bit
  CHECK(unpack_kind(bad) == ErrorKind::kCorruptStream);
  bad = good;
  bad[30] ^= 1;  // fingerprint byte
  CHECK(unpack_kind(bad) == ErrorKind::kCorruptStream);
}

TEST_CASE("truncation message names expected and actual bits") {
  auto s = small_stream();
  s.header.num_frames = 2;
  s.header.sample_count = 400;
  s.tokens = {1, 2, 3, 4};
  auto bytes = pack(s);
  bytes.erase(bytes.begin() + 44, bytes.begin() + 45);
  try {
    unpack(bytes);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTruncatedStream);
    const std::string msg = e.what();
    CHECK(msg.find("expected 12 payload bits") != std::string::npos);
    CHECK(msg.find("got 8") != std::string::npos);
  }
}

TEST_CASE("nonzero padding bits are rejected even with a matching checksum") {
  // tokens {5, 2} use 6 of 8 bits; set a padding bit and re-checksum.
  auto bytes = pack(small_stream());
  bytes.resize(bytes.size() - kStreamTrailerBytes);
  bytes[44] |= 0x01;
  const auto c = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(c >> (8 * i)));
  CHECK(unpack_kind(bytes) == ErrorKind::kCorruptStream);
}

TEST_CASE("pack rejects inconsistent token counts") {
  auto s = small_stream();
  s.tokens.push_back(1);
  CHECK_THROWS_AS(pack(s), Error);
}
