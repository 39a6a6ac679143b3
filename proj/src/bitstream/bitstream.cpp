#include "mdctcodec/bitstream.hpp"

#include <zlib.h>

#include <cstring>
#include <string>

#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

template <typename V>
void put_le(std::vector<std::uint8_t>& out, V v) {
  for (std::size_t i = 0; i < sizeof(V); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename V>
V get_le(std::span<const std::uint8_t> in, std::size_t& at) {
  V v = 0;
  for (std::size_t i = 0; i < sizeof(V); ++i) v |= static_cast<V>(static_cast<V>(in[at + i]) << (8 * i));
  at += sizeof(V);
  return v;
}

std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<std::uint8_t> pack_indices(std::span<const std::uint32_t> indices, unsigned bits) {
  require(bits >= 1 && bits <= 16, ErrorKind::kContract, "index width must be 1..16 bits");
  std::vector<std::uint8_t> out((indices.size() * bits + 7) / 8, 0);
  std::size_t bit = 0;
  for (auto v : indices) {
    require(v < (1u << bits), ErrorKind::kContract,
            "index " + std::to_string(v) + " does not fit in " + std::to_string(bits) + " bits");
    for (int b = static_cast<int>(bits) - 1; b >= 0; --b, ++bit)
      if ((v >> b) & 1u) out[bit / 8] |= static_cast<std::uint8_t>(0x80u >> (bit % 8));
  }
  return out;
}

std::vector<std::uint32_t> unpack_indices(std::span<const std::uint8_t> bytes, std::size_t count,
                                          unsigned bits) {
  require(bytes.size() * 8 >= count * bits, ErrorKind::kTruncatedStream,
          "payload holds " + std::to_string(bytes.size() * 8) + " bits, expected " +
              std::to_string(count * bits));
  std::vector<std::uint32_t> out(count, 0);
  std::size_t bit = 0;
  for (auto& v : out)
    for (unsigned b = 0; b < bits; ++b, ++bit)
      v = (v << 1) | ((bytes[bit / 8] >> (7 - bit % 8)) & 1u);
  return out;
}

std::vector<std::uint8_t> pack(const Bitstream& s) {
  const auto& h = s.header;
  require(h.num_quantizers >= 1 && h.log2_codebook >= 1 && h.log2_codebook <= 16,
          ErrorKind::kContract, "stream needs Q >= 1 and 1 <= log2 M <= 16");
  require(s.tokens.size() == static_cast<std::size_t>(h.num_frames) * h.num_quantizers,
          ErrorKind::kContract, "token count does not match frames x quantizers");
  std::vector<std::uint8_t> out;
  out.reserve(kStreamHeaderBytes + h.payload_bytes() + kStreamTrailerBytes);
  out.insert(out.end(), kStreamMagic.begin(), kStreamMagic.end());
  put_le(out, h.version);
  put_le(out, h.sample_rate);
  put_le(out, h.frame_shift);
  put_le(out, h.rate);
  put_le(out, h.num_quantizers);
  put_le(out, h.log2_codebook);
  put_le(out, h.num_frames);
  put_le(out, h.sample_count);
  out.insert(out.end(), h.fingerprint.begin(), h.fingerprint.end());
  const auto payload = pack_indices(s.tokens, h.log2_codebook);
  out.insert(out.end(), payload.begin(), payload.end());
  put_le(out, crc(out));
  return out;
}

Bitstream unpack(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kStreamMagic.data(), 4) == 0,
          ErrorKind::kCorruptStream, "bad magic: not an MDC1 stream");
  require(bytes.size() >= kStreamHeaderBytes, ErrorKind::kTruncatedStream,
          "stream truncated inside the " + std::to_string(kStreamHeaderBytes) + "-byte header");
  Bitstream s;
  auto& h = s.header;
  std::size_t at = 4;
  h.version = get_le<std::uint16_t>(bytes, at);
  require(h.version == kStreamVersion, ErrorKind::kCorruptStream,
          "unsupported stream version " + std::to_string(h.version));
  h.sample_rate = get_le<std::uint32_t>(bytes, at);
  h.frame_shift = get_le<std::uint16_t>(bytes, at);
  h.rate = get_le<std::uint16_t>(bytes, at);
  h.num_quantizers = get_le<std::uint8_t>(bytes, at);
  h.log2_codebook = get_le<std::uint8_t>(bytes, at);
  h.num_frames = get_le<std::uint32_t>(bytes, at);
  h.sample_count = get_le<std::uint64_t>(bytes, at);
  std::memcpy(h.fingerprint.data(), bytes.data() + at, 16);
  at += 16;
  require(h.sample_rate > 0 && h.frame_shift > 0 && h.rate > 0, ErrorKind::kCorruptStream,
          "header has zero rate or hop");
  require(h.num_quantizers >= 1 && h.log2_codebook >= 1 && h.log2_codebook <= 16,
          ErrorKind::kCorruptStream, "header has invalid Q or log2 M");
  const std::size_t hop = static_cast<std::size_t>(h.frame_shift) * h.rate;
  require(h.num_frames == (h.sample_count + hop - 1) / hop, ErrorKind::kCorruptStream,
          "header sample count disagrees with the frame count");

  const std::size_t payload = h.payload_bytes();
  const std::size_t need = kStreamHeaderBytes + payload + kStreamTrailerBytes;
  require(bytes.size() >= need, ErrorKind::kTruncatedStream,
          "truncated stream: expected " + std::to_string(h.payload_bits()) + " payload bits, got " +
              std::to_string(bytes.size() > kStreamHeaderBytes + kStreamTrailerBytes
                                 ? (bytes.size() - kStreamHeaderBytes - kStreamTrailerBytes) * 8
                                 : 0));
  require(bytes.size() == need, ErrorKind::kCorruptStream,
          "stream has " + std::to_string(bytes.size() - need) + " trailing bytes");
  std::size_t crc_at = kStreamHeaderBytes + payload;
  const auto stored = get_le<std::uint32_t>(bytes, crc_at);
  require(stored == crc(bytes.first(kStreamHeaderBytes + payload)), ErrorKind::kCorruptStream,
          "checksum mismatch: stream is corrupt");
  const auto body = bytes.subspan(kStreamHeaderBytes, payload);
  const std::size_t count = static_cast<std::size_t>(h.num_frames) * h.num_quantizers;
  s.tokens = unpack_indices(body, count, h.log2_codebook);
  // Padding bits after the last index must be zero.
  const std::size_t used = count * h.log2_codebook;
  if (used % 8 != 0)
    require((body[used / 8] & (0xFFu >> (used % 8))) == 0, ErrorKind::kCorruptStream,
            "nonzero padding bits after the payload");
  return s;
}

}  // namespace mdctcodec
