#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mdctcodec {

inline constexpr std::array<char, 4> kStreamMagic{'M', 'D', 'C', '1'};
inline constexpr std::uint16_t kStreamVersion = 1;
inline constexpr std::size_t kStreamHeaderBytes = 44;
inline constexpr std::size_t kStreamTrailerBytes = 4;

struct StreamHeader {
  std::uint16_t version = kStreamVersion;
  std::uint32_t sample_rate = 48000;
  std::uint16_t frame_shift = 40;     // W_S
  std::uint16_t rate = 8;             // R
  std::uint8_t num_quantizers = 4;    // Q
  std::uint8_t log2_codebook = 10;    // log2 M
  std::uint32_t num_frames = 0;
  std::uint64_t sample_count = 0;
  std::array<std::uint8_t, 16> fingerprint{};

  std::size_t payload_bits() const {
    return static_cast<std::size_t>(num_frames) * num_quantizers * log2_codebook;
  }
  std::size_t payload_bytes() const { return (payload_bits() + 7) / 8; }
  bool operator==(const StreamHeader&) const = default;
};

struct Bitstream {
  StreamHeader header;
  std::vector<std::uint32_t> tokens;  // [num_frames, Q], frame-major
  bool operator==(const Bitstream&) const = default;
};

// Little-endian header, MSB-first packed indices, CRC-32 of header+payload.
std::vector<std::uint8_t> pack(const Bitstream& stream);
Bitstream unpack(std::span<const std::uint8_t> bytes);

// Raw MSB-first index packing without header or trailer.
std::vector<std::uint8_t> pack_indices(std::span<const std::uint32_t> indices, unsigned bits);
std::vector<std::uint32_t> unpack_indices(std::span<const std::uint8_t> bytes, std::size_t count,
                                          unsigned bits);

}  // namespace mdctcodec
