#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mdctcodec::detail {

using Digest = std::array<std::uint8_t, 16>;

// Incremental BLAKE2b with a 16-byte digest.
class Hasher {
 public:
  Hasher();
  void update(std::span<const std::uint8_t> bytes);
  void update(const void* data, std::size_t size);
  Digest finish();

 private:
  alignas(64) std::array<unsigned char, 384> state_;
};

Digest blake2b128(std::span<const std::uint8_t> bytes);

}  // namespace mdctcodec::detail
