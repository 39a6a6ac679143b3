#include "mdctcodec/detail/hash.hpp"

#include <sodium.h>

#include <stdexcept>

namespace mdctcodec::detail {

namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialization failed");
}

crypto_generichash_state* as_state(std::array<unsigned char, 384>& s) {
  static_assert(sizeof(crypto_generichash_state) <= 384);
  return reinterpret_cast<crypto_generichash_state*>(s.data());
}

}  // namespace

Hasher::Hasher() {
  ensure_sodium();
  crypto_generichash_init(as_state(state_), nullptr, 0, 16);
}

void Hasher::update(std::span<const std::uint8_t> bytes) {
  crypto_generichash_update(as_state(state_), bytes.data(), bytes.size());
}

void Hasher::update(const void* data, std::size_t size) {
  crypto_generichash_update(as_state(state_), static_cast<const unsigned char*>(data), size);
}

Digest Hasher::finish() {
  Digest d{};
  crypto_generichash_final(as_state(state_), d.data(), d.size());
  return d;
}

Digest blake2b128(std::span<const std::uint8_t> bytes) {
  Hasher h;
  h.update(bytes);
  return h.finish();
}

}  // namespace mdctcodec::detail
