#pragma once

// Binary checkpoint container. Little-endian throughout:
//   "MDCK" | u32 version | u8 dtype ('f' or 'd') | u32 len + config text |
//   16-byte config fingerprint | u32 entry count | entries | 16-byte BLAKE2b
// where each entry is
//   u16 len + name | u8 tag | u8 rank | u64 dims[rank] | u64 len + payload
// and the trailing digest covers every preceding byte.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mdctcodec/layers.hpp"

namespace mdctcodec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  char tag = 'f';  // 'f' float32, 'd' float64, 'u' uint64, 's' bytes
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> payload;
};

struct Checkpoint {
  char dtype = 'd';
  std::string config_text;
  std::array<std::uint8_t, 16> fingerprint{};
  std::map<std::string, CheckpointEntry> entries;  // name-sorted, so output is canonical

  void put_u64(const std::string& name, std::span<const std::uint64_t> values);
  void put_string(const std::string& name, const std::string& value);
  template <typename T>
  void put_values(const std::string& name, const Shape& shape, std::span<const T> values);
  template <typename T>
  void put_tensor(const std::string& name, const Tensor<T>& t) {
    put_values<T>(name, t.shape(), t.data());
  }

  bool has(const std::string& name) const { return entries.count(name) != 0; }
  const CheckpointEntry& at(const std::string& name) const;
  std::vector<std::uint64_t> get_u64(const std::string& name) const;
  std::string get_string(const std::string& name) const;
  // Copies into `out`, which must already have the stored element count.
  template <typename T>
  void get_values(const std::string& name, std::span<T> out) const;
  // Shape must match exactly.
  template <typename T>
  void get_tensor(const std::string& name, Tensor<T>& t) const;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(std::span<const std::uint8_t> bytes);
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
// Writes through a temporary file and a rename.
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace mdctcodec
