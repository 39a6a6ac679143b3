#include "mdctcodec/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mdctcodec/detail/hash.hpp"
#include "mdctcodec/error.hpp"

namespace mdctcodec {

static_assert(std::endian::native == std::endian::little, "raw payloads assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'D', 'C', 'K'};

template <typename T>
constexpr char tag_of() {
  return sizeof(T) == 4 ? 'f' : 'd';
}

template <typename V>
void put_le(std::vector<std::uint8_t>& out, V v) {
  for (std::size_t i = 0; i < sizeof(V); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename V>
  V le() {
    need(sizeof(V));
    V v = 0;
    for (std::size_t i = 0; i < sizeof(V); ++i)
      v |= static_cast<V>(static_cast<V>(bytes_[at_ + i]) << (8 * i));
    at_ += sizeof(V);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(at_, n);
    at_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - at_; }

 private:
  void need(std::size_t n) const {
    require(bytes_.size() - at_ >= n, ErrorKind::kIntegrity, "checkpoint is truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t at_ = 0;
};

std::string as_string(std::span<const std::uint8_t> s) { return std::string(s.begin(), s.end()); }

}  // namespace

void Checkpoint::put_u64(const std::string& name, std::span<const std::uint64_t> values) {
  CheckpointEntry e;
  e.tag = 'u';
  e.shape = {values.size()};
  for (auto v : values) put_le(e.payload, v);
  entries[name] = std::move(e);
}

void Checkpoint::put_string(const std::string& name, const std::string& value) {
  CheckpointEntry e;
  e.tag = 's';
  e.shape = {value.size()};
  e.payload.assign(value.begin(), value.end());
  entries[name] = std::move(e);
}

template <typename T>
void Checkpoint::put_values(const std::string& name, const Shape& shape, std::span<const T> values) {
  CheckpointEntry e;
  e.tag = tag_of<T>();
  e.shape.assign(shape.begin(), shape.end());
  e.payload.resize(values.size_bytes());
  std::memcpy(e.payload.data(), values.data(), values.size_bytes());
  entries[name] = std::move(e);
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
  const auto it = entries.find(name);
  require(it != entries.end(), ErrorKind::kIntegrity, "checkpoint has no entry '" + name + "'");
  return it->second;
}

std::vector<std::uint64_t> Checkpoint::get_u64(const std::string& name) const {
  const auto& e = at(name);
  require(e.tag == 'u' && e.payload.size() % 8 == 0, ErrorKind::kIntegrity,
          "checkpoint entry '" + name + "' is not a u64 array");
  Reader r(e.payload);
  std::vector<std::uint64_t> out(e.payload.size() / 8);
  for (auto& v : out) v = r.le<std::uint64_t>();
  return out;
}

std::string Checkpoint::get_string(const std::string& name) const {
  const auto& e = at(name);
  require(e.tag == 's', ErrorKind::kIntegrity, "checkpoint entry '" + name + "' is not a string");
  return as_string(e.payload);
}

template <typename T>
void Checkpoint::get_values(const std::string& name, std::span<T> out) const {
  const auto& e = at(name);
  require(e.tag == tag_of<T>(), ErrorKind::kIntegrity,
          "checkpoint entry '" + name + "' has element type '" + std::string(1, e.tag) + "'");
  require(e.payload.size() == out.size_bytes(), ErrorKind::kShape,
          "checkpoint entry '" + name + "' holds " + std::to_string(e.payload.size() / sizeof(T)) +
              " values, expected " + std::to_string(out.size()));
  std::memcpy(out.data(), e.payload.data(), out.size_bytes());
}

template <typename T>
void Checkpoint::get_tensor(const std::string& name, Tensor<T>& t) const {
  const auto& e = at(name);
  const std::vector<std::uint64_t> want(t.shape().begin(), t.shape().end());
  require(e.shape == want, ErrorKind::kShape,
          "checkpoint entry '" + name + "' does not match the model shape " + shape_string(t.shape()));
  get_values<T>(name, t.data());
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config_text.size()));
  out.insert(out.end(), config_text.begin(), config_text.end());
  out.insert(out.end(), fingerprint.begin(), fingerprint.end());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, e] : entries) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(e.tag));
    out.push_back(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) put_le<std::uint64_t>(out, d);
    put_le<std::uint64_t>(out, e.payload.size());
    out.insert(out.end(), e.payload.begin(), e.payload.end());
  }
  const auto digest = detail::blake2b128(out);
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

Checkpoint Checkpoint::deserialize(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::kIntegrity,
          "not a checkpoint (bad magic)");
  require(bytes.size() >= 4 + 16, ErrorKind::kIntegrity, "checkpoint is truncated");
  const auto body = bytes.first(bytes.size() - 16);
  const auto digest = detail::blake2b128(body);
  require(std::memcmp(digest.data(), bytes.data() + body.size(), 16) == 0, ErrorKind::kIntegrity,
          "checkpoint integrity hash mismatch");

  Reader r(body);
  r.take(4);
  const auto version = r.le<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorKind::kUnsupported,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.dtype = static_cast<char>(r.le<std::uint8_t>());
  require(c.dtype == 'f' || c.dtype == 'd', ErrorKind::kIntegrity, "unknown checkpoint dtype");
  c.config_text = as_string(r.take(r.le<std::uint32_t>()));
  const auto fp = r.take(16);
  std::copy(fp.begin(), fp.end(), c.fingerprint.begin());
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = as_string(r.take(r.le<std::uint16_t>()));
    CheckpointEntry e;
    e.tag = static_cast<char>(r.le<std::uint8_t>());
    e.shape.resize(r.le<std::uint8_t>());
    for (auto& d : e.shape) d = r.le<std::uint64_t>();
    const auto len = r.le<std::uint64_t>();
    require(len <= r.remaining(), ErrorKind::kIntegrity, "checkpoint is truncated");
    const auto payload = r.take(static_cast<std::size_t>(len));
    e.payload.assign(payload.begin(), payload.end());
    c.entries[std::move(name)] = std::move(e);
  }
  require(r.remaining() == 0, ErrorKind::kIntegrity, "checkpoint has trailing bytes");
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::kIo, "short write to " + tmp);
  }
  require(std::rename(tmp.c_str(), path.c_str()) == 0, ErrorKind::kIo, "cannot rename " + tmp + " to " + path);
}

template void Checkpoint::put_values<float>(const std::string&, const Shape&, std::span<const float>);
template void Checkpoint::put_values<double>(const std::string&, const Shape&, std::span<const double>);
template void Checkpoint::get_values<float>(const std::string&, std::span<float>) const;
template void Checkpoint::get_values<double>(const std::string&, std::span<double>) const;
template void Checkpoint::get_tensor<float>(const std::string&, Tensor<float>&) const;
template void Checkpoint::get_tensor<double>(const std::string&, Tensor<double>&) const;

}  // namespace mdctcodec
