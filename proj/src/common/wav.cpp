#include "mdctcodec/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename V>
V load(const std::vector<char>& buf, std::size_t at) {
  V v;
  std::memcpy(&v, buf.data() + at, sizeof(V));
  return v;
}

struct Parsed {
  WavInfo info;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

Parsed parse(const std::vector<char>& buf, const std::string& path) {
  const auto bad = [&](const std::string& why) { fail(ErrorKind::kIo, path + ": " + why); };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    bad("not a RIFF/WAVE file");
  Parsed p;
  bool have_fmt = false, have_data = false;
  std::uint16_t tag = 0, bits = 0, block_align = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const std::size_t size = load<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > buf.size()) bad("short fmt chunk");
      tag = load<std::uint16_t>(buf, body);
      p.info.channels = load<std::uint16_t>(buf, body + 2);
      p.info.sample_rate = load<std::uint32_t>(buf, body + 4);
      block_align = load<std::uint16_t>(buf, body + 12);
      bits = load<std::uint16_t>(buf, body + 14);
      if (tag == kFormatExtensible && size >= 26) tag = load<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      p.data_offset = body;
      p.data_size = std::min(size, buf.size() - body);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || !have_data) bad("missing fmt or data chunk");
  if (tag == kFormatPcm && bits == 16)
    p.info.format = SampleFormat::kPcm16;
  else if (tag == kFormatFloat && bits == 32)
    p.info.format = SampleFormat::kFloat32;
  else
    fail(ErrorKind::kUnsupported, path + ": only 16-bit PCM and 32-bit float WAV are supported");
  if (p.info.channels == 0 || p.info.sample_rate == 0) bad("invalid channel count or rate");
  if (block_align != p.info.channels * (bits / 8)) bad("inconsistent block alignment");
  p.info.frames = p.data_size / block_align;
  return p;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

WavInfo probe_wav(const std::string& path) { return parse(slurp(path), path).info; }

Waveform read_wav(const std::string& path, WavInfo* info) {
  const auto buf = slurp(path);
  const auto p = parse(buf, path);
  if (info) *info = p.info;
  require(p.info.channels == 1, ErrorKind::kUnsupported,
          path + ": " + std::to_string(p.info.channels) + " channels; only mono is supported");
  Waveform w;
  w.sample_rate = p.info.sample_rate;
  w.samples.resize(p.info.frames);
  for (std::size_t i = 0; i < p.info.frames; ++i) {
    if (p.info.format == SampleFormat::kPcm16)
      w.samples[i] = load<std::int16_t>(buf, p.data_offset + 2 * i) / 32768.0;
    else
      w.samples[i] = load<float>(buf, p.data_offset + 4 * i);
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& audio, SampleFormat format,
               std::uint16_t channels) {
  const std::uint16_t bits = format == SampleFormat::kPcm16 ? 16 : 32;
  const std::uint16_t tag = format == SampleFormat::kPcm16 ? kFormatPcm : kFormatFloat;
  const std::uint16_t align = static_cast<std::uint16_t>(channels * bits / 8);
  const std::uint32_t frames = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_size = frames * align;
  std::vector<char> out;
  const auto put = [&out](const auto& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out.insert(out.end(), p, p + sizeof(v));
  };
  const auto tag4 = [&out](const char* s) { out.insert(out.end(), s, s + 4); };
  tag4("RIFF");
  put(static_cast<std::uint32_t>(36 + data_size));
  tag4("WAVE");
  tag4("fmt ");
  put(std::uint32_t{16});
  put(tag);
  put(channels);
  put(audio.sample_rate);
  put(static_cast<std::uint32_t>(audio.sample_rate * align));
  put(align);
  put(bits);
  tag4("data");
  put(data_size);
  for (double s : audio.samples)
    for (std::uint16_t c = 0; c < channels; ++c) {
      if (format == SampleFormat::kPcm16)
        put(static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0)));
      else
        put(static_cast<float>(s));
    }
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::kIo, "cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  require(static_cast<bool>(f), ErrorKind::kIo, "write failed for " + path);
}

}  // namespace mdctcodec
