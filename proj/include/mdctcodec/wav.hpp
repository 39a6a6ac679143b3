#pragma once

#include <cstdint>
#include <string>

#include "mdctcodec/transform.hpp"

namespace mdctcodec {

enum class SampleFormat { kPcm16, kFloat32 };

struct WavInfo {
  std::uint32_t sample_rate = 0;
  std::uint16_t channels = 0;
  SampleFormat format = SampleFormat::kPcm16;
  std::size_t frames = 0;
};

// Reads 16-bit PCM or 32-bit float RIFF/WAVE; samples scaled to [-1, 1].
// Only mono data is returned; more channels raise an unsupported error.
Waveform read_wav(const std::string& path, WavInfo* info = nullptr);
WavInfo probe_wav(const std::string& path);

void write_wav(const std::string& path, const Waveform& audio,
               SampleFormat format = SampleFormat::kFloat32, std::uint16_t channels = 1);

}  // namespace mdctcodec
