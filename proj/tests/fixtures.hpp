#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mdctcodec/config.hpp"
#include "mdctcodec/dataset.hpp"
#include "mdctcodec/wav.hpp"

namespace testing_support {

// Small enough for a training step in well under a second.
inline mdctcodec::CodecConfig tiny_config() {
  mdctcodec::CodecConfig c;
  for (const char* kv : {"hidden_width=16", "block_intermediate=32", "num_blocks=1", "latent_dim=8",
                         "num_quantizers=2", "codebook_size=16", "disc_channels=4", "batch_size=2",
                         "segment_samples=3200", "lr=0.001", "seed=11"})
    c.set_assignment(kv);
  return c;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mdctcodec_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Sum of a few random sinusoids, peak below 0.9.
inline mdctcodec::Waveform sine_mixture(std::size_t samples, std::uint64_t seed,
                                        std::uint32_t rate = 48000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(80.0, 4000.0), phase(0.0, 6.283185307179586),
      amp(0.05, 0.25);
  mdctcodec::Waveform w;
  w.sample_rate = rate;
  w.samples.assign(samples, 0.0);
  for (int k = 0; k < 3; ++k) {
    const double f = freq(rng), p = phase(rng), a = amp(rng);
    for (std::size_t i = 0; i < samples; ++i)
      w.samples[i] += a * std::sin(6.283185307179586 * f * static_cast<double>(i) / rate + p);
  }
  return w;
}

inline mdctcodec::Corpus sine_corpus(std::size_t clips, std::size_t samples, std::uint64_t seed) {
  mdctcodec::Corpus c;
  for (std::size_t i = 0; i < clips; ++i) {
    const auto w = sine_mixture(samples, seed + i);
    c.names.push_back("clip" + std::to_string(i));
    c.clips.emplace_back(w.samples.begin(), w.samples.end());
  }
  return c;
}

}  // namespace testing_support
