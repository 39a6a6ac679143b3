#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mdctcodec/discriminator.hpp"
#include "mdctcodec/losses.hpp"
#include "mdctcodec/model.hpp"
#include "mdctcodec/quantizer.hpp"
#include "mdctcodec/transform.hpp"

namespace mdctcodec {

enum class Precision { kFloat32, kFloat64 };

struct TrainConfig {
  std::size_t batch_size = 48;
  std::size_t segment_samples = 7960;  // rounded up to a token-hop multiple
  double lr = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double lr_decay_per_epoch = 0.999;
  std::size_t total_steps = 200000;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 1000;
  std::size_t log_every = 1;
  Precision precision = Precision::kFloat64;
  std::string corpus_dir;
  std::string checkpoint_dir;
  std::string metrics_path;
};

// Every numeric knob of the codec plus run control, as one flat key space.
struct CodecConfig {
  std::uint32_t sample_rate = 48000;
  std::size_t mdct_bins = 40;
  ModelConfig model;
  RvqConfig rvq;
  DiscConfig disc;
  std::size_t mel_fft_size = 1024;
  std::size_t mel_bins = 80;
  double mel_f_min = 0.0;
  double mel_f_max = 24000.0;
  double mel_log_floor = 1e-5;
  LossWeights loss;
  TrainConfig train;

  void validate() const;

  MdctConfig mdct() const { return MdctConfig::with_bins(mdct_bins); }
  MelConfig mel() const;
  // W_S * R samples per token frame.
  std::size_t token_hop() const { return mdct_bins * model.downsample_rate; }
  std::size_t effective_segment() const;
  double bitrate() const;

  // Applies `key=value`; unknown keys fail with the list of valid ones.
  void set(std::string_view key, std::string_view value);
  void set_assignment(std::string_view assignment);
  // Blank lines and '#' comments are skipped.
  void parse(std::string_view text);

  // Canonical text, one key=value per line in registry order.
  std::string to_text() const;
  // BLAKE2b-128 over the keys that shape the model and its training;
  // paths and run-length keys are excluded.
  std::array<std::uint8_t, 16> fingerprint() const;

  static std::vector<std::string> keys();
  static CodecConfig load_file(const std::string& path);
};

std::string hex(std::span<const std::uint8_t> bytes);

}  // namespace mdctcodec
