#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mdctcodec/checkpoint.hpp"
#include "mdctcodec/config.hpp"
#include "mdctcodec/dataset.hpp"
#include "mdctcodec/discriminator.hpp"
#include "mdctcodec/losses.hpp"
#include "mdctcodec/model.hpp"
#include "mdctcodec/optim.hpp"
#include "mdctcodec/quantizer.hpp"
#include "mdctcodec/spectral.hpp"

namespace mdctcodec {

// Encoder, quantizer and decoder with their fixed spectral front ends.
template <typename T>
struct Generator {
  Generator(const CodecConfig& cfg, std::mt19937_64& rng);

  NamedTensors<T> parameters() const;

  MdctOp<T> mdct;
  MelOp<T> mel;
  Encoder<T> encoder;
  Decoder<T> decoder;
  ResidualVq<T> rvq;
};

template <typename T>
struct GeneratorPass {
  Tensor<T> spectrum;   // X [B, N, K]
  Tensor<T> code;       // C [B, N/R, K']
  RvqOutput<T> quantized;
  Tensor<T> decoded;    // X-hat [B, N, K]
  Tensor<T> waveform;   // x-hat [B, N * K]
};

// x[B, T] with T a multiple of W_S * R.
template <typename T>
GeneratorPass<T> run_generator(const Generator<T>& g, const Tensor<T>& x);

// Every term of the generator objective; the discriminator is used as given.
template <typename T>
GeneratorLossParts<T> generator_losses(const Generator<T>& g, const MdctDiscriminator<T>& d,
                                       const GeneratorPass<T>& pass, const Tensor<T>& x,
                                       const LossWeights& w);

// Weights, codebooks and quantizer state under "encoder.", "decoder." and "rvq.".
template <typename T>
void store_generator(const Generator<T>& g, Checkpoint& c);
template <typename T>
void restore_generator(const Checkpoint& c, Generator<T>& g);

struct StepMetrics {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double lr = 0.0;
  double loss_g = 0.0;
  double adv_g = 0.0;
  double fm = 0.0;
  double mdct = 0.0;
  double mel = 0.0;
  double cb = 0.0;
  double com = 0.0;
  double loss_d = 0.0;
  std::size_t revived = 0;
  double seconds = 0.0;

  // step-stamped key=value record; timing is excluded by the comparison.
  std::string to_line() const;
  bool same_losses(const StepMetrics& o) const;
};

template <typename T>
class Trainer {
 public:
  explicit Trainer(const CodecConfig& cfg, const Corpus* corpus = nullptr);

  // One alternating update on an explicit batch [B, segment].
  StepMetrics train_step(const Batch& batch);
  // Draws the next batch from the corpus sampler.
  StepMetrics step();

  std::vector<std::uint8_t> save_bytes() const;
  void save(const std::string& path) const;
  // Restores every piece of state; the checkpoint's config fingerprint must
  // match unless `force` is set.
  void load_bytes(std::span<const std::uint8_t> bytes, bool force = false);
  void load(const std::string& path, bool force = false);

  const CodecConfig& config() const { return cfg_; }
  Generator<T>& generator() { return gen_; }
  const Generator<T>& generator() const { return gen_; }
  MdctDiscriminator<T>& discriminator() { return disc_; }
  AdamW<T>& generator_optimizer() { return gen_opt_; }
  AdamW<T>& discriminator_optimizer() { return disc_opt_; }
  std::uint64_t steps_done() const { return step_; }
  std::optional<CropSampler>& sampler() { return sampler_; }

 private:
  CodecConfig cfg_;
  std::mt19937_64 rng_;
  Generator<T> gen_;
  MdctDiscriminator<T> disc_;
  AdamW<T> gen_opt_;
  AdamW<T> disc_opt_;
  std::optional<CropSampler> sampler_;
  std::uint64_t step_ = 0;
  std::uint64_t epoch_ = 0;
};

}  // namespace mdctcodec
