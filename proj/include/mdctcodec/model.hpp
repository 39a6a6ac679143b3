#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mdctcodec/layers.hpp"

namespace mdctcodec {

struct ModelConfig {
  std::size_t spectrum_bins = 40;       // K
  std::size_t hidden_width = 256;
  std::size_t block_intermediate = 512;
  std::size_t num_blocks = 8;
  std::size_t latent_dim = 32;          // K'
  std::size_t downsample_rate = 8;      // R
  std::size_t kernel_size = 7;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Channels-last residual block over x[B, L, F]:
//   y = x + Linear2(GRN(GELU(Linear1(LayerNorm(DepthwiseConv(x))))))
template <typename T>
class ConvNextBlock {
 public:
  ConvNextBlock() = default;
  ConvNextBlock(std::size_t width, std::size_t intermediate, std::size_t kernel,
                std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  Conv1d<T> dwconv;
  LayerNorm<T> norm;
  Linear<T> pw1;
  Grn<T> grn;
  Linear<T> pw2;
};

// X[B, N, K] -> C[B, N/R, K'].
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& cfg, std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& spectrum) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  Conv1d<T> conv_in;
  LayerNorm<T> norm_in;
  std::vector<ConvNextBlock<T>> blocks;
  LayerNorm<T> norm_out;
  Linear<T> proj;
  Conv1d<T> conv_down;
  Conv1d<T> conv_out;

 private:
  ModelConfig cfg_;
};

// C[B, L, K'] -> X[B, L*R, K].
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const ModelConfig& cfg, std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& code) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  Conv1d<T> conv_in;
  ConvTranspose1d<T> conv_up;
  LayerNorm<T> norm_in;
  std::vector<ConvNextBlock<T>> blocks;
  LayerNorm<T> norm_out;
  Linear<T> proj;
  Conv1d<T> conv_out;

 private:
  ModelConfig cfg_;
};

}  // namespace mdctcodec
