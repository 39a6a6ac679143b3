#pragma once

// Differentiable counterparts of the transform module over batched tensors.

#include <cstddef>

#include "mdctcodec/tensor.hpp"
#include "mdctcodec/transform.hpp"

namespace mdctcodec {

template <typename T>
class MdctOp {
 public:
  explicit MdctOp(const MdctConfig& cfg);

  // x[B, T] -> X[B, N, K], N = ceil(T / K).
  Tensor<T> analysis(const Tensor<T>& x) const;
  // X[B, N, K] -> x[B, N * K].
  Tensor<T> synthesis(const Tensor<T>& spectrum) const;

  const MdctConfig& config() const { return cfg_; }

 private:
  MdctConfig cfg_;
  Tensor<T> analysis_;   // [2K, K]
  Tensor<T> synthesis_;  // [K, 2K]
};

template <typename T>
class MelOp {
 public:
  explicit MelOp(const MelConfig& cfg);

  // x[B, T] -> log-mel[B, ceil(T / hop), mel_bins].
  Tensor<T> operator()(const Tensor<T>& x) const;

  const MelConfig& config() const { return cfg_; }

 private:
  MelConfig cfg_;
  Tensor<T> window_;      // [fft]
  Tensor<T> filterbank_;  // [fft/2 + 1, mel_bins]
};

}  // namespace mdctcodec
