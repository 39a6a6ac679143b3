#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mdctcodec/tensor.hpp"

namespace mdctcodec {

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

inline constexpr double kInitStddev = 0.02;
inline constexpr double kNormEpsilon = 1e-6;
inline constexpr double kLeakySlope = 0.1;

// N(0, stddev) leaf tensor that requires grad.
template <typename T>
Tensor<T> normal_parameter(Shape shape, double stddev, std::mt19937_64& rng);

struct Conv1dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t groups = 1;
  bool same_padding = true;
  // Used only when same_padding is false.
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;

  void validate() const;
  bool depthwise() const { return groups == in_channels && groups == out_channels; }
  Conv1dGeometry geometry(std::size_t input_length) const;
};

template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const Conv1dSpec& spec, std::mt19937_64& rng);

  // x[B, Cin, L] -> [B, Cout, L'] with L' = ceil(L / stride) under same padding.
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  const Conv1dSpec& spec() const { return spec_; }
  Tensor<T> weight;  // [Cout, Cin/groups, k]
  Tensor<T> bias;    // [Cout]

 private:
  Conv1dSpec spec_;
};

// Upsampling counterpart of a strided same-padded Conv1d: [B, Cin, L] ->
// [B, Cout, L * stride], the exact adjoint of that convolution.
template <typename T>
class ConvTranspose1d {
 public:
  ConvTranspose1d() = default;
  ConvTranspose1d(const Conv1dSpec& spec, std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  const Conv1dSpec& spec() const { return spec_; }
  Tensor<T> weight;  // [Cin, Cout, k]
  Tensor<T> bias;    // [Cout]

 private:
  Conv1dSpec spec_;
};

struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_t = 1;
  std::size_t kernel_f = 1;
  std::size_t stride_t = 1;
  std::size_t stride_f = 1;

  void validate() const;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const Conv2dSpec& spec, std::mt19937_64& rng);

  // Same padding: output extents ceil(H / stride_t) x ceil(W / stride_f).
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  const Conv2dSpec& spec() const { return spec_; }
  Tensor<T> weight;  // [Cout, Cin, kt, kf]
  Tensor<T> bias;

 private:
  Conv2dSpec spec_;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t features, double eps = kNormEpsilon);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  Tensor<T> gamma;  // ones
  Tensor<T> beta;   // zeros

 private:
  double eps_ = kNormEpsilon;
};

// Global response normalization over x[B, L, F]:
//   G = ||x[b, :, f]||_2,  N = G / (mean_f G + eps),  y = gamma (x N) + beta + x.
template <typename T>
class Grn {
 public:
  Grn() = default;
  explicit Grn(std::size_t features, double eps = kNormEpsilon);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  Tensor<T> gamma;  // zeros
  Tensor<T> beta;   // zeros

 private:
  double eps_ = kNormEpsilon;
};

}  // namespace mdctcodec
