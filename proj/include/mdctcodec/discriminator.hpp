#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mdctcodec/layers.hpp"
#include "mdctcodec/spectral.hpp"

namespace mdctcodec {

struct ConvLayerShape {
  std::size_t kernel_t;
  std::size_t kernel_f;
  std::size_t stride_t;
  std::size_t stride_f;
};

struct DiscConfig {
  // MDCT bins per sub-discriminator, coarse to fine.
  std::vector<std::size_t> resolutions{200, 50, 20};
  std::size_t channels = 64;
  // Hidden layers (each followed by LeakyReLU), then the 1-channel output conv.
  std::vector<ConvLayerShape> hidden{{7, 5, 1, 1}, {5, 3, 2, 2}, {5, 3, 2, 2}, {3, 3, 2, 2}, {3, 3, 2, 2}};
  ConvLayerShape output{3, 3, 1, 1};

  void validate() const;
  bool operator==(const DiscConfig&) const = default;
};

template <typename T>
struct DiscOutput {
  Tensor<T> score;                 // [B, 1, H', W']
  std::vector<Tensor<T>> features; // post-activation hidden maps
};

template <typename T>
class SubDiscriminator {
 public:
  SubDiscriminator(std::size_t bins, const DiscConfig& cfg, std::mt19937_64& rng);

  // x[B, T] -> score map and features.
  DiscOutput<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  std::size_t bins() const { return mdct_.config().bins; }

  std::vector<Conv2d<T>> layers;

 private:
  MdctOp<T> mdct_;
};

template <typename T>
class MdctDiscriminator {
 public:
  MdctDiscriminator() = default;
  MdctDiscriminator(const DiscConfig& cfg, std::mt19937_64& rng);

  std::vector<DiscOutput<T>> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  std::vector<SubDiscriminator<T>> subs;
};

}  // namespace mdctcodec
