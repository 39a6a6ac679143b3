#pragma once

#include <vector>

#include "mdctcodec/tensor.hpp"

namespace mdctcodec {

struct LossWeights {
  double adv = 1.0;
  double fm = 1.0;
  double mdct = 250.0;
  double mel = 45.0;
  double cb = 10.0;
  double com = 0.25;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// Sum over maps of mean(max(0, 1 - s)).
template <typename T>
Tensor<T> adv_loss_generator(const std::vector<Tensor<T>>& fake_scores);

// Sum over maps of mean(max(0, 1 - real)) + mean(max(0, 1 + fake)).
template <typename T>
Tensor<T> adv_loss_discriminator(const std::vector<Tensor<T>>& real_scores,
                                 const std::vector<Tensor<T>>& fake_scores);

// Sum over sub-discriminators and layers of mean |fake - real|; real is detached.
template <typename T>
Tensor<T> feature_matching(const std::vector<std::vector<Tensor<T>>>& real_features,
                           const std::vector<std::vector<Tensor<T>>>& fake_features);

// Mean squared error against a detached target.
template <typename T>
Tensor<T> mdct_loss(const Tensor<T>& predicted, const Tensor<T>& target);

// mean |d| + mean d^2 against a detached target.
template <typename T>
Tensor<T> mel_loss(const Tensor<T>& predicted, const Tensor<T>& target);

template <typename T>
struct GeneratorLossParts {
  Tensor<T> adv, fm, mdct, mel, cb, com;  // undefined parts count as zero
};

template <typename T>
Tensor<T> total_generator_loss(const GeneratorLossParts<T>& parts, const LossWeights& w);

}  // namespace mdctcodec
