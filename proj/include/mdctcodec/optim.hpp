#pragma once

#include <cstdint>
#include <vector>

#include "mdctcodec/layers.hpp"

namespace mdctcodec {

struct AdamWConfig {
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay with bias-corrected moments. Parameters without an
// accumulated gradient are left untouched by a step.
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(NamedTensors<T> params, const AdamWConfig& cfg);

  void zero_grad();
  void step(double lr);

  const NamedTensors<T>& params() const { return params_; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }

  // Freezes or unfreezes every parameter.
  void set_requires_grad(bool flag);

 private:
  NamedTensors<T> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t t_ = 0;
};

// lr0 * decay^epoch
double lr_schedule(double lr0, double decay, std::uint64_t epoch);

}  // namespace mdctcodec
