#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mdctcodec/tensor.hpp"

namespace testing_support {

using mdctcodec::Shape;
using Tensor = mdctcodec::Tensor<double>;
using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0,
                            bool requires_grad = true) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(mdctcodec::shape_numel(shape));
  for (double& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// ||a - n||_inf / max(||n||_inf, 1e-10)
inline double relative_error(const std::vector<double>& analytic,
                             const std::vector<double>& numeric) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    ref = std::max(ref, std::abs(numeric[i]));
  }
  return diff / std::max(ref, 1e-10);
}

// Worst relative error over all inputs between backward() and central
// differences of the scalar f. `probes` > 0 limits checked entries per input.
inline double gradient_error(const Fn& f, std::vector<Tensor> inputs, double step = 1e-6,
                             std::size_t probes = 0, unsigned seed = 7) {
  for (auto& t : inputs) t.zero_grad();
  f(inputs).backward();
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    const auto analytic_all = t.grad();
    std::vector<std::size_t> idx(t.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (probes > 0 && probes < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(probes);
    }
    std::vector<double> analytic, numeric;
    mdctcodec::NoGradGuard guard;
    for (std::size_t i : idx) {
      const double saved = t.data()[i];
      t.data()[i] = saved + step;
      const double up = f(inputs).item();
      t.data()[i] = saved - step;
      const double down = f(inputs).item();
      t.data()[i] = saved;
      analytic.push_back(analytic_all[i]);
      numeric.push_back((up - down) / (2.0 * step));
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

// Random fixed projection so that vector-valued outputs become a scalar loss.
inline Tensor project(const Tensor& y, unsigned seed = 99) {
  std::mt19937_64 rng(seed);
  const auto w = random_tensor(y.shape(), rng, 1.0, false);
  return mdctcodec::sum(mdctcodec::mul(y, w));
}

}  // namespace testing_support
