#include "mdctcodec/optim.hpp"

#include <cmath>

namespace mdctcodec {

template <typename T>
AdamW<T>::AdamW(NamedTensors<T> params, const AdamWConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.numel(), T(0));
    v_.emplace_back(p.numel(), T(0));
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

template <typename T>
void AdamW<T>::set_requires_grad(bool flag) {
  for (auto& [name, p] : params_) p.set_requires_grad(flag);
}

template <typename T>
void AdamW<T>::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T decay = static_cast<T>(1.0 - lr * cfg_.weight_decay);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    if (!p.has_grad()) continue;
    auto data = p.data();
    const auto g = p.mutable_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      data[j] *= decay;
      data[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_bc2 + eps);
    }
  }
}

double lr_schedule(double lr0, double decay, std::uint64_t epoch) {
  return lr0 * std::pow(decay, static_cast<double>(epoch));
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace mdctcodec
