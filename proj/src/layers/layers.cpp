#include "mdctcodec/layers.hpp"

#include "mdctcodec/error.hpp"

namespace mdctcodec {

template <typename T>
Tensor<T> normal_parameter(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> values(shape_numel(shape));
  for (T& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(values), true);
}

void Conv1dSpec::validate() const {
  require(in_channels > 0 && out_channels > 0 && kernel_size > 0 && stride > 0 && dilation > 0,
          ErrorKind::kInvalidConfig, "conv1d spec fields must be positive");
  require(groups > 0 && in_channels % groups == 0 && out_channels % groups == 0,
          ErrorKind::kInvalidConfig, "conv1d groups must divide both channel counts");
}

Conv1dGeometry Conv1dSpec::geometry(std::size_t input_length) const {
  Conv1dGeometry g;
  if (same_padding) {
    g = same_padding_1d(input_length, kernel_size, stride, dilation);
  } else {
    g.stride = stride;
    g.dilation = dilation;
    g.pad_left = pad_left;
    g.pad_right = pad_right;
  }
  g.groups = groups;
  return g;
}

template <typename T>
Conv1d<T>::Conv1d(const Conv1dSpec& spec, std::mt19937_64& rng) : spec_(spec) {
  spec_.validate();
  weight = normal_parameter<T>({spec.out_channels, spec.in_channels / spec.groups, spec.kernel_size},
                               kInitStddev, rng);
  bias = Tensor<T>::zeros({spec.out_channels}, true);
}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& x) const {
  require(x.dim() == 3 && x.extent(1) == spec_.in_channels, ErrorKind::kShape,
          "conv1d expects " + std::to_string(spec_.in_channels) + " input channels, got " +
              shape_string(x.shape()));
  return conv1d(x, weight, bias, spec_.geometry(x.extent(2)));
}

template <typename T>
void Conv1d<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

template <typename T>
ConvTranspose1d<T>::ConvTranspose1d(const Conv1dSpec& spec, std::mt19937_64& rng) : spec_(spec) {
  spec_.validate();
  require(spec.groups == 1 && spec.same_padding, ErrorKind::kInvalidConfig,
          "transposed conv1d supports groups == 1 with same padding");
  weight = normal_parameter<T>({spec.in_channels, spec.out_channels, spec.kernel_size},
                               kInitStddev, rng);
  bias = Tensor<T>::zeros({spec.out_channels}, true);
}

template <typename T>
Tensor<T> ConvTranspose1d<T>::forward(const Tensor<T>& x) const {
  require(x.dim() == 3 && x.extent(1) == spec_.in_channels, ErrorKind::kShape,
          "transposed conv1d expects " + std::to_string(spec_.in_channels) +
              " input channels, got " + shape_string(x.shape()));
  const std::size_t out_len = x.extent(2) * spec_.stride;
  return conv_transpose1d(x, weight, bias, spec_.geometry(out_len), out_len);
}

template <typename T>
void ConvTranspose1d<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

void Conv2dSpec::validate() const {
  require(in_channels > 0 && out_channels > 0 && kernel_t > 0 && kernel_f > 0 && stride_t > 0 &&
              stride_f > 0,
          ErrorKind::kInvalidConfig, "conv2d spec fields must be positive");
}

template <typename T>
Conv2d<T>::Conv2d(const Conv2dSpec& spec, std::mt19937_64& rng) : spec_(spec) {
  spec_.validate();
  weight = normal_parameter<T>({spec.out_channels, spec.in_channels, spec.kernel_t, spec.kernel_f},
                               kInitStddev, rng);
  bias = Tensor<T>::zeros({spec.out_channels}, true);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  require(x.dim() == 4 && x.extent(1) == spec_.in_channels, ErrorKind::kShape,
          "conv2d expects " + std::to_string(spec_.in_channels) + " input channels, got " +
              shape_string(x.shape()));
  const auto geom = same_padding_2d(x.extent(2), x.extent(3), spec_.kernel_t, spec_.kernel_f,
                                    spec_.stride_t, spec_.stride_f);
  return conv2d(x, weight, bias, geom);
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

template <typename T>
Linear<T>::Linear(std::size_t in_features, std::size_t out_features, std::mt19937_64& rng) {
  require(in_features > 0 && out_features > 0, ErrorKind::kInvalidConfig,
          "linear layer sizes must be positive");
  weight = normal_parameter<T>({out_features, in_features}, kInitStddev, rng);
  bias = Tensor<T>::zeros({out_features}, true);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

template <typename T>
LayerNorm<T>::LayerNorm(std::size_t features, double eps)
    : gamma(Tensor<T>::full({features}, T(1), true)),
      beta(Tensor<T>::zeros({features}, true)),
      eps_(eps) {
  require(features > 0, ErrorKind::kInvalidConfig, "layer norm width must be positive");
}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const Tensor<T>& x) const {
  return layer_norm(x, gamma, beta, static_cast<T>(eps_));
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

template <typename T>
Grn<T>::Grn(std::size_t features, double eps)
    : gamma(Tensor<T>::zeros({features}, true)), beta(Tensor<T>::zeros({features}, true)), eps_(eps) {
  require(features > 0, ErrorKind::kInvalidConfig, "GRN width must be positive");
}

template <typename T>
Tensor<T> Grn<T>::forward(const Tensor<T>& x) const {
  require(x.dim() == 3 && x.extent(2) == gamma.numel(), ErrorKind::kShape,
          "GRN expects x[B, L, " + std::to_string(gamma.numel()) + "], got " + shape_string(x.shape()));
  const auto energy = sqrt(sum(square(x), 1, true));                 // [B, 1, F]
  const auto scale = add_scalar(mean(energy, 2, true), static_cast<T>(eps_));  // [B, 1, 1]
  const auto response = div(energy, scale);
  return add(add(mul(gamma, mul(x, response)), beta), x);
}

template <typename T>
void Grn<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

template Tensor<float> normal_parameter<float>(Shape, double, std::mt19937_64&);
template Tensor<double> normal_parameter<double>(Shape, double, std::mt19937_64&);
template class Conv1d<float>;
template class Conv1d<double>;
template class ConvTranspose1d<float>;
template class ConvTranspose1d<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class Grn<float>;
template class Grn<double>;

}  // namespace mdctcodec
