#include "mdctcodec/discriminator.hpp"

#include "mdctcodec/error.hpp"

namespace mdctcodec {

void DiscConfig::validate() const {
  require(!resolutions.empty(), ErrorKind::kInvalidConfig, "discriminator needs a resolution");
  for (auto k : resolutions)
    require(k > 0, ErrorKind::kInvalidConfig, "discriminator resolutions must be positive");
  require(channels > 0, ErrorKind::kInvalidConfig, "discriminator channels must be positive");
  for (const auto& l : hidden)
    require(l.kernel_t > 0 && l.kernel_f > 0 && l.stride_t > 0 && l.stride_f > 0,
            ErrorKind::kInvalidConfig, "discriminator layer geometry must be positive");
}

template <typename T>
SubDiscriminator<T>::SubDiscriminator(std::size_t bins, const DiscConfig& cfg, std::mt19937_64& rng)
    : mdct_(MdctConfig::with_bins(bins)) {
  std::size_t in = 1;
  const auto add_layer = [&](const ConvLayerShape& s, std::size_t out) {
    Conv2dSpec spec{in, out, s.kernel_t, s.kernel_f, s.stride_t, s.stride_f};
    layers.emplace_back(spec, rng);
    in = out;
  };
  for (const auto& s : cfg.hidden) add_layer(s, cfg.channels);
  add_layer(cfg.output, 1);
}

template <typename T>
DiscOutput<T> SubDiscriminator<T>::forward(const Tensor<T>& x) const {
  require(x.dim() == 2 && x.extent(1) >= bins(), ErrorKind::kContract,
          "discriminator input needs at least " + std::to_string(bins()) + " samples, got " +
              shape_string(x.shape()));
  const auto spec = mdct_.analysis(x);
  auto h = reshape(spec, {spec.extent(0), 1, spec.extent(1), spec.extent(2)});
  DiscOutput<T> out;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = leaky_relu(layers[i].forward(h), static_cast<T>(kLeakySlope));
    out.features.push_back(h);
  }
  out.score = layers.back().forward(h);
  return out;
}

template <typename T>
void SubDiscriminator<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(prefix + ".conv" + std::to_string(i), out);
}

template <typename T>
MdctDiscriminator<T>::MdctDiscriminator(const DiscConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  for (auto k : cfg.resolutions) subs.emplace_back(k, cfg, rng);
}

template <typename T>
std::vector<DiscOutput<T>> MdctDiscriminator<T>::forward(const Tensor<T>& x) const {
  std::vector<DiscOutput<T>> out;
  out.reserve(subs.size());
  for (const auto& s : subs) out.push_back(s.forward(x));
  return out;
}

template <typename T>
void MdctDiscriminator<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  for (std::size_t i = 0; i < subs.size(); ++i)
    subs[i].collect(prefix + ".sub" + std::to_string(i), out);
}

template class SubDiscriminator<float>;
template class SubDiscriminator<double>;
template class MdctDiscriminator<float>;
template class MdctDiscriminator<double>;

}  // namespace mdctcodec
