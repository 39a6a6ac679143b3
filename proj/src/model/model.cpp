#include "mdctcodec/model.hpp"

#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

// [B, L, C] <-> [B, C, L]
template <typename T>
Tensor<T> swap_last(const Tensor<T>& x) {
  return transpose(x, 1, 2);
}

Conv1dSpec conv_spec(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride = 1,
                     std::size_t groups = 1) {
  Conv1dSpec s;
  s.in_channels = cin;
  s.out_channels = cout;
  s.kernel_size = k;
  s.stride = stride;
  s.groups = groups;
  return s;
}

}  // namespace

void ModelConfig::validate() const {
  require(spectrum_bins > 0 && hidden_width > 0 && block_intermediate > 0 && latent_dim > 0 &&
              downsample_rate > 0 && kernel_size > 0,
          ErrorKind::kInvalidConfig, "model sizes must be positive");
}

template <typename T>
ConvNextBlock<T>::ConvNextBlock(std::size_t width, std::size_t intermediate, std::size_t kernel,
                                std::mt19937_64& rng)
    : dwconv(conv_spec(width, width, kernel, 1, width), rng),
      norm(width),
      pw1(width, intermediate, rng),
      grn(intermediate),
      pw2(intermediate, width, rng) {
  // Zero output projection: the residual branch starts switched off.
  std::fill(pw2.weight.data().begin(), pw2.weight.data().end(), T(0));
}

template <typename T>
Tensor<T> ConvNextBlock<T>::forward(const Tensor<T>& x) const {
  require(x.dim() == 3 && x.extent(2) == norm.gamma.numel(), ErrorKind::kShape,
          "block expects x[B, L, " + std::to_string(norm.gamma.numel()) + "], got " +
              shape_string(x.shape()));
  auto h = swap_last(dwconv.forward(swap_last(x)));
  h = pw1.forward(norm.forward(h));
  h = pw2.forward(grn.forward(gelu(h)));
  return add(x, h);
}

template <typename T>
void ConvNextBlock<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  dwconv.collect(prefix + ".dwconv", out);
  norm.collect(prefix + ".norm", out);
  pw1.collect(prefix + ".pw1", out);
  grn.collect(prefix + ".grn", out);
  pw2.collect(prefix + ".pw2", out);
}

template <typename T>
Encoder<T>::Encoder(const ModelConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg.validate();
  const std::size_t h = cfg.hidden_width, k = cfg.kernel_size;
  conv_in = Conv1d<T>(conv_spec(cfg.spectrum_bins, h, k), rng);
  norm_in = LayerNorm<T>(h);
  for (std::size_t i = 0; i < cfg.num_blocks; ++i)
    blocks.emplace_back(h, cfg.block_intermediate, k, rng);
  norm_out = LayerNorm<T>(h);
  proj = Linear<T>(h, h, rng);
  conv_down = Conv1d<T>(conv_spec(h, h, k, cfg.downsample_rate), rng);
  conv_out = Conv1d<T>(conv_spec(h, cfg.latent_dim, k), rng);
}

template <typename T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& spectrum) const {
  require(spectrum.dim() == 3 && spectrum.extent(2) == cfg_.spectrum_bins, ErrorKind::kShape,
          "encoder expects X[B, N, " + std::to_string(cfg_.spectrum_bins) + "], got " +
              shape_string(spectrum.shape()));
  require(spectrum.extent(1) % cfg_.downsample_rate == 0, ErrorKind::kContract,
          "encoder needs N divisible by R: N=" + std::to_string(spectrum.extent(1)) +
              " R=" + std::to_string(cfg_.downsample_rate));
  auto h = norm_in.forward(swap_last(conv_in.forward(swap_last(spectrum))));
  for (const auto& b : blocks) h = b.forward(h);
  h = proj.forward(norm_out.forward(h));
  h = conv_out.forward(conv_down.forward(swap_last(h)));
  return swap_last(h);
}

template <typename T>
void Encoder<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  conv_in.collect(prefix + ".conv_in", out);
  norm_in.collect(prefix + ".norm_in", out);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  norm_out.collect(prefix + ".norm_out", out);
  proj.collect(prefix + ".proj", out);
  conv_down.collect(prefix + ".conv_down", out);
  conv_out.collect(prefix + ".conv_out", out);
}

template <typename T>
Decoder<T>::Decoder(const ModelConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg.validate();
  const std::size_t h = cfg.hidden_width, k = cfg.kernel_size;
  conv_in = Conv1d<T>(conv_spec(cfg.latent_dim, h, k), rng);
  conv_up = ConvTranspose1d<T>(conv_spec(h, h, k, cfg.downsample_rate), rng);
  norm_in = LayerNorm<T>(h);
  for (std::size_t i = 0; i < cfg.num_blocks; ++i)
    blocks.emplace_back(h, cfg.block_intermediate, k, rng);
  norm_out = LayerNorm<T>(h);
  proj = Linear<T>(h, h, rng);
  conv_out = Conv1d<T>(conv_spec(h, cfg.spectrum_bins, k), rng);
}

template <typename T>
Tensor<T> Decoder<T>::forward(const Tensor<T>& code) const {
  require(code.dim() == 3 && code.extent(2) == cfg_.latent_dim, ErrorKind::kShape,
          "decoder expects C[B, L, " + std::to_string(cfg_.latent_dim) + "], got " +
              shape_string(code.shape()));
  auto h = conv_up.forward(conv_in.forward(swap_last(code)));
  h = norm_in.forward(swap_last(h));
  for (const auto& b : blocks) h = b.forward(h);
  h = proj.forward(norm_out.forward(h));
  return swap_last(conv_out.forward(swap_last(h)));
}

template <typename T>
void Decoder<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  conv_in.collect(prefix + ".conv_in", out);
  conv_up.collect(prefix + ".conv_up", out);
  norm_in.collect(prefix + ".norm_in", out);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  norm_out.collect(prefix + ".norm_out", out);
  proj.collect(prefix + ".proj", out);
  conv_out.collect(prefix + ".conv_out", out);
}

template class ConvNextBlock<float>;
template class ConvNextBlock<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;

}  // namespace mdctcodec
