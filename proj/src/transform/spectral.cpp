#include "mdctcodec/spectral.hpp"

#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

template <typename T>
std::vector<T> cast(std::span<const double> v) {
  return std::vector<T>(v.begin(), v.end());
}

}  // namespace

template <typename T>
MdctOp<T>::MdctOp(const MdctConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const MdctBasis basis(cfg.bins);
  analysis_ = Tensor<T>({2 * cfg.bins, cfg.bins}, cast<T>(basis.analysis()));
  synthesis_ = Tensor<T>({cfg.bins, 2 * cfg.bins}, cast<T>(basis.synthesis()));
}

template <typename T>
Tensor<T> MdctOp<T>::analysis(const Tensor<T>& x) const {
  require(x.dim() == 2, ErrorKind::kShape, "MDCT expects x[B, T], got " + shape_string(x.shape()));
  const std::size_t frames = cfg_.frame_count(x.extent(1));
  const auto framed = frame_signal(x, 2 * cfg_.bins, cfg_.bins, cfg_.pad_left(), frames);
  return matmul(framed, analysis_);
}

template <typename T>
Tensor<T> MdctOp<T>::synthesis(const Tensor<T>& spectrum) const {
  require(spectrum.dim() == 3 && spectrum.extent(2) == cfg_.bins, ErrorKind::kShape,
          "IMDCT expects X[B, N, " + std::to_string(cfg_.bins) + "], got " +
              shape_string(spectrum.shape()));
  const auto blocks = matmul(spectrum, synthesis_);
  return overlap_add(blocks, cfg_.bins, cfg_.pad_left(), spectrum.extent(1) * cfg_.bins);
}

template <typename T>
MelOp<T>::MelOp(const MelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  window_ = Tensor<T>({cfg.fft_size}, cast<T>(hann_window(cfg.fft_size)));
  const auto fb = mel_filterbank(cfg);
  const std::size_t bins = cfg.spectrum_bins();
  std::vector<T> fbt(bins * cfg.mel_bins);
  for (std::size_t m = 0; m < cfg.mel_bins; ++m)
    for (std::size_t k = 0; k < bins; ++k) fbt[k * cfg.mel_bins + m] = static_cast<T>(fb[m * bins + k]);
  filterbank_ = Tensor<T>({bins, cfg.mel_bins}, std::move(fbt));
}

template <typename T>
Tensor<T> MelOp<T>::operator()(const Tensor<T>& x) const {
  require(x.dim() == 2 && x.extent(1) > 0, ErrorKind::kShape,
          "mel expects non-empty x[B, T], got " + shape_string(x.shape()));
  const std::size_t frames = cfg_.frame_count(x.extent(1));
  const auto framed = frame_signal(x, cfg_.fft_size, cfg_.hop, cfg_.pad_left(), frames);
  const auto mag = rfft_magnitude(mul(framed, window_));
  return log_clamped(matmul(mag, filterbank_), static_cast<T>(cfg_.log_floor));
}

template class MdctOp<float>;
template class MdctOp<double>;
template class MelOp<float>;
template class MelOp<double>;

}  // namespace mdctcodec
