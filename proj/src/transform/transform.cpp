#include "mdctcodec/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mdctcodec/detail/blas.hpp"
#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

constexpr double kPi = std::numbers::pi;

double mdct_phase(std::size_t l, std::size_t k, std::size_t bins) {
  const double kk = static_cast<double>(bins);
  return kPi / kk * (static_cast<double>(l) + 0.5 + kk / 2.0) * (static_cast<double>(k) + 0.5);
}

// Zero-pads `x` so frame n covers padded[n*hop, n*hop + 2*hop).
std::vector<double> pad_for_frames(std::span<const double> x, std::size_t frames,
                                   std::size_t hop, std::size_t left, std::size_t window) {
  std::vector<double> padded((frames == 0 ? 0 : (frames - 1) * hop + window), 0.0);
  const std::size_t n = std::min(x.size(), padded.size() > left ? padded.size() - left : 0);
  std::copy_n(x.begin(), n, padded.begin() + static_cast<std::ptrdiff_t>(left));
  return padded;
}

}  // namespace

MdctConfig MdctConfig::with_bins(std::size_t bins) {
  MdctConfig cfg{2 * bins, bins, bins};
  cfg.validate();
  return cfg;
}

void MdctConfig::validate() const {
  require(bins > 0 && frame_shift > 0 && frame_length > 0, ErrorKind::kInvalidConfig,
          "MDCT config fields must be positive");
  require(frame_shift == bins && frame_length == 2 * bins, ErrorKind::kInvalidConfig,
          "MDCT config requires frame_shift == bins == frame_length / 2");
}

std::size_t MdctConfig::frame_count(std::size_t samples) const {
  return (samples + frame_shift - 1) / frame_shift;
}

std::vector<double> make_window(std::size_t bins) {
  require(bins > 0, ErrorKind::kInvalidConfig, "window requires K >= 1");
  const std::size_t len = 2 * bins;
  std::vector<double> w(len);
  for (std::size_t l = 0; l < len; ++l) {
    w[l] = std::sin(kPi / static_cast<double>(len) * (static_cast<double>(l) + 0.5));
  }
  return w;
}

MdctBasis::MdctBasis(std::size_t bins)
    : bins_(bins), analysis_(2 * bins * bins), synthesis_(2 * bins * bins) {
  const auto w = make_window(bins);
  const std::size_t len = 2 * bins;
  const double inv = kSynthesisScale / static_cast<double>(bins);
  for (std::size_t l = 0; l < len; ++l) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double c = std::cos(mdct_phase(l, k, bins));
      analysis_[l * bins + k] = w[l] * c;
      synthesis_[k * len + l] = inv * w[l] * c;
    }
  }
}

MdctSpectrum mdct(const Waveform& x, const MdctConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.bins;
  const std::size_t frames = cfg.frame_count(x.samples.size());
  const MdctBasis basis(bins);

  MdctSpectrum out{Matrix(frames, bins), cfg, x.sample_rate};
  if (frames == 0) return out;

  const std::size_t len = 2 * bins;
  const auto padded = pad_for_frames(x.samples, frames, bins, cfg.pad_left(), len);
  std::vector<double> framed(frames * len);
  for (std::size_t n = 0; n < frames; ++n) {
    std::copy_n(padded.begin() + static_cast<std::ptrdiff_t>(n * bins), len,
                framed.begin() + static_cast<std::ptrdiff_t>(n * len));
  }
  detail::gemm(false, false, frames, bins, len, 1.0, framed.data(), len,
               basis.analysis().data(), bins, 0.0, out.values.values.data(), bins);
  return out;
}

Waveform imdct(const MdctSpectrum& spectrum) {
  spectrum.config.validate();
  const std::size_t bins = spectrum.config.bins;
  require(spectrum.values.cols == bins, ErrorKind::kShape,
          "spectrum width does not match MDCT config");
  const std::size_t frames = spectrum.frames();
  Waveform out{std::vector<double>(frames * bins, 0.0), spectrum.sample_rate};
  if (frames == 0) return out;

  const MdctBasis basis(bins);
  const std::size_t len = 2 * bins;
  std::vector<double> blocks(frames * len);
  detail::gemm(false, false, frames, len, bins, 1.0, spectrum.values.values.data(), bins,
               basis.synthesis().data(), len, 0.0, blocks.data(), len);

  std::vector<double> acc((frames + 1) * bins, 0.0);
  for (std::size_t n = 0; n < frames; ++n) {
    const double* blk = blocks.data() + n * len;
    double* dst = acc.data() + n * bins;
    for (std::size_t l = 0; l < len; ++l) dst[l] += blk[l];
  }
  std::copy_n(acc.begin() + static_cast<std::ptrdiff_t>(spectrum.config.pad_left()),
              out.samples.size(), out.samples.begin());
  return out;
}

void MelConfig::validate() const {
  require(sample_rate > 0, ErrorKind::kInvalidConfig, "mel sample_rate must be positive");
  require(fft_size > 0 && hop > 0 && mel_bins > 0, ErrorKind::kInvalidConfig,
          "mel fft_size, hop and mel_bins must be positive");
  require(hop <= fft_size, ErrorKind::kInvalidConfig, "mel hop must not exceed fft_size");
  require(f_min >= 0.0 && f_min < f_max, ErrorKind::kInvalidConfig,
          "mel requires 0 <= f_min < f_max");
  require(f_max <= sample_rate / 2.0, ErrorKind::kInvalidConfig,
          "mel f_max exceeds the Nyquist frequency");
  require(log_floor > 0.0, ErrorKind::kInvalidConfig, "mel log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const std::size_t nbins = cfg.spectrum_bins();
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(cfg.mel_bins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(cfg.mel_bins + 1));
  }
  std::vector<double> fb(cfg.mel_bins * nbins, 0.0);
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.fft_size);
  for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t b = 0; b < nbins; ++b) {
      const double f = bin_hz * static_cast<double>(b);
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb[m * nbins + b] = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

std::vector<double> hann_window(std::size_t size) {
  std::vector<double> w(size);
  for (std::size_t i = 0; i < size; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(size));
  }
  return w;
}

Matrix mel_spectrogram(const Waveform& x, const MelConfig& cfg) {
  cfg.validate();
  require(!x.samples.empty(), ErrorKind::kContract, "mel spectrogram of empty waveform");
  require(x.sample_rate == cfg.sample_rate, ErrorKind::kInvalidConfig,
          "waveform rate differs from mel config rate");
  const std::size_t fft = cfg.fft_size;
  const std::size_t nbins = cfg.spectrum_bins();
  const std::size_t frames = cfg.frame_count(x.samples.size());
  const auto padded = pad_for_frames(x.samples, frames, cfg.hop, cfg.pad_left(), fft);

  // Windowed frames and a direct real DFT against cos/sin kernels.
  const auto win = hann_window(fft);
  std::vector<double> framed(frames * fft);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t i = 0; i < fft; ++i) framed[n * fft + i] = win[i] * padded[n * cfg.hop + i];
  }
  std::vector<double> cos_k(fft * nbins), sin_k(fft * nbins);
  for (std::size_t i = 0; i < fft; ++i) {
    for (std::size_t b = 0; b < nbins; ++b) {
      // Reduce the phase index mod fft to keep the argument small.
      const double ph = 2.0 * kPi * static_cast<double>((i * b) % fft) / static_cast<double>(fft);
      cos_k[i * nbins + b] = std::cos(ph);
      sin_k[i * nbins + b] = -std::sin(ph);
    }
  }
  std::vector<double> re(frames * nbins), im(frames * nbins);
  detail::gemm(false, false, frames, nbins, fft, 1.0, framed.data(), fft, cos_k.data(), nbins,
               0.0, re.data(), nbins);
  detail::gemm(false, false, frames, nbins, fft, 1.0, framed.data(), fft, sin_k.data(), nbins,
               0.0, im.data(), nbins);
  std::vector<double> mag(frames * nbins);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::sqrt(re[i] * re[i] + im[i] * im[i] + kMagnitudeEpsilon);
  }

  const auto fb = mel_filterbank(cfg);
  Matrix out(frames, cfg.mel_bins);
  detail::gemm(false, true, frames, cfg.mel_bins, nbins, 1.0, mag.data(), nbins, fb.data(),
               nbins, 0.0, out.values.data(), cfg.mel_bins);
  for (double& v : out.values) v = std::log(std::max(v, cfg.log_floor));
  return out;
}

}  // namespace mdctcodec
