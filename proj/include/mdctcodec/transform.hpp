#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mdctcodec {

// Frame geometry of a critically sampled MDCT: hop == bins == frame_length / 2.
struct MdctConfig {
  std::size_t frame_length = 80;
  std::size_t frame_shift = 40;
  std::size_t bins = 40;

  static MdctConfig with_bins(std::size_t bins);
  void validate() const;

  // Zeros added in front of the hop-aligned signal before framing.
  std::size_t pad_left() const { return bins / 2; }
  std::size_t pad_right() const { return bins - pad_left(); }
  // Number of spectrum rows for a waveform of `samples` samples.
  std::size_t frame_count(std::size_t samples) const;

  bool operator==(const MdctConfig&) const = default;
};

struct Waveform {
  std::vector<double> samples;
  std::uint32_t sample_rate = 48000;
};

// Dense row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

struct MdctSpectrum {
  Matrix values;  // N x K
  MdctConfig config;
  std::uint32_t sample_rate = 48000;

  std::size_t frames() const { return values.rows; }
  std::size_t bins() const { return values.cols; }
};

// Half-sine window w[l] = sin(pi/(2K) (l + 1/2)), l = 0..2K-1.
std::vector<double> make_window(std::size_t bins);

// Precomputed windowed cosine kernels.
//   analysis[l*K + k]  = w[l] cos(pi/K (l + 1/2 + K/2)(k + 1/2))       (2K x K)
//   synthesis[k*2K + l] = scale/K * w[l] cos(pi/K (l + 1/2 + K/2)(k + 1/2)) (K x 2K)
class MdctBasis {
 public:
  // Round-trip gain of window-analysis-synthesis-window with the 1/K inverse.
  static constexpr double kSynthesisScale = 2.0;

  explicit MdctBasis(std::size_t bins);

  std::size_t bins() const { return bins_; }
  std::span<const double> analysis() const { return analysis_; }
  std::span<const double> synthesis() const { return synthesis_; }

 private:
  std::size_t bins_;
  std::vector<double> analysis_;
  std::vector<double> synthesis_;
};

MdctSpectrum mdct(const Waveform& x, const MdctConfig& cfg);
// Output has exactly frames() * frame_shift samples.
Waveform imdct(const MdctSpectrum& spectrum);

struct MelConfig {
  std::uint32_t sample_rate = 48000;
  std::size_t fft_size = 1024;
  std::size_t hop = 40;
  std::size_t mel_bins = 80;
  double f_min = 0.0;
  double f_max = 24000.0;
  double log_floor = 1e-5;

  void validate() const;
  std::size_t spectrum_bins() const { return fft_size / 2 + 1; }
  std::size_t pad_left() const { return (fft_size - hop) / 2; }
  std::size_t pad_right() const { return fft_size - hop - pad_left(); }
  std::size_t frame_count(std::size_t samples) const {
    return (samples + hop - 1) / hop;
  }
};

// Added inside the magnitude square root so the gradient stays finite at 0.
inline constexpr double kMagnitudeEpsilon = 1e-18;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// HTK-scale triangular filterbank, mel_bins x (fft_size/2 + 1), row-major.
std::vector<double> mel_filterbank(const MelConfig& cfg);
// Periodic Hann window of fft_size samples.
std::vector<double> hann_window(std::size_t size);

// Log-mel spectrogram, frames x mel_bins; frames == ceil(T / hop).
Matrix mel_spectrogram(const Waveform& x, const MelConfig& cfg);

}  // namespace mdctcodec
