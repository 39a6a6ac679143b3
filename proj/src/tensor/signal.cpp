#include <cmath>
#include <complex>

#include "mdctcodec/detail/fft.hpp"
#include "mdctcodec/error.hpp"
#include "mdctcodec/tensor.hpp"
#include "mdctcodec/transform.hpp"

namespace mdctcodec {

namespace {

template <typename T>
using Node = detail::Node<T>;

}  // namespace

template <typename T>
Tensor<T> frame_signal(const Tensor<T>& x, std::size_t frame_length, std::size_t hop,
                       std::size_t pad_left, std::size_t frames) {
  require(x.dim() == 2, ErrorKind::kShape, "frame_signal expects x[B, T]");
  require(frame_length > 0 && hop > 0, ErrorKind::kInvalidConfig,
          "frame_signal needs positive frame length and hop");
  const std::size_t batch = x.extent(0), len = x.extent(1);
  std::vector<T> out(batch * frames * frame_length, T(0));
  const T* px = x.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t n = 0; n < frames; ++n)
      for (std::size_t i = 0; i < frame_length; ++i) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(n * hop + i) -
                                   static_cast<std::ptrdiff_t>(pad_left);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len))
          out[(b * frames + n) * frame_length + i] = px[b * len + pos];
      }
  return Tensor<T>::make_result(
      Shape{batch, frames, frame_length}, std::move(out), {x}, [=](Node<T>& self) {
        auto& gx = self.parents[0]->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t n = 0; n < frames; ++n)
            for (std::size_t i = 0; i < frame_length; ++i) {
              const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(n * hop + i) -
                                         static_cast<std::ptrdiff_t>(pad_left);
              if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len))
                gx[b * len + pos] += self.grad[(b * frames + n) * frame_length + i];
            }
      });
}

template <typename T>
Tensor<T> overlap_add(const Tensor<T>& frames, std::size_t hop, std::size_t pad_left,
                      std::size_t output_length) {
  require(frames.dim() == 3, ErrorKind::kShape, "overlap_add expects frames[B, N, L]");
  const std::size_t batch = frames.extent(0), count = frames.extent(1), flen = frames.extent(2);
  std::vector<T> out(batch * output_length, T(0));
  const T* pf = frames.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t n = 0; n < count; ++n)
      for (std::size_t i = 0; i < flen; ++i) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(n * hop + i) -
                                   static_cast<std::ptrdiff_t>(pad_left);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(output_length))
          out[b * output_length + pos] += pf[(b * count + n) * flen + i];
      }
  return Tensor<T>::make_result(
      Shape{batch, output_length}, std::move(out), {frames}, [=](Node<T>& self) {
        auto& gf = self.parents[0]->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t n = 0; n < count; ++n)
            for (std::size_t i = 0; i < flen; ++i) {
              const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(n * hop + i) -
                                         static_cast<std::ptrdiff_t>(pad_left);
              if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(output_length))
                gf[(b * count + n) * flen + i] += self.grad[b * output_length + pos];
            }
      });
}

template <typename T>
Tensor<T> rfft_magnitude(const Tensor<T>& frames) {
  require(frames.dim() >= 1 && frames.shape().back() >= 2, ErrorKind::kShape,
          "rfft_magnitude needs frames of at least 2 samples");
  const std::size_t size = frames.shape().back();
  const std::size_t count = frames.numel() / size;
  detail::RealFft fft(size);
  const std::size_t bins = fft.bins();

  std::vector<double> buf(size);
  std::vector<std::complex<double>> spec(count * bins);
  std::vector<T> out(count * bins);
  const T* pf = frames.data().data();
  for (std::size_t f = 0; f < count; ++f) {
    for (std::size_t i = 0; i < size; ++i) buf[i] = static_cast<double>(pf[f * size + i]);
    fft.forward(buf.data(), spec.data() + f * bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const auto z = spec[f * bins + k];
      out[f * bins + k] = static_cast<T>(std::sqrt(std::norm(z) + kMagnitudeEpsilon));
    }
  }
  Shape shape = frames.shape();
  shape.back() = bins;
  return Tensor<T>::make_result(
      std::move(shape), std::move(out), {frames},
      [size, count, bins, spec = std::move(spec)](Node<T>& self) {
        auto& gf = self.parents[0]->ensure_grad();
        detail::RealFft fft(size);
        std::vector<std::complex<double>> z(bins);
        std::vector<double> dx(size);
        const bool even = size % 2 == 0;
        for (std::size_t f = 0; f < count; ++f) {
          // d|X_k| / dRe = Re/|X|, d|X_k| / dIm = Im/|X|; the adjoint of the
          // one-sided DFT is a Hermitian inverse with interior bins halved.
          for (std::size_t k = 0; k < bins; ++k) {
            const auto s = spec[f * bins + k];
            const double mag = static_cast<double>(self.data[f * bins + k]);
            const double g = static_cast<double>(self.grad[f * bins + k]) / mag;
            const std::complex<double> w(g * s.real(), g * s.imag());
            const bool edge = k == 0 || (even && k == size / 2);
            z[k] = edge ? w : 0.5 * w;
          }
          fft.inverse(z.data(), dx.data());
          for (std::size_t i = 0; i < size; ++i) gf[f * size + i] += static_cast<T>(dx[i]);
        }
      });
}

#define MDCTCODEC_INSTANTIATE_SIGNAL(T)                                                     \
  template Tensor<T> frame_signal(const Tensor<T>&, std::size_t, std::size_t, std::size_t,  \
                                  std::size_t);                                             \
  template Tensor<T> overlap_add(const Tensor<T>&, std::size_t, std::size_t, std::size_t);  \
  template Tensor<T> rfft_magnitude(const Tensor<T>&);

MDCTCODEC_INSTANTIATE_SIGNAL(float)
MDCTCODEC_INSTANTIATE_SIGNAL(double)

}  // namespace mdctcodec
