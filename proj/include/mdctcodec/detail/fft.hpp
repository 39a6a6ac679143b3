#pragma once

#include <complex>
#include <cstddef>
#include <memory>

namespace mdctcodec::detail {

// One-sided real FFT of a fixed size, backed by FFTW. Plans are created once
// per size under a global lock; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return size_; }
  std::size_t bins() const { return size_ / 2 + 1; }

  // out[k] = sum_l in[l] exp(-2 pi i k l / size), k = 0..size/2.
  void forward(const double* in, std::complex<double>* out);
  // out[l] = sum_{k=0}^{size-1} X[k] exp(+2 pi i k l / size) with X the
  // Hermitian extension of `in` (size/2 + 1 bins). Unnormalized.
  void inverse(const std::complex<double>* in, double* out);

 private:
  std::size_t size_;
  struct Buffers;
  std::unique_ptr<Buffers> buffers_;
};

}  // namespace mdctcodec::detail
