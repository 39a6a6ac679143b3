#include "mdctcodec/detail/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <utility>

namespace mdctcodec::detail {

namespace {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Plans live for the process lifetime.
PlanPair plans_for(std::size_t size) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  const int n = static_cast<int>(size);
  double* real = fftw_alloc_real(size);
  fftw_complex* cplx = fftw_alloc_complex(size / 2 + 1);
  PlanPair p;
  p.forward = fftw_plan_dft_r2c_1d(n, real, cplx, FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(n, cplx, real, FFTW_ESTIMATE);
  fftw_free(real);
  fftw_free(cplx);
  cache.emplace(size, p);
  return p;
}

}  // namespace

struct RealFft::Buffers {
  PlanPair plans;
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
};

RealFft::RealFft(std::size_t size) : size_(size), buffers_(std::make_unique<Buffers>()) {
  buffers_->plans = plans_for(size);
  buffers_->real = fftw_alloc_real(size);
  buffers_->cplx = fftw_alloc_complex(size / 2 + 1);
}

RealFft::~RealFft() {
  fftw_free(buffers_->real);
  fftw_free(buffers_->cplx);
}

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::copy_n(in, size_, buffers_->real);
  fftw_execute_dft_r2c(buffers_->plans.forward, buffers_->real, buffers_->cplx);
  for (std::size_t k = 0; k < bins(); ++k) out[k] = {buffers_->cplx[k][0], buffers_->cplx[k][1]};
}

void RealFft::inverse(const std::complex<double>* in, double* out) {
  for (std::size_t k = 0; k < bins(); ++k) {
    buffers_->cplx[k][0] = in[k].real();
    buffers_->cplx[k][1] = in[k].imag();
  }
  fftw_execute_dft_c2r(buffers_->plans.inverse, buffers_->cplx, buffers_->real);
  std::copy_n(buffers_->real, size_, out);
}

}  // namespace mdctcodec::detail
