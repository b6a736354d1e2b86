#include "anscale/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <new>
#include <utility>

namespace anscale {
namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  spectrum_ = reinterpret_cast<std::complex<double>*>(
      fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  if (!real_ || !spectrum_) {
    release();
    throw std::bad_alloc();
  }
  std::lock_guard lock(planner_mutex());
  const int size = static_cast<int>(n);
  auto* spec = reinterpret_cast<fftw_complex*>(spectrum_);
  forward_plan_ = fftw_plan_dft_r2c_1d(size, real_, spec, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(size, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() { release(); }

RealFft::RealFft(RealFft&& other) noexcept
    : n_(std::exchange(other.n_, 0)),
      real_(std::exchange(other.real_, nullptr)),
      spectrum_(std::exchange(other.spectrum_, nullptr)),
      forward_plan_(std::exchange(other.forward_plan_, nullptr)),
      inverse_plan_(std::exchange(other.inverse_plan_, nullptr)) {}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
  if (this != &other) {
    release();
    n_ = std::exchange(other.n_, 0);
    real_ = std::exchange(other.real_, nullptr);
    spectrum_ = std::exchange(other.spectrum_, nullptr);
    forward_plan_ = std::exchange(other.forward_plan_, nullptr);
    inverse_plan_ = std::exchange(other.inverse_plan_, nullptr);
  }
  return *this;
}

void RealFft::release() noexcept {
  if (forward_plan_ || inverse_plan_) {
    std::lock_guard lock(planner_mutex());
    if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  }
  forward_plan_ = inverse_plan_ = nullptr;
  if (real_) fftw_free(real_);
  if (spectrum_) fftw_free(spectrum_);
  real_ = nullptr;
  spectrum_ = nullptr;
}

void RealFft::forward() { fftw_execute(static_cast<fftw_plan>(forward_plan_)); }

void RealFft::inverse() { fftw_execute(static_cast<fftw_plan>(inverse_plan_)); }

std::size_t fft_friendly_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t f : {2u, 3u, 5u}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

}  // namespace anscale
