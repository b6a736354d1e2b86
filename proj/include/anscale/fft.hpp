#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace anscale {

/// Real <-> half-complex FFT of a fixed size with its own aligned buffers.
/// Plans are built with FFTW_ESTIMATE so results are bit-stable across runs.
/// One instance per worker; instances are not shareable across threads.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& other) noexcept;
  RealFft& operator=(RealFft&& other) noexcept;

  std::size_t size() const noexcept { return n_; }
  std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  std::span<double> real() noexcept { return {real_, n_}; }
  std::span<std::complex<double>> spectrum() noexcept { return {spectrum_, n_ / 2 + 1}; }

  /// real() -> spectrum(), unnormalized.
  void forward();
  /// spectrum() -> real(), unnormalized (a round trip scales by n). The
  /// spectrum buffer is clobbered.
  void inverse();

 private:
  void release() noexcept;

  std::size_t n_ = 0;
  double* real_ = nullptr;
  std::complex<double>* spectrum_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

/// Smallest 2^a 3^b 5^c not below n.
std::size_t fft_friendly_size(std::size_t n);

}  // namespace anscale
