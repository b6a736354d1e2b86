#pragma once

#include <cstdint>
#include <random>

namespace anscale {

/// Independent random stream keyed by (master_seed, stream_id). The engine
/// state is derived only from that pair, so a stream reproduces its sequence
/// no matter how many other streams exist or how they are interleaved.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  /// Number of variates handed out so far.
  std::uint64_t position() const noexcept { return position_; }

  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double gaussian();
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Stream ids at or above this value are reserved for resampling so they
/// never collide with path streams (which use the path index).
inline constexpr std::uint64_t kBootstrapStreamBase = std::uint64_t{1} << 62;

double draw_gaussian(RngStream& stream);

/// Symmetric stable variate with characteristic function exp(-|theta|^(1/L)),
/// Chambers-Mallows-Stuck construction. Requires 1/2 <= L < 1.
double draw_levy_stable(double L, RngStream& stream);

/// Precomputed form of draw_levy_stable for hot loops over a fixed L.
class StableSampler {
 public:
  explicit StableSampler(double L);
  double operator()(RngStream& stream) const;
  double L() const noexcept { return L_; }

 private:
  double L_;
  double alpha_;
  double tail_power_;
};

}  // namespace anscale
