#include "anscale/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "anscale/error.hpp"

namespace anscale {

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x414e5343u};
  engine_.seed(seq);
}

double RngStream::uniform_open() {
  double u = 0.0;
  do {
    u = std::generate_canonical<double, 53>(engine_);
  } while (u <= 0.0 || u >= 1.0);
  ++position_;
  return u;
}

double RngStream::gaussian() {
  ++position_;
  return normal_(engine_);
}

std::uint64_t RngStream::index(std::uint64_t n) {
  ++position_;
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

double draw_gaussian(RngStream& stream) { return stream.gaussian(); }

StableSampler::StableSampler(double L) : L_(L), alpha_(1.0 / L), tail_power_(L - 1.0) {
  if (!(L >= 0.5 && L < 1.0)) {
    throw Error(Errc::domain, "latent exponent L must lie in [1/2, 1), got " + std::to_string(L));
  }
}

double StableSampler::operator()(RngStream& stream) const {
  // eps uniform on (-pi/2, pi/2), phi exponential with mean 1, both strictly
  // inside their supports because uniform_open() never returns 0 or 1.
  const double eps = std::numbers::pi * (stream.uniform_open() - 0.5);
  const double phi = -std::log(stream.uniform_open());
  const double lead = std::sin(alpha_ * eps) / std::pow(std::cos(eps), L_);
  // exponent (1 - alpha) / alpha == L - 1
  const double tail = std::pow(std::cos((1.0 - alpha_) * eps) / phi, tail_power_);
  return lead * tail;
}

double draw_levy_stable(double L, RngStream& stream) { return StableSampler(L)(stream); }

}  // namespace anscale
