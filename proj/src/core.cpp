#include "anscale/core.hpp"

#include <algorithm>
#include <cmath>

#include "anscale/error.hpp"

namespace anscale {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_range: return "invalid-range";
    case Errc::out_of_range: return "out-of-range";
    case Errc::empty_input: return "empty-input";
    case Errc::domain: return "domain-error";
    case Errc::negative_eigenvalue: return "negative-eigenvalue";
    case Errc::family_mismatch: return "family-mismatch";
    case Errc::degenerate_ensemble: return "degenerate-ensemble";
    case Errc::too_few_paths: return "too-few-paths";
    case Errc::zero_variance: return "zero-variance";
    case Errc::rank_deficient: return "rank-deficient";
    case Errc::non_convergence: return "non-convergence";
    case Errc::undefined_timescale: return "undefined-timescale";
    case Errc::bootstrap_failure: return "bootstrap-failure";
    case Errc::malformed_row: return "malformed-row";
    case Errc::no_days: return "no-days";
    case Errc::nonpositive_price: return "nonpositive-price";
    case Errc::interval_out_of_range: return "interval-out-of-range";
    case Errc::io: return "io-error";
    case Errc::format: return "format-error";
  }
  return "unknown";
}

TimeGrid make_time_grid(std::int64_t t_min, std::int64_t t_max, std::int64_t count) {
  if (t_min < 1 || t_min >= t_max) {
    throw Error(Errc::invalid_range, "time grid needs 1 <= t_min < t_max, got t_min=" +
                                         std::to_string(t_min) + " t_max=" + std::to_string(t_max));
  }
  if (count < 1) throw Error(Errc::invalid_range, "time grid count must be >= 1");

  TimeGrid grid{t_min, t_max, count, {}};
  grid.points.reserve(static_cast<std::size_t>(count));
  const double ratio = static_cast<double>(t_max) / static_cast<double>(t_min);
  for (std::int64_t i = 1; i <= count; ++i) {
    const double t = static_cast<double>(t_min) *
                     std::pow(ratio, static_cast<double>(i) / static_cast<double>(count));
    auto p = static_cast<std::int64_t>(std::llround(t));
    p = std::clamp(p, t_min, t_max);
    if (grid.points.empty() || p > grid.points.back()) grid.points.push_back(p);
  }
  // pow() may land a hair below t_max on the last step
  grid.points.back() = t_max;
  return grid;
}

TimeGrid make_dense_grid(std::int64_t t_max) {
  if (t_max < 2) throw Error(Errc::invalid_range, "dense grid needs t_max >= 2");
  TimeGrid grid{1, t_max, t_max, {}};
  grid.points.resize(static_cast<std::size_t>(t_max));
  for (std::int64_t t = 1; t <= t_max; ++t) grid.points[static_cast<std::size_t>(t - 1)] = t;
  return grid;
}

PathEnsemble::PathEnsemble(std::size_t n_paths, std::size_t n_steps, std::string descriptor,
                           std::uint64_t master_seed)
    : PathEnsemble(n_paths, n_steps, std::vector<double>(n_paths * n_steps, 0.0),
                   std::move(descriptor), master_seed) {}

PathEnsemble::PathEnsemble(std::size_t n_paths, std::size_t n_steps, std::vector<double> increments,
                           std::string descriptor, std::uint64_t master_seed)
    : n_paths_(n_paths),
      n_steps_(n_steps),
      increments_(std::move(increments)),
      descriptor_(std::move(descriptor)),
      master_seed_(master_seed) {
  if (n_paths == 0 || n_steps == 0) {
    throw Error(Errc::invalid_range, "ensemble needs n_paths >= 1 and n_steps >= 1");
  }
  if (increments_.size() != n_paths * n_steps) {
    throw Error(Errc::invalid_range, "increment buffer does not match n_paths x n_steps");
  }
}

std::vector<PartialSums> partial_sums(const PathEnsemble& ensemble, std::int64_t t) {
  if (t < 1 || static_cast<std::size_t>(t) > ensemble.n_steps()) {
    throw Error(Errc::out_of_range, "partial sum time " + std::to_string(t) + " outside [1, " +
                                        std::to_string(ensemble.n_steps()) + "]");
  }
  std::vector<PartialSums> out(ensemble.n_paths());
  for (std::size_t p = 0; p < ensemble.n_paths(); ++p) {
    const auto row = ensemble.row(p);
    PartialSums s;
    for (std::int64_t k = 0; k < t; ++k) {
      const double d = row[static_cast<std::size_t>(k)];
      s.x += d;
      s.y += std::abs(d);
      s.z += d * d;
    }
    out[p] = s;
  }
  return out;
}

std::vector<PartialSums> partial_sums_on_grid(std::span<const double> increments,
                                              const TimeGrid& grid) {
  if (grid.points.empty()) return {};
  if (static_cast<std::size_t>(grid.points.back()) > increments.size()) {
    throw Error(Errc::out_of_range, "grid extends past the end of the path");
  }
  std::vector<PartialSums> out;
  out.reserve(grid.size());
  PartialSums s;
  std::size_t k = 0;
  for (const auto t : grid.points) {
    for (; k < static_cast<std::size_t>(t); ++k) {
      const double d = increments[k];
      s.x += d;
      s.y += std::abs(d);
      s.z += d * d;
    }
    out.push_back(s);
  }
  return out;
}

std::string_view to_string(StatisticKind kind) noexcept {
  switch (kind) {
    case StatisticKind::rs_mean: return "rs_mean";
    case StatisticKind::width_iqr: return "width_iqr";
    case StatisticKind::median_y: return "median_y";
    case StatisticKind::median_z: return "median_z";
    case StatisticKind::mean_abs_increment: return "mean_abs_increment";
  }
  return "unknown";
}

StatisticKind statistic_kind_from_string(std::string_view name) {
  for (auto k : {StatisticKind::rs_mean, StatisticKind::width_iqr, StatisticKind::median_y,
                 StatisticKind::median_z, StatisticKind::mean_abs_increment}) {
    if (to_string(k) == name) return k;
  }
  throw Error(Errc::domain, "unknown statistic kind '" + std::string(name) + "'");
}

void StatisticSeries::validate() const {
  if (values.size() != grid.size()) {
    throw Error(Errc::invalid_range, "series values do not match grid length");
  }
  if (variances && variances->size() != grid.size()) {
    throw Error(Errc::invalid_range, "series variances do not match grid length");
  }
  if (variances) {
    for (double v : *variances) {
      if (!(v >= 0.0)) throw Error(Errc::domain, "negative variance in series");
    }
  }
  if (kind != StatisticKind::rs_mean) {
    for (double v : values) {
      if (v < 0.0) throw Error(Errc::domain, std::string(to_string(kind)) + " must be >= 0");
    }
  }
}

double quantile_inplace(std::span<double> values, double q) {
  if (values.empty()) throw Error(Errc::empty_input, "quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::domain, "quantile level outside [0, 1]");
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(lo);
  std::nth_element(values.begin(), nth, values.end());
  const double lower = *nth;
  if (frac == 0.0 || lo + 1 >= values.size()) return lower;
  const double upper = *std::min_element(nth + 1, values.end());
  return lower + frac * (upper - lower);
}

double quantile(std::span<const double> values, double q) {
  std::vector<double> copy(values.begin(), values.end());
  return quantile_inplace(copy, q);
}

double pairwise_sum(std::span<const double> values) noexcept {
  constexpr std::size_t kBlock = 32;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Estimate ExponentReport::sum_check() const noexcept {
  const double value = J.value + L.value + M.value - 1.0;
  const double err =
      std::sqrt(J.stderr_ * J.stderr_ + L.stderr_ * L.stderr_ + M.stderr_ * M.stderr_);
  return {value, err};
}

bool ExponentReport::consistent() const noexcept {
  const auto s = sum_check();
  const double combined = std::sqrt(H.stderr_ * H.stderr_ + s.stderr_ * s.stderr_);
  return std::abs(H.value - s.value) <= k_sigma * combined;
}

}  // namespace anscale
