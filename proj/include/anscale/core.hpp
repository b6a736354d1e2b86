#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anscale {

/// Log-spaced integer sample times t(i) = round(t_min (t_max/t_min)^(i/count)),
/// i = 1..count, deduplicated after rounding. The last point is always t_max.
struct TimeGrid {
  std::int64_t t_min = 1;
  std::int64_t t_max = 2;
  std::int64_t count = 1;
  std::vector<std::int64_t> points;

  std::size_t size() const noexcept { return points.size(); }
};

TimeGrid make_time_grid(std::int64_t t_min, std::int64_t t_max, std::int64_t count);

/// Every integer time 1..t_max; used for per-step profiles.
TimeGrid make_dense_grid(std::int64_t t_max);

/// Row-major matrix of unit-time increments. Positions are prefix sums, so
/// X_0 = 0 holds for every path by construction.
class PathEnsemble {
 public:
  PathEnsemble() = default;
  PathEnsemble(std::size_t n_paths, std::size_t n_steps, std::string descriptor = {},
               std::uint64_t master_seed = 0);
  PathEnsemble(std::size_t n_paths, std::size_t n_steps, std::vector<double> increments,
               std::string descriptor = {}, std::uint64_t master_seed = 0);

  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t n_steps() const noexcept { return n_steps_; }

  std::span<const double> row(std::size_t p) const {
    return {increments_.data() + p * n_steps_, n_steps_};
  }
  std::span<double> row(std::size_t p) { return {increments_.data() + p * n_steps_, n_steps_}; }

  double at(std::size_t p, std::size_t t) const { return increments_[p * n_steps_ + t]; }

  std::span<const double> increments() const noexcept { return increments_; }

  const std::string& descriptor() const noexcept { return descriptor_; }
  void set_descriptor(std::string d) { descriptor_ = std::move(d); }
  std::uint64_t master_seed() const noexcept { return master_seed_; }
  void set_master_seed(std::uint64_t s) noexcept { master_seed_ = s; }

  friend bool operator==(const PathEnsemble&, const PathEnsemble&) = default;

 private:
  std::size_t n_paths_ = 0;
  std::size_t n_steps_ = 0;
  std::vector<double> increments_;
  std::string descriptor_;
  std::uint64_t master_seed_ = 0;
};

struct PartialSums {
  double x = 0.0;  // sum of increments
  double y = 0.0;  // sum of |increments|
  double z = 0.0;  // sum of squared increments
};

/// (X_t, Y_t, Z_t) for every path at a single time 1 <= t <= n_steps.
std::vector<PartialSums> partial_sums(const PathEnsemble& ensemble, std::int64_t t);

/// Single pass over one path, emitting the sums at each grid time. O(n_steps).
std::vector<PartialSums> partial_sums_on_grid(std::span<const double> increments,
                                              const TimeGrid& grid);

enum class StatisticKind { rs_mean, width_iqr, median_y, median_z, mean_abs_increment };

std::string_view to_string(StatisticKind kind) noexcept;
StatisticKind statistic_kind_from_string(std::string_view name);

struct StatisticSeries {
  TimeGrid grid;
  std::vector<double> values;
  std::optional<std::vector<double>> variances;
  StatisticKind kind = StatisticKind::rs_mean;

  std::size_t size() const noexcept { return values.size(); }
  /// Throws when lengths disagree or a nonnegative kind holds a negative value.
  void validate() const;
};

/// Order statistic with linear interpolation at position q (n - 1).
double quantile(std::span<const double> values, double q);

/// Same as quantile() but partially reorders `values` instead of copying.
double quantile_inplace(std::span<double> values, double q);

/// Pairwise summation in index order; the result does not depend on how the
/// inputs were produced.
double pairwise_sum(std::span<const double> values) noexcept;

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

struct ExponentReport {
  Estimate J, L, M, H;
  double k_sigma = 3.0;
  bool rs_unreliable = false;

  /// J + L + M - 1 with independent-error quadrature; always derived from
  /// the stored exponents.
  Estimate sum_check() const noexcept;
  bool consistent() const noexcept;
};

}  // namespace anscale
