#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "anscale/core.hpp"
#include "anscale/fitting.hpp"
#include "anscale/grid_table.hpp"

namespace anscale {

/// Statistic series from a grid table. `sample` lists path indices (with
/// repeats, for resampling); empty means every path once.
StatisticSeries compute_series(const GridTable& table, StatisticKind kind,
                               std::span<const std::size_t> sample = {});

/// Path indices of every grid column sorted by that column's value, for the
/// quantile kinds (empty for rs_mean). Column g occupies [g n, (g+1) n).
std::vector<std::uint32_t> sort_columns(const GridTable& table, StatisticKind kind);

/// Same statistic over a resample given as a multiplicity per path. Order
/// statistics are read off `order` (from sort_columns) in linear time and
/// equal those of the expanded sample exactly.
StatisticSeries compute_series_resampled(const GridTable& table, StatisticKind kind,
                                         std::span<const std::uint32_t> counts,
                                         std::span<const std::uint32_t> order);

/// Ensemble mean of R_t/S_t over paths with S_t > 0; variances hold the
/// squared standard error of that mean.
StatisticSeries rs_series(const PathEnsemble& ensemble, const TimeGrid& grid);
/// Interquartile range of X_t across paths.
StatisticSeries width_series(const PathEnsemble& ensemble, const TimeGrid& grid);
StatisticSeries median_y_series(const PathEnsemble& ensemble, const TimeGrid& grid);
StatisticSeries median_z_series(const PathEnsemble& ensemble, const TimeGrid& grid);

/// Per-step ensemble mean of |delta_t|, optionally after subtracting the
/// per-step ensemble mean. Point t on the dense grid holds delta_{t-1}.
StatisticSeries mean_abs_increment_profile(const PathEnsemble& ensemble,
                                           bool subtract_mean = false);

/// Least-squares slope of log(value) against log(t) over t_lo <= t <= t_hi.
double power_law_slope(const StatisticSeries& series, std::int64_t t_lo, std::int64_t t_hi);

enum class Transform { identity, absolute, square };

/// Pooled (ensemble and time averaged) Pearson autocorrelation of the
/// transformed increments at lags 1..max_lag.
std::vector<double> autocorrelation(const PathEnsemble& ensemble, std::size_t max_lag,
                                    Transform transform = Transform::identity);

struct EstimateOptions {
  std::size_t bootstrap_replicates = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double k_sigma = 3.0;
  /// Report J with the R/S-unreliable flag (FLM/SFLM with J < 1/2).
  bool rs_unreliable = false;
  FitOptions fit;
};

struct StatisticFit {
  StatisticSeries series;
  FitResult fit;
};

/// Exponents plus the evidence behind them. The four statistics are held in
/// the order rs_mean, median_z, median_y, width_iqr.
struct ExponentAnalysis {
  ExponentReport report;
  std::array<StatisticFit, 4> statistics;
  std::size_t n_paths = 0;
  std::size_t bootstrap_replicates = 0;

  const StatisticFit& get(StatisticKind kind) const;
};

ExponentAnalysis estimate_exponents(const GridTable& table, const EstimateOptions& options);
ExponentAnalysis estimate_exponents(const PathEnsemble& ensemble, const TimeGrid& grid,
                                    EstimateOptions options);

/// True when the ensemble descriptor names FLM/SFLM with J < 1/2.
bool descriptor_marks_rs_unreliable(const PathEnsemble& ensemble) noexcept;

}  // namespace anscale
