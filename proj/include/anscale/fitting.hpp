#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anscale/core.hpp"
#include "anscale/grid_table.hpp"

namespace anscale {

/// Finite-time-correction fit y(t) = a t^omega + b t^(omega - c), c > 0.
struct FitResult {
  enum class Model { free_exponent, known_exponent };

  Model model = Model::free_exponent;
  double omega = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  // Filled by bootstrap; zero for a bare fit.
  double omega_stderr = 0.0;
  double a_stderr = 0.0;
  double b_stderr = 0.0;
  double c_stderr = 0.0;
  std::optional<double> tau;
  std::optional<double> tau_stderr;
  double residual_norm = 0.0;  // sqrt of the weighted sum of squared residuals
  bool converged = false;
  int iterations = 0;

  double evaluate(double t) const noexcept;
};

std::string_view to_string(FitResult::Model m) noexcept;

struct FitOptions {
  int max_iterations = 500;
  double step_tolerance = 1e-10;
  double cost_tolerance = 1e-12;
  std::vector<double> c_starts{0.1, 0.25, 0.5, 1.0};
  /// Admissible correction exponents. Below the lower bound the two terms
  /// become nearly collinear over a few decades and the fit degenerates into
  /// a logarithmic drift that no longer pins omega.
  double c_min = 0.05;
  double c_max = 150.0;
  /// Largest admissible |correction / leading term| at the last grid time.
  /// A correction that has not decayed by then is not a finite-time
  /// correction, and letting it grow trades omega against (b, c) freely.
  double max_correction = 0.1;
  /// Extra starting point tried alongside the grid (e.g. a previous fit).
  std::optional<FitResult> warm_start;
};

/// Weights are 1/variance when the series carries strictly positive
/// variances, otherwise unit weights.
FitResult fit_ftc_free(const StatisticSeries& series, const FitOptions& options = {});
FitResult fit_ftc_known(const StatisticSeries& series, double omega,
                        const FitOptions& options = {});

/// tau = (-b/a)^(1/c); throws undefined-timescale unless a != 0 and -b/a > 0.
double convergence_timescale(const FitResult& fit);
std::optional<double> try_convergence_timescale(const FitResult& fit) noexcept;

struct BootstrapOptions {
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Fit each statistic with its exponent fixed instead of free.
  std::optional<double> known_omega;
  FitOptions fit;
};

struct BootstrapResult {
  StatisticSeries series;  // full-sample values with bootstrap variances
  FitResult fit;           // full-sample fit carrying bootstrap stderrs
  std::vector<double> replicate_omegas;
  std::size_t failed_replicates = 0;
};

/// Resamples paths with replacement, recomputes the series and its fit per
/// replicate. Replicate r draws from stream (seed, kBootstrapStreamBase + r),
/// so all kinds requested together see identical resamples. Throws
/// bootstrap-failure when more than 20% of replicates fail.
std::map<StatisticKind, BootstrapResult> bootstrap_statistics(
    const GridTable& table, std::span<const StatisticKind> kinds, const BootstrapOptions& options);

BootstrapResult bootstrap_stderr(const GridTable& table, StatisticKind kind,
                                 const BootstrapOptions& options);
BootstrapResult bootstrap_stderr(const PathEnsemble& ensemble, StatisticKind kind,
                                 const TimeGrid& grid, const BootstrapOptions& options);

}  // namespace anscale
