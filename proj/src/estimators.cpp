#include "anscale/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "anscale/error.hpp"
#include "anscale/generators.hpp"
#include "anscale/parallel.hpp"

namespace anscale {
namespace {

struct HullPoint {
  double s;
  double x;
};

// Sign of the turn a -> b -> c.
double cross(const HullPoint& a, const HullPoint& b, const HullPoint& c) noexcept {
  return (b.s - a.s) * (c.x - a.x) - (b.x - a.x) * (c.s - a.s);
}

// Incrementally maintained upper and lower convex hulls of (s, X_s). Points
// arrive with increasing s, so each insertion is amortized O(1); the extreme
// values of X_s - lambda s over the prefix sit on the hulls and are found by
// binary search on edge slopes.
class PrefixHull {
 public:
  void reserve(std::size_t n) {
    upper_.reserve(n);
    lower_.reserve(n);
  }

  void add(HullPoint p) {
    while (upper_.size() >= 2 && cross(upper_[upper_.size() - 2], upper_.back(), p) >= 0.0) {
      upper_.pop_back();
    }
    upper_.push_back(p);
    while (lower_.size() >= 2 && cross(lower_[lower_.size() - 2], lower_.back(), p) <= 0.0) {
      lower_.pop_back();
    }
    lower_.push_back(p);
  }

  double max_detrended(double lambda) const {
    // first vertex whose outgoing edge does not increase x - lambda s
    std::size_t lo = 0;
    std::size_t hi = upper_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      const auto& a = upper_[mid];
      const auto& b = upper_[mid + 1];
      if ((b.x - a.x) - lambda * (b.s - a.s) > 0.0) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return upper_[lo].x - lambda * upper_[lo].s;
  }

  double min_detrended(double lambda) const {
    std::size_t lo = 0;
    std::size_t hi = lower_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      const auto& a = lower_[mid];
      const auto& b = lower_[mid + 1];
      if ((b.x - a.x) - lambda * (b.s - a.s) < 0.0) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lower_[lo].x - lambda * lower_[lo].s;
  }

 private:
  std::vector<HullPoint> upper_;
  std::vector<HullPoint> lower_;
};

void check_grid_fits(const TimeGrid& grid, std::size_t n_steps) {
  if (grid.points.empty()) throw Error(Errc::invalid_range, "empty time grid");
  if (static_cast<std::size_t>(grid.points.back()) > n_steps) {
    throw Error(Errc::out_of_range, "grid t_max " + std::to_string(grid.points.back()) +
                                        " exceeds path length " + std::to_string(n_steps));
  }
}

void scatter(GridTable& table, std::size_t p, const PathGridRecord& rec) {
  const std::size_t n = table.n_paths;
  for (std::size_t g = 0; g < rec.x.size(); ++g) {
    table.rs[g * n + p] = rec.rs[g];
    table.x[g * n + p] = rec.x[g];
    table.y[g * n + p] = rec.y[g];
    table.z[g * n + p] = rec.z[g];
  }
}

GridTable empty_table(const TimeGrid& grid, std::size_t n_paths) {
  GridTable table;
  table.grid = grid;
  table.n_paths = n_paths;
  const std::size_t cells = grid.size() * n_paths;
  table.rs.resize(cells);
  table.x.resize(cells);
  table.y.resize(cells);
  table.z.resize(cells);
  return table;
}

std::string stage_name(StatisticKind kind) {
  switch (kind) {
    case StatisticKind::rs_mean: return "Joseph exponent (R/S)";
    case StatisticKind::median_z: return "latent exponent (median Z)";
    case StatisticKind::median_y: return "Moses exponent (median Y)";
    case StatisticKind::width_iqr: return "Hurst exponent (IQR width)";
    case StatisticKind::mean_abs_increment: return "increment profile";
  }
  return "unknown";
}

}  // namespace

PathGridRecord path_grid_record(std::span<const double> increments, const TimeGrid& grid) {
  check_grid_fits(grid, increments.size());
  PathGridRecord rec;
  const std::size_t G = grid.size();
  rec.rs.resize(G);
  rec.x.resize(G);
  rec.y.resize(G);
  rec.z.resize(G);

  PrefixHull hull;
  hull.reserve(64);
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::size_t s = 0;
  for (std::size_t g = 0; g < G; ++g) {
    const auto t = static_cast<std::size_t>(grid.points[g]);
    for (; s < t; ++s) {
      const double d = increments[s];
      x += d;
      y += std::abs(d);
      z += d * d;
      hull.add({static_cast<double>(s + 1), x});
    }
    const double tt = static_cast<double>(t);
    const double mean = x / tt;
    const double second = z / tt;
    const double var = second - mean * mean;
    rec.x[g] = x;
    rec.y[g] = y;
    rec.z[g] = z;
    // A constant path leaves only cancellation noise in var.
    if (var <= 1e-12 * second) {
      rec.rs[g] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double range = hull.max_detrended(mean) - hull.min_detrended(mean);
    rec.rs[g] = range / std::sqrt(var);
  }
  return rec;
}

GridTable build_grid_table(const PathEnsemble& ensemble, const TimeGrid& grid,
                           std::size_t threads) {
  check_grid_fits(grid, ensemble.n_steps());
  GridTable table = empty_table(grid, ensemble.n_paths());
  parallel_for(ensemble.n_paths(), threads, [&](std::size_t p, std::size_t) {
    scatter(table, p, path_grid_record(ensemble.row(p), grid));
  });
  return table;
}

GridTable build_grid_table(const PathGenerator& generator, std::size_t n_paths,
                           const TimeGrid& grid, std::size_t threads) {
  if (n_paths == 0) throw Error(Errc::invalid_range, "n_paths must be >= 1");
  check_grid_fits(grid, generator.n_steps());
  GridTable table = empty_table(grid, n_paths);
  threads = std::max<std::size_t>(1, std::min(threads, n_paths));
  std::vector<PathGenerator::Workspace> workspaces;
  std::vector<std::vector<double>> buffers(threads, std::vector<double>(generator.n_steps()));
  workspaces.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) workspaces.push_back(generator.make_workspace());
  parallel_for(n_paths, threads, [&](std::size_t p, std::size_t w) {
    generator.generate(p, buffers[w], workspaces[w]);
    scatter(table, p, path_grid_record(buffers[w], grid));
  });
  return table;
}

StatisticSeries compute_series(const GridTable& table, StatisticKind kind,
                               std::span<const std::size_t> sample) {
  const std::size_t n = sample.empty() ? table.n_paths : sample.size();
  const std::size_t G = table.grid.size();
  StatisticSeries series;
  series.grid = table.grid;
  series.kind = kind;
  series.values.resize(G);

  auto gather = [&](std::span<const double> column, std::vector<double>& buf) {
    buf.resize(n);
    if (sample.empty()) {
      std::copy(column.begin(), column.end(), buf.begin());
    } else {
      for (std::size_t i = 0; i < n; ++i) buf[i] = column[sample[i]];
    }
  };

  std::vector<double> buf;
  switch (kind) {
    case StatisticKind::rs_mean: {
      std::vector<double> variances(G);
      for (std::size_t g = 0; g < G; ++g) {
        gather(table.rs_column(g), buf);
        const auto last = std::remove_if(buf.begin(), buf.end(), [](double v) { return std::isnan(v); });
        buf.erase(last, buf.end());
        if (buf.size() < 2) {
          throw Error(Errc::degenerate_ensemble,
                      "fewer than 2 paths with S_t > 0 at t=" + std::to_string(table.grid.points[g]));
        }
        const double m = pairwise_sum(buf) / static_cast<double>(buf.size());
        for (auto& v : buf) v = (v - m) * (v - m);
        const double var = pairwise_sum(buf) / static_cast<double>(buf.size() - 1);
        series.values[g] = m;
        variances[g] = var / static_cast<double>(buf.size());
      }
      series.variances = std::move(variances);
      break;
    }
    case StatisticKind::width_iqr: {
      if (n < 4) throw Error(Errc::too_few_paths, "IQR width needs at least 4 paths");
      for (std::size_t g = 0; g < G; ++g) {
        gather(table.x_column(g), buf);
        const double q75 = quantile_inplace(buf, 0.75);
        const double q25 = quantile_inplace(buf, 0.25);
        series.values[g] = q75 - q25;
      }
      break;
    }
    case StatisticKind::median_y:
    case StatisticKind::median_z: {
      if (n < 2) throw Error(Errc::too_few_paths, "median series need at least 2 paths");
      const bool is_y = kind == StatisticKind::median_y;
      for (std::size_t g = 0; g < G; ++g) {
        gather(is_y ? table.y_column(g) : table.z_column(g), buf);
        series.values[g] = quantile_inplace(buf, 0.5);
      }
      break;
    }
    case StatisticKind::mean_abs_increment:
      throw Error(Errc::domain, "the increment profile is computed from increments, not a grid table");
  }
  return series;
}

std::vector<std::uint32_t> sort_columns(const GridTable& table, StatisticKind kind) {
  if (kind == StatisticKind::rs_mean) return {};
  const std::size_t n = table.n_paths;
  const std::size_t G = table.grid.size();
  std::vector<std::uint32_t> order(G * n);
  for (std::size_t g = 0; g < G; ++g) {
    const auto column = kind == StatisticKind::width_iqr  ? table.x_column(g)
                        : kind == StatisticKind::median_y ? table.y_column(g)
                        : kind == StatisticKind::median_z ? table.z_column(g)
                                                          : throw Error(Errc::domain, "no grid column for this statistic");
    auto first = order.begin() + static_cast<std::ptrdiff_t>(g * n);
    std::iota(first, first + static_cast<std::ptrdiff_t>(n), 0u);
    std::sort(first, first + static_cast<std::ptrdiff_t>(n),
              [&](std::uint32_t a, std::uint32_t b) { return column[a] < column[b]; });
  }
  return order;
}

namespace {

// Quantile of the multiset in which path p appears counts[p] times, using the
// same interpolation as quantile().
double weighted_quantile(std::span<const double> column, std::span<const std::uint32_t> order,
                         std::span<const std::uint32_t> counts, std::size_t total, double q) {
  const double pos = q * static_cast<double>(total - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::size_t seen = 0;
  std::size_t i = 0;
  for (; i < order.size(); ++i) {
    seen += counts[order[i]];
    if (seen > lo) break;
  }
  const double lower = column[order[i]];
  if (frac == 0.0 || lo + 1 >= total) return lower;
  if (seen > lo + 1) return lower;
  for (++i; i < order.size(); ++i) {
    if (counts[order[i]] > 0) break;
  }
  return lower + frac * (column[order[i]] - lower);
}

}  // namespace

StatisticSeries compute_series_resampled(const GridTable& table, StatisticKind kind,
                                         std::span<const std::uint32_t> counts,
                                         std::span<const std::uint32_t> order) {
  const std::size_t n = table.n_paths;
  const std::size_t G = table.grid.size();
  if (counts.size() != n) throw Error(Errc::invalid_range, "one count per path required");
  std::size_t total = 0;
  for (auto c : counts) total += c;
  StatisticSeries series;
  series.grid = table.grid;
  series.kind = kind;
  series.values.resize(G);

  if (kind == StatisticKind::rs_mean) {
    std::vector<double> variances(G);
    std::vector<double> terms(n);
    for (std::size_t g = 0; g < G; ++g) {
      const auto column = table.rs_column(g);
      std::size_t k = 0;
      for (std::size_t p = 0; p < n; ++p) {
        if (counts[p] > 0 && !std::isnan(column[p])) k += counts[p];
      }
      if (k < 2) {
        throw Error(Errc::degenerate_ensemble,
                    "fewer than 2 paths with S_t > 0 at t=" + std::to_string(table.grid.points[g]));
      }
      for (std::size_t p = 0; p < n; ++p) {
        terms[p] = counts[p] > 0 && !std::isnan(column[p]) ? counts[p] * column[p] : 0.0;
      }
      const double m = pairwise_sum(terms) / static_cast<double>(k);
      for (std::size_t p = 0; p < n; ++p) {
        const double d = column[p] - m;
        terms[p] = counts[p] > 0 && !std::isnan(column[p]) ? counts[p] * d * d : 0.0;
      }
      series.values[g] = m;
      variances[g] = pairwise_sum(terms) / static_cast<double>(k - 1) / static_cast<double>(k);
    }
    series.variances = std::move(variances);
    return series;
  }
  if (kind == StatisticKind::mean_abs_increment) {
    throw Error(Errc::domain, "the increment profile is computed from increments, not a grid table");
  }
  if (order.size() != G * n) throw Error(Errc::invalid_range, "column order does not match the table");
  if (kind == StatisticKind::width_iqr && total < 4) {
    throw Error(Errc::too_few_paths, "IQR width needs at least 4 paths");
  }
  if (total < 2) throw Error(Errc::too_few_paths, "median series need at least 2 paths");
  for (std::size_t g = 0; g < G; ++g) {
    const auto ord = order.subspan(g * n, n);
    switch (kind) {
      case StatisticKind::width_iqr: {
        const auto col = table.x_column(g);
        series.values[g] = weighted_quantile(col, ord, counts, total, 0.75) -
                           weighted_quantile(col, ord, counts, total, 0.25);
        break;
      }
      case StatisticKind::median_y:
        series.values[g] = weighted_quantile(table.y_column(g), ord, counts, total, 0.5);
        break;
      default:
        series.values[g] = weighted_quantile(table.z_column(g), ord, counts, total, 0.5);
        break;
    }
  }
  return series;
}

StatisticSeries rs_series(const PathEnsemble& ensemble, const TimeGrid& grid) {
  return compute_series(build_grid_table(ensemble, grid), StatisticKind::rs_mean);
}

StatisticSeries width_series(const PathEnsemble& ensemble, const TimeGrid& grid) {
  if (ensemble.n_paths() < 4) throw Error(Errc::too_few_paths, "IQR width needs at least 4 paths");
  return compute_series(build_grid_table(ensemble, grid), StatisticKind::width_iqr);
}

StatisticSeries median_y_series(const PathEnsemble& ensemble, const TimeGrid& grid) {
  if (ensemble.n_paths() < 2) throw Error(Errc::too_few_paths, "median needs at least 2 paths");
  return compute_series(build_grid_table(ensemble, grid), StatisticKind::median_y);
}

StatisticSeries median_z_series(const PathEnsemble& ensemble, const TimeGrid& grid) {
  if (ensemble.n_paths() < 2) throw Error(Errc::too_few_paths, "median needs at least 2 paths");
  return compute_series(build_grid_table(ensemble, grid), StatisticKind::median_z);
}

StatisticSeries mean_abs_increment_profile(const PathEnsemble& ensemble, bool subtract_mean) {
  const std::size_t P = ensemble.n_paths();
  const std::size_t n = ensemble.n_steps();
  if (P < 2) throw Error(Errc::too_few_paths, "increment profile needs at least 2 paths");
  if (n < 2) throw Error(Errc::invalid_range, "increment profile needs at least 2 steps");

  std::vector<double> mean(n, 0.0);
  if (subtract_mean) {
    for (std::size_t p = 0; p < P; ++p) {
      const auto row = ensemble.row(p);
      for (std::size_t t = 0; t < n; ++t) mean[t] += row[t];
    }
    for (auto& m : mean) m /= static_cast<double>(P);
  }
  std::vector<double> acc(n, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    const auto row = ensemble.row(p);
    for (std::size_t t = 0; t < n; ++t) acc[t] += std::abs(row[t] - mean[t]);
  }
  StatisticSeries series;
  series.grid = make_dense_grid(static_cast<std::int64_t>(n));
  series.kind = StatisticKind::mean_abs_increment;
  series.values.resize(n);
  for (std::size_t t = 0; t < n; ++t) series.values[t] = acc[t] / static_cast<double>(P);
  return series;
}

double power_law_slope(const StatisticSeries& series, std::int64_t t_lo, std::int64_t t_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto t = series.grid.points[i];
    if (t < t_lo || t > t_hi || !(series.values[i] > 0.0)) continue;
    const double lx = std::log(static_cast<double>(t));
    const double ly = std::log(series.values[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  if (k < 2) throw Error(Errc::too_few_paths, "power-law slope needs at least 2 positive points");
  const double kk = static_cast<double>(k);
  const double denom = kk * sxx - sx * sx;
  if (denom <= 0.0) throw Error(Errc::rank_deficient, "degenerate abscissae in slope fit");
  return (kk * sxy - sx * sy) / denom;
}

std::vector<double> autocorrelation(const PathEnsemble& ensemble, std::size_t max_lag,
                                    Transform transform) {
  const std::size_t P = ensemble.n_paths();
  const std::size_t n = ensemble.n_steps();
  if (max_lag >= n) throw Error(Errc::out_of_range, "max_lag must be below n_steps");

  auto apply = [transform](double d) {
    switch (transform) {
      case Transform::identity: return d;
      case Transform::absolute: return std::abs(d);
      case Transform::square: return d * d;
    }
    return d;
  };
  std::vector<double> v(n);
  double sum = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    for (double d : ensemble.row(p)) sum += apply(d);
  }
  const double count = static_cast<double>(P * n);
  const double mu = sum / count;

  std::vector<double> cov(max_lag + 1, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    const auto row = ensemble.row(p);
    for (std::size_t t = 0; t < n; ++t) v[t] = apply(row[t]) - mu;
    for (std::size_t k = 0; k <= max_lag; ++k) {
      double acc = 0.0;
      for (std::size_t t = 0; t + k < n; ++t) acc += v[t] * v[t + k];
      cov[k] += acc;
    }
  }
  for (std::size_t k = 0; k <= max_lag; ++k) cov[k] /= static_cast<double>(P * (n - k));
  if (!(cov[0] > 0.0)) throw Error(Errc::zero_variance, "transformed increments have zero variance");
  std::vector<double> out(max_lag);
  for (std::size_t k = 1; k <= max_lag; ++k) out[k - 1] = cov[k] / cov[0];
  return out;
}

const StatisticFit& ExponentAnalysis::get(StatisticKind kind) const {
  for (const auto& s : statistics) {
    if (s.series.kind == kind) return s;
  }
  throw Error(Errc::domain, "statistic not part of the analysis");
}

ExponentAnalysis estimate_exponents(const GridTable& table, const EstimateOptions& options) {
  constexpr std::array<StatisticKind, 4> kinds{StatisticKind::rs_mean, StatisticKind::median_z,
                                               StatisticKind::median_y, StatisticKind::width_iqr};
  ExponentAnalysis out;
  out.n_paths = table.n_paths;
  out.bootstrap_replicates = options.bootstrap_replicates;

  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const auto kind = kinds[i];
    try {
      if (options.bootstrap_replicates >= 2) {
        BootstrapOptions bo;
        bo.replicates = options.bootstrap_replicates;
        bo.seed = options.seed;
        bo.threads = options.threads;
        bo.fit = options.fit;
        auto boot = bootstrap_stderr(table, kind, bo);
        out.statistics[i] = {std::move(boot.series), boot.fit};
      } else {
        auto series = compute_series(table, kind);
        auto fit = fit_ftc_free(series, options.fit);
        out.statistics[i] = {std::move(series), fit};
      }
    } catch (const Error& e) {
      throw Error(e.code(), stage_name(kind) + " stage failed: " + e.what());
    }
  }

  const auto& rs = out.statistics[0].fit;
  const auto& fz = out.statistics[1].fit;
  const auto& fy = out.statistics[2].fit;
  const auto& fw = out.statistics[3].fit;

  ExponentReport& r = out.report;
  r.k_sigma = options.k_sigma;
  r.rs_unreliable = options.rs_unreliable;
  r.J = {rs.omega, rs.omega_stderr};
  r.M = {fy.omega - 0.5, fy.omega_stderr};
  r.L = {(fz.omega - 2.0 * r.M.value + 1.0) / 2.0,
         0.5 * std::sqrt(fz.omega_stderr * fz.omega_stderr + 4.0 * r.M.stderr_ * r.M.stderr_)};
  r.H = {fw.omega, fw.omega_stderr};
  return out;
}

ExponentAnalysis estimate_exponents(const PathEnsemble& ensemble, const TimeGrid& grid,
                                    EstimateOptions options) {
  if (descriptor_marks_rs_unreliable(ensemble)) options.rs_unreliable = true;
  return estimate_exponents(build_grid_table(ensemble, grid, options.threads), options);
}

bool descriptor_marks_rs_unreliable(const PathEnsemble& ensemble) noexcept {
  if (ensemble.descriptor().empty()) return false;
  try {
    return ProcessSpec::from_json(ensemble.descriptor()).rs_unreliable();
  } catch (...) {
    return false;
  }
}

}  // namespace anscale
