#include "anscale/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "anscale/error.hpp"
#include "anscale/estimators.hpp"
#include "anscale/parallel.hpp"
#include "anscale/rng.hpp"

namespace anscale {
namespace {


// Times are rescaled to u = t / t_max inside the solver; amplitudes are
// converted back on the way out.
struct Problem {
  Eigen::VectorXd log_u;
  Eigen::VectorXd y;
  Eigen::VectorXd sqrt_w;  // normalised to max 1
  double w_scale = 1.0;    // removed normalisation, restored in residual_norm
  double t_ref = 1.0;
  bool free_omega = true;
  double fixed_omega = 0.0;
  double s_min = 0.0;  // bounds on s = log c
  double s_max = 0.0;
  double max_correction = 1.0;
};


// The model is linear in (a, b) once omega and c are fixed, so the damped
// search runs over theta = (omega, s) (or just s with omega known), c = exp(s),
// and the amplitudes are the weighted least-squares solution at each theta.
struct Params {
  double omega = 0.0;
  double a = 0.0;
  double b = 0.0;
  double s = 0.0;
};


// In the rescaled frame both terms equal their amplitude at t_max.
bool admissible(const Problem& pr, const Params& p) noexcept {
  return std::abs(p.b) <= pr.max_correction * std::abs(p.a);
}

struct Projection {
  bool ok = false;
  Params p;
  Eigen::VectorXd r;  // weighted residual, model minus data
  Eigen::MatrixXd J;  // d r / d theta (exact gradient, Kaufman form)
};

Projection project(const Problem& pr, double omega, double s, bool want_jacobian) {
  Projection out;
  const Eigen::Index n = pr.y.size();
  const double c = std::exp(s);
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd wy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = pr.sqrt_w[i] * std::exp(omega * pr.log_u[i]);
    A(i, 1) = pr.sqrt_w[i] * std::exp((omega - c) * pr.log_u[i]);
    wy[i] = pr.sqrt_w[i] * pr.y[i];
  }
  if (!A.allFinite()) return out;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::Matrix2d R = qr.matrixQR().topLeftCorner(2, 2).triangularView<Eigen::Upper>();
  if (std::abs(R(1, 1)) <= 1e-14 * std::abs(R(0, 0))) return out;
  const Eigen::Vector2d x = qr.solve(wy);
  if (!x.allFinite()) return out;
  out.p = {omega, x[0], x[1], s};
  out.r = A * x - wy;
  out.ok = true;
  if (!want_jacobian) return out;

  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 2);
  auto perp = [&Q](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v - Q * (Q.transpose() * v); };
  const Eigen::Index m = pr.free_omega ? 2 : 1;
  out.J.resize(n, m);
  Eigen::Index k = 0;
  if (pr.free_omega) {
    // dA/domega = log_u * A
    out.J.col(k++) = perp(pr.log_u.cwiseProduct(A * x));
  }
  out.J.col(k) = perp((-c * x[1]) * pr.log_u.cwiseProduct(A.col(1)));
  return out;
}

// Cosine between the residual and every Jacobian column.
bool stationary(const Eigen::MatrixXd& J, const Eigen::VectorXd& r) {
  const double rn = r.norm();
  if (rn == 0.0) return true;
  const Eigen::VectorXd g = J.transpose() * r;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double jn = J.col(k).norm();
    if (jn > 0.0 && std::abs(g[k]) > 1e-9 * jn * rn) return false;
  }
  return true;
}

struct LmOutcome {
  Params p;
  double cost = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

LmOutcome levenberg_marquardt(const Problem& pr, double omega0, double s0, const FitOptions& opt) {
  LmOutcome out;
  const Eigen::Index m = pr.free_omega ? 2 : 1;
  const Eigen::Index s_idx = m - 1;
  Eigen::VectorXd th(m);
  if (pr.free_omega) th[0] = omega0;
  th[s_idx] = std::clamp(s0, pr.s_min, pr.s_max);
  auto omega_of = [&](const Eigen::VectorXd& v) { return pr.free_omega ? v[0] : pr.fixed_omega; };

  Projection cur = project(pr, omega_of(th), th[s_idx], true);
  if (!cur.ok || !admissible(pr, cur.p)) return out;
  const Eigen::Index n = pr.y.size();
  const double y_scale = (pr.sqrt_w.array() * pr.y.array()).square().sum();
  double cost = cur.r.squaredNorm();

  Eigen::VectorXd diag = cur.J.colwise().squaredNorm().transpose();
  diag = diag.cwiseMax(1e-12 * std::max(diag.maxCoeff(), 1e-300));
  double lambda = 1e-3;
  double nu = 2.0;

  auto at_bound = [&](const Eigen::VectorXd& v) { return v[s_idx] <= pr.s_min || v[s_idx] >= pr.s_max; };
  auto is_stationary = [&](const Projection& pj, const Eigen::VectorXd& v) {
    Eigen::MatrixXd Jf = pj.J;
    if (at_bound(v)) Jf.col(s_idx).setZero();
    return stationary(Jf, pj.r);
  };

  Eigen::MatrixXd aug(n + m, m);
  Eigen::VectorXd rhs(n + m);
  int it = 0;
  bool converged = cost <= 1e-30 * y_scale || is_stationary(cur, th);
  while (!converged && it < opt.max_iterations) {
    ++it;
    aug.topRows(n) = cur.J;
    aug.bottomRows(m).setZero();
    for (Eigen::Index k = 0; k < m; ++k) aug(n + k, k) = std::sqrt(lambda * diag[k]);
    rhs.head(n) = -cur.r;
    rhs.tail(m).setZero();
    Eigen::VectorXd delta = aug.colPivHouseholderQr().solve(rhs);
    if (!delta.allFinite()) break;
    // On a bound of c with the step pointing outward, c is held for this step.
    if ((th[s_idx] <= pr.s_min && delta[s_idx] < 0.0) || (th[s_idx] >= pr.s_max && delta[s_idx] > 0.0)) {
      aug.col(s_idx).head(n).setZero();
      delta = aug.colPivHouseholderQr().solve(rhs);
      if (!delta.allFinite()) break;
      delta[s_idx] = 0.0;
    }
    Eigen::VectorXd trial = th + delta;
    trial[s_idx] = std::clamp(trial[s_idx], pr.s_min, pr.s_max);
    const Eigen::VectorXd step = trial - th;
    const double predicted = cost - (cur.r + cur.J * step).squaredNorm();
    Projection next = project(pr, omega_of(trial), trial[s_idx], true);
    const double new_cost = next.ok ? next.r.squaredNorm() : std::numeric_limits<double>::infinity();

    if (next.ok && admissible(pr, next.p) && std::isfinite(new_cost) && new_cost < cost) {
      const double rho = predicted > 0.0 ? (cost - new_cost) / predicted : 1.0;
      const double rel_step = step.norm() / (th.norm() + opt.step_tolerance);
      const double rel_cost = (cost - new_cost) / std::max(cost, 1e-300);
      th = trial;
      cost = new_cost;
      cur = std::move(next);
      diag = diag.cwiseMax(cur.J.colwise().squaredNorm().transpose());
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (rel_step < opt.step_tolerance || rel_cost < opt.cost_tolerance ||
          cost <= 1e-30 * y_scale || is_stationary(cur, th)) {
        converged = true;
      }
    } else {
      // A rejected step this small means we are sitting on the minimum.
      if (step.norm() <= opt.step_tolerance * (th.norm() + opt.step_tolerance)) {
        converged = true;
        break;
      }
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e30) break;
    }
  }
  out.p = cur.p;
  out.cost = cost;
  out.converged = converged;
  out.iterations = it;
  return out;
}

double initial_omega(const Problem& pr) {
  const Eigen::Index n = pr.y.size();
  // last decade in t, or the last third when the grid spans less than that
  std::vector<Eigen::Index> idx;
  const double lu_max = pr.log_u[n - 1];
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pr.log_u[i] >= lu_max - std::log(10.0)) idx.push_back(i);
  }
  if (idx.size() < 3) {
    idx.clear();
    for (Eigen::Index i = n - std::max<Eigen::Index>(2, n / 3); i < n; ++i) idx.push_back(i);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto i : idx) {
    const double lx = pr.log_u[i];
    const double ly = std::log(pr.y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double k = static_cast<double>(idx.size());
  const double den = k * sxx - sx * sx;
  if (den <= 0.0) return 0.5;
  return (k * sxy - sx * sy) / den;
}

Problem make_problem(const StatisticSeries& series, bool free_omega, double omega,
                     const FitOptions& opt) {
  const std::size_t n = series.size();
  if (series.grid.size() != n) throw Error(Errc::invalid_range, "series grid and values differ in length");
  const std::size_t n_params = free_omega ? 4 : 3;
  if (n < n_params) {
    throw Error(Errc::rank_deficient, "fit needs at least " + std::to_string(n_params) +
                                          " points, got " + std::to_string(n));
  }
  if (!(opt.c_min > 0.0) || !(opt.c_max > opt.c_min)) {
    throw Error(Errc::domain, "correction exponent bounds need 0 < c_min < c_max");
  }
  Problem pr;
  pr.s_min = std::log(opt.c_min);
  pr.s_max = std::log(opt.c_max);
  if (!(opt.max_correction > 0.0)) throw Error(Errc::domain, "max_correction must be positive");
  pr.max_correction = opt.max_correction;
  pr.free_omega = free_omega;
  pr.fixed_omega = omega;
  pr.t_ref = static_cast<double>(series.grid.points.back());
  pr.log_u.resize(static_cast<Eigen::Index>(n));
  pr.y.resize(static_cast<Eigen::Index>(n));
  pr.sqrt_w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  bool use_weights = series.variances.has_value() && series.variances->size() == n;
  if (use_weights) {
    for (double v : *series.variances) {
      if (!(v > 0.0) || !std::isfinite(v)) use_weights = false;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double y = series.values[i];
    if (!(y > 0.0) || !std::isfinite(y)) {
      throw Error(Errc::domain, "fit needs strictly positive values; got " + std::to_string(y) +
                                    " at t=" + std::to_string(series.grid.points[i]));
    }
    const auto e = static_cast<Eigen::Index>(i);
    pr.log_u[e] = std::log(static_cast<double>(series.grid.points[i]) / pr.t_ref);
    pr.y[e] = y;
    if (use_weights) pr.sqrt_w[e] = 1.0 / std::sqrt((*series.variances)[i]);
  }
  if (use_weights) {
    pr.w_scale = pr.sqrt_w.maxCoeff();
    pr.sqrt_w /= pr.w_scale;
  }
  if (pr.log_u.maxCoeff() - pr.log_u.minCoeff() <= 0.0) {
    throw Error(Errc::rank_deficient, "fit needs at least two distinct times");
  }
  return pr;
}

FitResult run_fit(const StatisticSeries& series, bool free_omega, double omega,
                  const FitOptions& opt) {
  const Problem pr = make_problem(series, free_omega, omega, opt);
  const double omega0 = free_omega ? initial_omega(pr) : omega;

  std::vector<std::pair<double, double>> starts;  // (omega, s)
  for (double c0 : opt.c_starts) {
    if (c0 > 0.0) starts.emplace_back(omega0, std::log(c0));
  }
  if (opt.warm_start && opt.warm_start->c > 0.0 && std::isfinite(opt.warm_start->omega)) {
    starts.emplace_back(free_omega ? opt.warm_start->omega : omega, std::log(opt.warm_start->c));
  }
  if (starts.empty()) throw Error(Errc::non_convergence, "no usable starting point");

  LmOutcome best;
  int total_iterations = 0;
  for (const auto& [om, s0] : starts) {
    auto o = levenberg_marquardt(pr, om, s0, opt);
    total_iterations += o.iterations;
    if (o.converged && o.cost < best.cost) best = o;
  }
  if (!best.converged) {
    throw Error(Errc::non_convergence,
                "no start converged within " + std::to_string(opt.max_iterations) + " iterations");
  }

  FitResult f;
  f.model = free_omega ? FitResult::Model::free_exponent : FitResult::Model::known_exponent;
  f.omega = best.p.omega;
  f.c = std::exp(best.p.s);
  f.a = best.p.a * std::pow(pr.t_ref, -f.omega);
  f.b = best.p.b * std::pow(pr.t_ref, -(f.omega - f.c));
  f.residual_norm = std::sqrt(best.cost) * pr.w_scale;
  f.converged = true;
  f.iterations = total_iterations;
  f.tau = try_convergence_timescale(f);
  return f;
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  // Shifting by the first value keeps identical replicates at exactly zero.
  std::vector<double> d(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d[i] = v[i] - v[0];
  const double m = pairwise_sum(d) / static_cast<double>(v.size());
  for (double& x : d) x = (x - m) * (x - m);
  return std::sqrt(pairwise_sum(d) / static_cast<double>(v.size() - 1));
}

}  // namespace

double FitResult::evaluate(double t) const noexcept {
  return a * std::pow(t, omega) + b * std::pow(t, omega - c);
}

std::string_view to_string(FitResult::Model m) noexcept {
  return m == FitResult::Model::free_exponent ? "free-exponent" : "known-exponent";
}

FitResult fit_ftc_free(const StatisticSeries& series, const FitOptions& options) {
  return run_fit(series, true, 0.0, options);
}

FitResult fit_ftc_known(const StatisticSeries& series, double omega, const FitOptions& options) {
  if (!std::isfinite(omega)) throw Error(Errc::domain, "known exponent must be finite");
  return run_fit(series, false, omega, options);
}

std::optional<double> try_convergence_timescale(const FitResult& fit) noexcept {
  if (fit.a == 0.0 || !(fit.c > 0.0)) return std::nullopt;
  const double ratio = -fit.b / fit.a;
  if (!(ratio > 0.0) || !std::isfinite(ratio)) return std::nullopt;
  const double tau = std::pow(ratio, 1.0 / fit.c);
  if (!std::isfinite(tau)) return std::nullopt;
  return tau;
}

double convergence_timescale(const FitResult& fit) {
  if (auto tau = try_convergence_timescale(fit)) return *tau;
  throw Error(Errc::undefined_timescale,
              "tau needs a != 0 and -b/a > 0 (a=" + std::to_string(fit.a) +
                  ", b=" + std::to_string(fit.b) + ")");
}

std::map<StatisticKind, BootstrapResult> bootstrap_statistics(
    const GridTable& table, std::span<const StatisticKind> kinds, const BootstrapOptions& options) {
  const std::size_t B = options.replicates;
  const std::size_t n = table.n_paths;
  const std::size_t G = table.grid.size();
  if (B < 2) throw Error(Errc::invalid_range, "bootstrap needs at least 2 replicates");
  if (n == 0) throw Error(Errc::empty_input, "no paths to resample");

  std::map<StatisticKind, BootstrapResult> out;
  for (auto kind : kinds) out[kind].series = compute_series(table, kind);

  // replicate series, one slot per (kind, replicate)
  const std::size_t K = kinds.size();
  std::vector<std::vector<double>> rep_values(K * B);
  std::vector<char> rep_ok(K * B, 0);
  std::vector<std::vector<std::uint32_t>> orders(K);
  for (std::size_t k = 0; k < K; ++k) orders[k] = sort_columns(table, kinds[k]);
  parallel_for(B, options.threads, [&](std::size_t r, std::size_t) {
    RngStream stream(options.seed, kBootstrapStreamBase + r);
    std::vector<std::uint32_t> counts(n, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[stream.index(n)];
    for (std::size_t k = 0; k < K; ++k) {
      try {
        rep_values[k * B + r] = compute_series_resampled(table, kinds[k], counts, orders[k]).values;
        rep_ok[k * B + r] = 1;
      } catch (const Error&) {
      }
    }
  });

  for (std::size_t k = 0; k < K; ++k) {
    BootstrapResult& res = out[kinds[k]];
    std::vector<double> var(G, 0.0);
    std::vector<double> col;
    for (std::size_t g = 0; g < G; ++g) {
      col.clear();
      for (std::size_t r = 0; r < B; ++r) {
        if (rep_ok[k * B + r]) col.push_back(rep_values[k * B + r][g]);
      }
      const double sd = sample_sd(col);
      var[g] = sd * sd;
    }
    res.series.variances = var;

    res.fit = options.known_omega ? fit_ftc_known(res.series, *options.known_omega, options.fit)
                                  : fit_ftc_free(res.series, options.fit);

    FitOptions refit = options.fit;
    refit.warm_start = res.fit;
    std::vector<std::optional<FitResult>> fits(B);
    parallel_for(B, options.threads, [&](std::size_t r, std::size_t) {
      if (!rep_ok[k * B + r]) return;
      StatisticSeries s;
      s.grid = res.series.grid;
      s.kind = res.series.kind;
      s.values = rep_values[k * B + r];
      s.variances = var;
      try {
        fits[r] = options.known_omega ? fit_ftc_known(s, *options.known_omega, refit)
                                      : fit_ftc_free(s, refit);
      } catch (const Error&) {
      }
    });

    std::vector<double> om, a, b, c, tau;
    for (const auto& f : fits) {
      if (!f) {
        ++res.failed_replicates;
        continue;
      }
      om.push_back(f->omega);
      a.push_back(f->a);
      b.push_back(f->b);
      c.push_back(f->c);
      if (f->tau) tau.push_back(*f->tau);
    }
    if (5 * res.failed_replicates > B) {
      throw Error(Errc::bootstrap_failure,
                  std::string(to_string(kinds[k])) + ": " + std::to_string(res.failed_replicates) +
                      " of " + std::to_string(B) + " replicates failed");
    }
    res.replicate_omegas = om;
    res.fit.omega_stderr = options.known_omega ? 0.0 : sample_sd(om);
    res.fit.a_stderr = sample_sd(a);
    res.fit.b_stderr = sample_sd(b);
    res.fit.c_stderr = sample_sd(c);
    if (res.fit.tau && tau.size() >= 2) res.fit.tau_stderr = sample_sd(tau);
  }
  return out;
}

BootstrapResult bootstrap_stderr(const GridTable& table, StatisticKind kind,
                                 const BootstrapOptions& options) {
  const StatisticKind kinds[1] = {kind};
  auto m = bootstrap_statistics(table, kinds, options);
  return std::move(m.begin()->second);
}

BootstrapResult bootstrap_stderr(const PathEnsemble& ensemble, StatisticKind kind,
                                 const TimeGrid& grid, const BootstrapOptions& options) {
  return bootstrap_stderr(build_grid_table(ensemble, grid, options.threads), kind, options);
}

}  // namespace anscale
