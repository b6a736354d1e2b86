#include "anscale/report.hpp"

#include <charconv>
#include <ostream>

namespace anscale {
namespace {

nlohmann::json estimate_json(const Estimate& e) { return {{"value", e.value}, {"stderr", e.stderr_}}; }

void put(std::ostream& out, double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  out.write(buf, end - buf);
}

}  // namespace

nlohmann::json to_json(const TimeGrid& grid) {
  return {{"t_min", grid.t_min}, {"t_max", grid.t_max}, {"count", grid.count}, {"n_points", grid.size()}};
}

nlohmann::json to_json(const ExponentReport& r) {
  nlohmann::json j;
  j["J"] = estimate_json(r.J);
  j["J"]["flags"] = r.rs_unreliable ? nlohmann::json::array({"rs-unreliable"}) : nlohmann::json::array();
  j["L"] = estimate_json(r.L);
  j["M"] = estimate_json(r.M);
  j["H"] = estimate_json(r.H);
  j["sum_J_L_M_minus_1"] = estimate_json(r.sum_check());
  j["k_sigma"] = r.k_sigma;
  j["consistent"] = r.consistent();
  return j;
}

nlohmann::json to_json(const FitResult& f, const TimeGrid& grid) {
  nlohmann::json j{{"model", to_string(f.model)},
                   {"omega", f.omega},
                   {"a", f.a},
                   {"b", f.b},
                   {"c", f.c},
                   {"stderr", {{"omega", f.omega_stderr}, {"a", f.a_stderr}, {"b", f.b_stderr}, {"c", f.c_stderr}}},
                   {"residual_norm", f.residual_norm},
                   {"converged", f.converged},
                   {"iterations", f.iterations},
                   {"grid", to_json(grid)}};
  j["tau"] = f.tau ? nlohmann::json(*f.tau) : nlohmann::json(nullptr);
  j["stderr"]["tau"] = f.tau_stderr ? nlohmann::json(*f.tau_stderr) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const ExponentAnalysis& a) {
  nlohmann::json j{{"exponents", to_json(a.report)},
                   {"n_paths", a.n_paths},
                   {"bootstrap_replicates", a.bootstrap_replicates}};
  for (const auto& s : a.statistics) j["fits"][std::string(to_string(s.series.kind))] = to_json(s.fit, s.series.grid);
  return j;
}

nlohmann::json to_json(const IntervalSpec& s) {
  return {{"start", s.start}, {"end", s.end}, {"t_min", s.t_min}, {"grid_count", s.grid_count}};
}

void write_series_csv(std::ostream& out, const StatisticSeries& s) {
  out << "t,value,variance\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << s.grid.points[i] << ',';
    put(out, s.values[i]);
    out << ',';
    if (s.variances) put(out, (*s.variances)[i]);
    out << '\n';
  }
}

void write_fit_csv(std::ostream& out, const StatisticSeries& s, const FitResult& fit) {
  out << "t,data,model\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << s.grid.points[i] << ',';
    put(out, s.values[i]);
    out << ',';
    put(out, fit.evaluate(static_cast<double>(s.grid.points[i])));
    out << '\n';
  }
}

}  // namespace anscale
