#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "anscale/ensemble_io.hpp"
#include "anscale/error.hpp"
#include "anscale/estimators.hpp"
#include "anscale/generators.hpp"
#include "anscale/market.hpp"
#include "anscale/parallel.hpp"
#include "anscale/report.hpp"

namespace anscale::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GenerateFlags {
  std::string family;
  std::optional<double> J, L, M, H, epsilon;
  std::optional<int> mesh, window, substeps;
  std::optional<std::string> vdp_shape;
  std::size_t paths = 0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string output;
  std::string format = "auto";
};

struct EstimateFlags {
  std::string input;
  std::int64_t t_min = 50;
  std::int64_t count = 500;
  std::size_t bootstrap = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double k_sigma = 3.0;
  double c_min = FitOptions{}.c_min;
  double max_correction = FitOptions{}.max_correction;
  std::string output;
  std::string csv_dir;
};

struct MarketFlags {
  std::string input;
  std::vector<std::string> intervals{"30:190", "260:380"};
  std::int64_t t_min = 10;
  std::int64_t grid = 60;
  std::size_t bootstrap = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double k_sigma = 3.0;
  std::string delimiter = ",";
  std::optional<bool> header;
  std::size_t date_col = 0;
  std::size_t time_col = 1;
  std::size_t close_col = 5;
  std::string session_open = "09:30";
  std::size_t minutes = 390;
  std::size_t max_days = 2500;
  int half_day_cutoff = 60;
  std::string symbol;
  std::string output;
  std::string csv_dir;
};

struct SynthFlags {
  SyntheticMarket spec;
  std::string output;
};

// Errors that mean "the request itself is wrong" rather than "the numbers
// did not work out".
bool is_input_error(Errc c) {
  switch (c) {
    case Errc::family_mismatch:
    case Errc::domain:
    case Errc::invalid_range:
    case Errc::out_of_range:
    case Errc::io:
    case Errc::format:
    case Errc::malformed_row:
    case Errc::no_days:
    case Errc::nonpositive_price:
    case Errc::interval_out_of_range:
    case Errc::empty_input:
      return true;
    default:
      return false;
  }
}

void write_json(const json& j, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error(Errc::io, "cannot write " + path);
  f << j.dump(2) << '\n';
}

void write_statistic_csvs(const fs::path& dir, const std::string& prefix, const ExponentAnalysis& a) {
  fs::create_directories(dir);
  for (const auto& s : a.statistics) {
    const std::string kind(to_string(s.series.kind));
    std::ofstream series(dir / (prefix + kind + "_series.csv"));
    std::ofstream fit(dir / (prefix + kind + "_fit.csv"));
    if (!series || !fit) throw Error(Errc::io, "cannot write CSVs under " + dir.string());
    write_series_csv(series, s.series);
    write_fit_csv(fit, s.series, s.fit);
  }
}

int parse_clock(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    const int h = std::stoi(text.substr(0, colon));
    const int m = std::stoi(text.substr(colon + 1));
    if (h < 0 || h > 23 || m < 0 || m > 59) throw std::invalid_argument(text);
    return h * 60 + m;
  } catch (const std::logic_error&) {
    throw Error(Errc::format, "session open must look like HH:MM, got " + text);
  }
}

ProcessSpec spec_from_flags(const GenerateFlags& f) {
  ProcessSpec spec;
  spec.family = family_from_string(f.family);
  spec.J = f.J;
  spec.L = f.L;
  spec.M = f.M;
  spec.H = f.H;
  spec.epsilon = f.epsilon;
  spec.flm_mesh = f.mesh;
  spec.flm_window = f.window;
  spec.vdp_substeps = f.substeps;
  if (f.vdp_shape) {
    if (*f.vdp_shape == "constant") {
      spec.vdp_shape = VdpShape::constant;
    } else if (*f.vdp_shape == "bi-exponential") {
      spec.vdp_shape = VdpShape::bi_exponential;
    } else {
      throw Error(Errc::domain, "--vdp-shape must be bi-exponential or constant");
    }
  }
  // Tuning knobs take their defaults when the family uses them.
  if (spec.family == Family::FLM || spec.family == Family::SFLM) {
    if (!spec.flm_mesh) spec.flm_mesh = kDefaultFlmMesh;
    if (!spec.flm_window) spec.flm_window = kFlmAutoWindow;
  }
  if (spec.family == Family::VDP) {
    if (!spec.epsilon) spec.epsilon = 1.0;
    if (!spec.vdp_substeps) spec.vdp_substeps = kDefaultVdpSubsteps;
    if (!spec.vdp_shape) spec.vdp_shape = VdpShape::bi_exponential;
  }
  spec.validate();
  return spec;
}

int cmd_generate(const GenerateFlags& f, std::ostream& out, std::ostream& err) {
  ProcessSpec spec;
  try {
    spec = spec_from_flags(f);
    if (f.paths == 0 || f.steps == 0) throw Error(Errc::invalid_range, "--paths and --steps must be >= 1");
    if (f.format != "auto" && f.format != "binary" && f.format != "csv") {
      throw Error(Errc::domain, "--format must be auto, binary or csv");
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (spec.rs_unreliable()) {
    err << "warning: R/S-unreliable: " << spec.label()
        << " has J < 1/2, the Joseph exponent from R/S is not meaningful\n";
  }
  try {
    const PathEnsemble ensemble = generate(spec, f.paths, f.steps, f.seed, f.threads);
    const bool csv = f.format == "csv" || (f.format == "auto" && fs::path(f.output).extension() == ".csv");
    std::ofstream file(f.output, std::ios::binary);
    if (!file) throw Error(Errc::io, "cannot write " + f.output);
    if (csv) {
      write_ensemble_csv(file, ensemble);
    } else {
      write_ensemble_binary(file, ensemble);
    }
    if (!file.flush()) throw Error(Errc::io, "write failed for " + f.output);
  } catch (const Error& e) {
    err << "error: generation failed: " << e.what() << '\n';
    return kExitGeneration;
  }
  out << spec.to_json() << '\n';
  return kExitOk;
}

EstimateOptions estimate_options(std::size_t bootstrap, std::uint64_t seed, std::size_t threads,
                                 double k_sigma) {
  EstimateOptions o;
  o.bootstrap_replicates = bootstrap;
  o.seed = seed;
  o.threads = threads;
  o.k_sigma = k_sigma;
  return o;
}

int cmd_estimate(const EstimateFlags& f, std::ostream& out, std::ostream& err) {
  PathEnsemble ensemble;
  TimeGrid grid;
  try {
    if (!fs::exists(f.input)) throw Error(Errc::io, "no such file: " + f.input);
    ensemble = load_ensemble(f.input);
    grid = make_time_grid(f.t_min, static_cast<std::int64_t>(ensemble.n_steps()), f.count);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  EstimateOptions opts = estimate_options(f.bootstrap, f.seed, f.threads, f.k_sigma);
  opts.fit.c_min = f.c_min;
  opts.fit.max_correction = f.max_correction;
  ExponentAnalysis analysis;
  try {
    analysis = estimate_exponents(ensemble, grid, opts);
  } catch (const Error& e) {
    err << "error: estimation failed: " << e.what() << '\n';
    return kExitEstimation;
  }

  json report = to_json(analysis);
  report["config"] = {{"command", "estimate"},
                      {"input", f.input},
                      {"t_min", f.t_min},
                      {"count", f.count},
                      {"bootstrap", f.bootstrap},
                      {"seed", f.seed},
                      {"threads", f.threads},
                      {"k_sigma", f.k_sigma},
                      {"c_min", f.c_min},
                      {"max_correction", f.max_correction},
                      {"c_starts", opts.fit.c_starts},
                      {"max_iterations", opts.fit.max_iterations},
                      {"grid", to_json(grid)}};
  report["ensemble"] = {{"n_paths", ensemble.n_paths()},
                        {"n_steps", ensemble.n_steps()},
                        {"master_seed", ensemble.master_seed()}};
  if (!ensemble.descriptor().empty()) {
    try {
      report["ensemble"]["descriptor"] = json::parse(ensemble.descriptor());
    } catch (const json::exception&) {
      report["ensemble"]["descriptor"] = ensemble.descriptor();
    }
  }
  try {
    write_json(report, f.output, out);
    if (!f.csv_dir.empty()) write_statistic_csvs(f.csv_dir, "", analysis);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_market(const MarketFlags& f, std::ostream& out, std::ostream& err) {
  SessionMatrix sessions;
  std::vector<IntervalSpec> intervals;
  IngestOptions io;
  try {
    if (f.delimiter.size() != 1) throw Error(Errc::domain, "--delimiter must be a single character");
    io.delimiter = f.delimiter == "t" ? '\t' : f.delimiter[0];
    io.header = f.header;
    io.date_column = f.date_col;
    io.time_column = f.time_col;
    io.close_column = f.close_col;
    io.symbol = f.symbol;
    io.session_open = parse_clock(f.session_open);
    io.n_minutes = f.minutes;
    io.max_days = f.max_days;
    io.half_day_cutoff = f.half_day_cutoff;
    for (const auto& text : f.intervals) {
      IntervalSpec spec = parse_interval(text);
      spec.t_min = f.t_min;
      spec.grid_count = f.grid;
      spec.validate();
      intervals.push_back(spec);
    }
    if (!fs::exists(f.input)) throw Error(Errc::io, "no such file: " + f.input);
    sessions = ingest_prices(fs::path(f.input), io);
    for (const auto& w : sessions.warnings) err << "warning: " << w << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  MarketAnalysis analysis;
  try {
    analysis = analyze_market(sessions, intervals, estimate_options(f.bootstrap, f.seed, f.threads, f.k_sigma));
  } catch (const Error& e) {
    err << "error: market analysis failed: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitUsage : kExitEstimation;
  }

  json report;
  report["config"] = {{"command", "market"},
                      {"input", f.input},
                      {"intervals", f.intervals},
                      {"t_min", f.t_min},
                      {"grid", f.grid},
                      {"bootstrap", f.bootstrap},
                      {"seed", f.seed},
                      {"threads", f.threads},
                      {"k_sigma", f.k_sigma},
                      {"delimiter", std::string(1, io.delimiter)},
                      {"header", f.header ? json(*f.header) : json("auto")},
                      {"date_col", f.date_col},
                      {"time_col", f.time_col},
                      {"close_col", f.close_col},
                      {"session_open", f.session_open},
                      {"minutes", f.minutes},
                      {"max_days", f.max_days},
                      {"half_day_cutoff", f.half_day_cutoff}};
  report["symbol"] = sessions.symbol;
  report["n_days"] = analysis.n_days;
  report["first_day"] = sessions.calendar.front();
  report["last_day"] = sessions.calendar.back();
  report["warnings"] = sessions.warnings;
  for (const auto& r : analysis.intervals) {
    json j = to_json(r.analysis);
    j["interval"] = to_json(r.spec);
    j["label"] = (sessions.symbol.empty() ? std::string() : sessions.symbol) + "(" + r.spec.label() + ")";
    report["intervals"].push_back(j);
  }
  try {
    write_json(report, f.output, out);
    if (!f.csv_dir.empty()) {
      fs::create_directories(f.csv_dir);
      std::ofstream profile(fs::path(f.csv_dir) / "profile.csv");
      if (!profile) throw Error(Errc::io, "cannot write CSVs under " + f.csv_dir);
      write_series_csv(profile, analysis.profile);
      for (const auto& r : analysis.intervals) {
        write_statistic_csvs(f.csv_dir, std::to_string(r.spec.start) + "_" + std::to_string(r.spec.end) + "_",
                             r.analysis);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_synth_market(const SynthFlags& f, std::ostream& out, std::ostream& err) {
  SessionMatrix sessions;
  try {
    sessions = synthesize_sessions(f.spec);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitUsage : kExitGeneration;
  }
  std::ofstream file(f.output);
  if (!file) {
    err << "error: cannot write " << f.output << '\n';
    return kExitUsage;
  }
  write_minute_bars(file, sessions);
  out << json{{"H", f.spec.H},
              {"days", f.spec.days},
              {"minutes", f.spec.n_minutes},
              {"vdp_start", f.spec.vdp_start},
              {"vdp_end", f.spec.vdp_end},
              {"scale", f.spec.scale},
              {"seed", f.spec.seed}}
             .dump()
      << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulate self-similar processes and estimate their scaling exponents", "anscale"};
  app.require_subcommand(1);
  const std::size_t default_threads = default_thread_count();

  GenerateFlags gen;
  gen.threads = default_threads;
  auto* g = app.add_subcommand("generate", "Write an ensemble of increments to a file");
  g->add_option("--family", gen.family, "bm, sbm, fbm, sfbm, lm, slm, flm, sflm or vdp")->required();
  g->add_option("--J", gen.J, "Joseph exponent");
  g->add_option("--L", gen.L, "latent (Levy) exponent, 1/alpha");
  g->add_option("--M", gen.M, "Moses exponent");
  g->add_option("--H", gen.H, "Hurst exponent (VDP)");
  g->add_option("--epsilon", gen.epsilon, "VDP diffusion shape parameter (default 1)");
  g->add_option("--mesh", gen.mesh, "FLM mesh refinement (default 4)");
  g->add_option("--window", gen.window, "FLM kernel window in fine steps (default 0: four path lengths)");
  g->add_option("--substeps", gen.substeps, "VDP Euler substeps per unit time (default 16)");
  g->add_option("--vdp-shape", gen.vdp_shape, "bi-exponential (default) or constant");
  g->add_option("--paths", gen.paths, "number of paths")->required();
  g->add_option("--steps", gen.steps, "increments per path")->required();
  g->add_option("--seed", gen.seed, "master seed");
  g->add_option("--threads", gen.threads, "worker threads");
  g->add_option("-o,--output", gen.output, "output file (.csv selects CSV)")->required();
  g->add_option("--format", gen.format, "auto, binary or csv");

  EstimateFlags est;
  est.threads = default_threads;
  auto* e = app.add_subcommand("estimate", "Estimate J, L, M, H from an ensemble file");
  e->add_option("input", est.input, "ensemble file")->required();
  e->add_option("--t-min", est.t_min, "first grid time");
  e->add_option("--count", est.count, "grid points before rounding");
  e->add_option("--bootstrap", est.bootstrap, "bootstrap replicates (0 or 1 disables)");
  e->add_option("--seed", est.seed, "bootstrap seed");
  e->add_option("--threads", est.threads, "worker threads");
  e->add_option("--k-sigma", est.k_sigma, "consistency threshold in combined standard errors");
  e->add_option("--c-min", est.c_min, "smallest admissible correction exponent");
  e->add_option("--max-correction", est.max_correction,
                "largest admissible correction relative to the leading term at t_max");
  e->add_option("-o,--output", est.output, "report file (default standard output)");
  e->add_option("--csv-dir", est.csv_dir, "directory for series and fitted-curve CSVs");

  MarketFlags mk;
  mk.threads = default_threads;
  auto* m = app.add_subcommand("market", "Analyse intraday minute bars");
  m->add_option("input", mk.input, "price file")->required();
  m->add_option("--interval", mk.intervals, "start:end in session minutes (repeatable)");
  m->add_option("--t-min", mk.t_min, "first grid time within an interval");
  m->add_option("--grid", mk.grid, "grid points per interval");
  m->add_option("--bootstrap", mk.bootstrap, "bootstrap replicates");
  m->add_option("--seed", mk.seed, "bootstrap seed");
  m->add_option("--threads", mk.threads, "worker threads");
  m->add_option("--k-sigma", mk.k_sigma, "consistency threshold in combined standard errors");
  m->add_option("--delimiter", mk.delimiter, "field separator; 't' for tab");
  m->add_flag("--header,!--no-header", mk.header, "first row is a header (default: detect)");
  m->add_option("--date-col", mk.date_col, "zero-based date column");
  m->add_option("--time-col", mk.time_col, "zero-based time column (equal to --date-col for a combined stamp)");
  m->add_option("--close-col", mk.close_col, "zero-based close column");
  m->add_option("--session-open", mk.session_open, "first session minute, HH:MM");
  m->add_option("--minutes", mk.minutes, "session length in minutes");
  m->add_option("--max-days", mk.max_days, "keep only the most recent days");
  m->add_option("--half-day-cutoff", mk.half_day_cutoff,
                "drop days whose last bar is this many minutes before the close");
  m->add_option("--symbol", mk.symbol, "label for the report");
  m->add_option("-o,--output", mk.output, "report file (default standard output)");
  m->add_option("--csv-dir", mk.csv_dir, "directory for profile, series and fitted-curve CSVs");

  SynthFlags syn;
  auto* s = app.add_subcommand("synth-market", "Write VDP-as-prices minute bars with a known H");
  s->add_option("--H", syn.spec.H, "Hurst exponent of the VDP segment");
  s->add_option("--days", syn.spec.days, "number of days");
  s->add_option("--minutes", syn.spec.n_minutes, "bars per day");
  s->add_option("--vdp-start", syn.spec.vdp_start, "first minute of the VDP segment");
  s->add_option("--vdp-end", syn.spec.vdp_end, "end minute (exclusive) of the VDP segment");
  s->add_option("--scale", syn.spec.scale, "log-price units per increment");
  s->add_option("--seed", syn.spec.seed, "master seed");
  s->add_option("--symbol", syn.spec.symbol, "symbol label");
  s->add_option("-o,--output", syn.output, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out, err);
    if (e->parsed()) return cmd_estimate(est, out, err);
    if (m->parsed()) return cmd_market(mk, out, err);
    if (s->parsed()) return cmd_synth_market(syn, out, err);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace anscale::cli
