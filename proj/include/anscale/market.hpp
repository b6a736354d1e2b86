#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "anscale/core.hpp"
#include "anscale/estimators.hpp"

namespace anscale {

/// Close prices aligned to the session minute grid, one row per day.
struct SessionMatrix {
  std::size_t n_days = 0;
  std::size_t n_minutes = 390;
  std::vector<double> close;  // row-major n_days x n_minutes
  std::string symbol;
  std::vector<std::string> calendar;
  std::vector<std::string> warnings;  // dropped days and similar notices

  double at(std::size_t day, std::size_t minute) const { return close[day * n_minutes + minute]; }
};

struct IngestOptions {
  char delimiter = ',';
  /// Unset: a first row whose close field is not numeric is taken as a header.
  std::optional<bool> header;
  /// Zero-based field positions. Date and time may share a field
  /// ("2020-01-02 09:30"); set both to the same index.
  std::size_t date_column = 0;
  std::size_t time_column = 1;
  std::size_t close_column = 5;
  std::string symbol;
  /// Minutes after midnight of the first session bar (09:30).
  int session_open = 9 * 60 + 30;
  std::size_t n_minutes = 390;
  std::size_t max_days = 2500;
  /// Days whose last bar falls this many minutes or more before the session
  /// end are early closes and are dropped.
  int half_day_cutoff = 60;
};

/// Rows are grouped by date in file order; days are assumed chronological.
SessionMatrix ingest_prices(std::istream& in, const IngestOptions& options = {});
SessionMatrix ingest_prices(const std::filesystem::path& path, const IngestOptions& options = {});

/// date,time,open,high,low,close,volume with all four prices equal to close.
void write_minute_bars(std::ostream& out, const SessionMatrix& sessions, int session_open = 9 * 60 + 30);

/// Ground-truth market: every day is Brownian noise except minutes
/// [vdp_start, vdp_end), which carry a fresh VDP(H) path started at zero.
/// Log prices are scale times the cumulative increments.
struct SyntheticMarket {
  double H = 0.3;
  std::size_t days = 2500;
  std::size_t n_minutes = 390;
  std::int64_t vdp_start = 20;
  std::int64_t vdp_end = 190;
  double scale = 1e-3;
  double open_price = 100.0;
  std::uint64_t seed = 0;
  std::string symbol = "SYNTH";
};

/// Day d draws from stream (seed, d); calendar dates count up from 2000-01-03.
SessionMatrix synthesize_sessions(const SyntheticMarket& spec);

/// One path per day, delta_t = ln(P_{t+1} / P_t); n_minutes - 1 steps.
PathEnsemble to_return_ensemble(const SessionMatrix& sessions);

/// Subtracts the across-days mean increment at every minute.
PathEnsemble detrend(const PathEnsemble& ensemble);

struct IntervalSpec {
  std::int64_t start = 30;
  std::int64_t end = 190;
  std::int64_t t_min = 10;
  std::int64_t grid_count = 60;

  void validate() const;
  TimeGrid grid() const;
  std::string label() const;  // "30:190"
};

/// Parses "start:end".
IntervalSpec parse_interval(const std::string& text);

/// Increments start..end-1, so X restarts at zero at the interval start.
PathEnsemble extract_interval(const PathEnsemble& ensemble, const IntervalSpec& spec);

struct IntervalResult {
  IntervalSpec spec;
  TimeGrid grid;
  ExponentAnalysis analysis;
};

struct MarketAnalysis {
  std::size_t n_days = 0;
  StatisticSeries profile;  // E_e|delta_t| after detrending
  std::vector<IntervalResult> intervals;
};

MarketAnalysis analyze_market(const SessionMatrix& sessions, const std::vector<IntervalSpec>& intervals,
                              const EstimateOptions& options);

}  // namespace anscale
