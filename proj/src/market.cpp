#include "anscale/market.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string_view>

#include <nlohmann/json.hpp>

#include "anscale/error.hpp"
#include "anscale/generators.hpp"
#include "anscale/rng.hpp"

namespace anscale {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(delim, pos);
    out.push_back(trim(line.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// HH:MM, HH:MM:SS or HHMM, as minutes after midnight.
std::optional<int> parse_time_of_day(std::string_view s) {
  int h = 0;
  int m = 0;
  if (s.size() == 4 && s.find(':') == std::string_view::npos) {
    auto hh = parse_int(s.substr(0, 2));
    auto mm = parse_int(s.substr(2, 2));
    if (!hh || !mm) return std::nullopt;
    h = *hh;
    m = *mm;
  } else {
    const auto c1 = s.find(':');
    if (c1 == std::string_view::npos) return std::nullopt;
    const auto c2 = s.find(':', c1 + 1);
    auto hh = parse_int(s.substr(0, c1));
    auto mm = parse_int(s.substr(c1 + 1, c2 == std::string_view::npos ? std::string_view::npos : c2 - c1 - 1));
    if (!hh || !mm) return std::nullopt;
    if (c2 != std::string_view::npos && !parse_double(s.substr(c2 + 1))) return std::nullopt;
    h = *hh;
    m = *mm;
  }
  if (h < 0 || h > 23 || m < 0 || m > 59) return std::nullopt;
  return h * 60 + m;
}

[[noreturn]] void malformed(std::size_t line, const std::string& why) {
  throw Error(Errc::malformed_row, "line " + std::to_string(line) + ": " + why);
}

struct DayBuffer {
  std::string date;
  std::vector<double> prices;
  int last_minute = -1;
};

}  // namespace

SessionMatrix ingest_prices(std::istream& in, const IngestOptions& opt) {
  if (opt.n_minutes < 2) throw Error(Errc::invalid_range, "session needs at least 2 minutes");
  if (opt.max_days == 0) throw Error(Errc::invalid_range, "max_days must be >= 1");
  const bool shared_stamp = opt.date_column == opt.time_column;
  const std::size_t needed = std::max({opt.date_column, opt.time_column, opt.close_column}) + 1;
  const int n_min = static_cast<int>(opt.n_minutes);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  SessionMatrix out;
  out.n_minutes = opt.n_minutes;
  out.symbol = opt.symbol;

  std::vector<DayBuffer> days;
  auto finish_day = [&](DayBuffer& d) {
    if (d.last_minute < 0) {
      out.warnings.push_back("day " + d.date + " has no bars inside the session; dropped");
      return;
    }
    if (d.last_minute < n_min - opt.half_day_cutoff) {
      out.warnings.push_back("day " + d.date + " ends at session minute " +
                             std::to_string(d.last_minute) + "; treated as half-day and dropped");
      return;
    }
    double first = nan;
    for (double p : d.prices) {
      if (!std::isnan(p)) {
        first = p;
        break;
      }
    }
    double last = first;
    for (double& p : d.prices) {
      if (std::isnan(p)) {
        p = last;
      } else {
        last = p;
      }
    }
    days.push_back(std::move(d));
  };

  std::optional<DayBuffer> current;
  std::string line;
  std::size_t line_no = 0;
  bool first_data_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, opt.delimiter);
    if (first_data_row) {
      first_data_row = false;
      const bool is_header = opt.header.value_or(
          fields.size() < needed || !parse_double(fields[opt.close_column]).has_value());
      if (is_header) continue;
    }
    if (fields.size() < needed) {
      malformed(line_no, "expected at least " + std::to_string(needed) + " fields, found " +
                             std::to_string(fields.size()));
    }
    std::string_view date = fields[opt.date_column];
    std::string_view time = fields[opt.time_column];
    if (shared_stamp) {
      const auto sep = date.find_first_of(" T");
      if (sep == std::string_view::npos) malformed(line_no, "timestamp lacks a time part");
      time = trim(date.substr(sep + 1));
      date = date.substr(0, sep);
    }
    if (date.empty()) malformed(line_no, "empty date");
    const auto tod = parse_time_of_day(time);
    if (!tod) malformed(line_no, "unreadable time '" + std::string(time) + "'");
    const auto close = parse_double(fields[opt.close_column]);
    if (!close || !std::isfinite(*close)) {
      malformed(line_no, "unreadable close '" + std::string(fields[opt.close_column]) + "'");
    }
    if (*close <= 0.0) {
      throw Error(Errc::nonpositive_price,
                  "line " + std::to_string(line_no) + ": close " + std::to_string(*close));
    }

    if (!current || current->date != date) {
      if (current) finish_day(*current);
      current.emplace();
      current->date = std::string(date);
      current->prices.assign(opt.n_minutes, nan);
    }
    const int minute = *tod - opt.session_open;
    if (minute < 0 || minute >= n_min) continue;
    current->prices[static_cast<std::size_t>(minute)] = *close;
    current->last_minute = std::max(current->last_minute, minute);
  }
  if (current) finish_day(*current);

  if (days.empty()) throw Error(Errc::no_days, "no usable trading days in input");
  const std::size_t skip = days.size() > opt.max_days ? days.size() - opt.max_days : 0;
  out.n_days = days.size() - skip;
  out.close.reserve(out.n_days * opt.n_minutes);
  for (std::size_t d = skip; d < days.size(); ++d) {
    out.calendar.push_back(days[d].date);
    out.close.insert(out.close.end(), days[d].prices.begin(), days[d].prices.end());
  }
  return out;
}

SessionMatrix ingest_prices(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return ingest_prices(in, options);
}

void write_minute_bars(std::ostream& out, const SessionMatrix& s, int session_open) {
  out << "date,time,open,high,low,close,volume\n";
  char buf[64];
  for (std::size_t d = 0; d < s.n_days; ++d) {
    const std::string& date = d < s.calendar.size() ? s.calendar[d] : "day" + std::to_string(d);
    for (std::size_t m = 0; m < s.n_minutes; ++m) {
      const int tod = session_open + static_cast<int>(m);
      const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, s.at(d, m));
      (void)ec;
      const std::string_view price(buf, static_cast<std::size_t>(end - buf));
      char clock[16];
      std::snprintf(clock, sizeof clock, "%02d:%02d", tod / 60, tod % 60);
      out << date << ',' << clock << ',' << price << ',' << price << ',' << price << ',' << price
          << ",0\n";
    }
  }
}

SessionMatrix synthesize_sessions(const SyntheticMarket& spec) {
  if (spec.days == 0) throw Error(Errc::invalid_range, "synthetic market needs at least one day");
  if (spec.n_minutes < 2) throw Error(Errc::invalid_range, "need at least 2 minutes per day");
  if (spec.vdp_start < 0 || spec.vdp_start >= spec.vdp_end ||
      static_cast<std::size_t>(spec.vdp_end) > spec.n_minutes - 1) {
    throw Error(Errc::interval_out_of_range, "VDP segment must lie inside the day's increments");
  }
  if (!(spec.scale > 0.0) || !(spec.open_price > 0.0)) {
    throw Error(Errc::domain, "scale and open price must be positive");
  }
  SessionMatrix out;
  out.n_days = spec.days;
  out.n_minutes = spec.n_minutes;
  out.symbol = spec.symbol;
  out.close.resize(spec.days * spec.n_minutes);
  const auto first_day = std::chrono::sys_days{std::chrono::year{2000} / 1 / 3};
  const std::size_t len = static_cast<std::size_t>(spec.vdp_end - spec.vdp_start);
  const double log_open = std::log(spec.open_price);
  for (std::size_t d = 0; d < spec.days; ++d) {
    RngStream stream(spec.seed, d);
    const auto vdp = vdp_path(spec.H, 1.0, len, kDefaultVdpSubsteps, stream);
    double x = 0.0;
    double* row = out.close.data() + d * spec.n_minutes;
    row[0] = spec.open_price;
    for (std::size_t m = 0; m + 1 < spec.n_minutes; ++m) {
      const auto mm = static_cast<std::int64_t>(m);
      const double delta = mm >= spec.vdp_start && mm < spec.vdp_end
                               ? vdp[m - static_cast<std::size_t>(spec.vdp_start)]
                               : stream.gaussian();
      x += delta;
      row[m + 1] = std::exp(log_open + spec.scale * x);
    }
    const std::chrono::year_month_day ymd{first_day + std::chrono::days{static_cast<int>(d)}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    out.calendar.emplace_back(buf);
  }
  return out;
}

PathEnsemble to_return_ensemble(const SessionMatrix& s) {
  if (s.n_days == 0) throw Error(Errc::no_days, "session matrix is empty");
  if (s.n_minutes < 2) throw Error(Errc::invalid_range, "need at least 2 minutes per day");
  const std::size_t n = s.n_minutes - 1;
  std::vector<double> inc(s.n_days * n);
  for (std::size_t d = 0; d < s.n_days; ++d) {
    for (std::size_t m = 0; m < s.n_minutes; ++m) {
      if (!(s.at(d, m) > 0.0)) {
        throw Error(Errc::nonpositive_price, "day " + std::to_string(d) + " minute " + std::to_string(m));
      }
    }
    for (std::size_t m = 0; m < n; ++m) inc[d * n + m] = std::log(s.at(d, m + 1) / s.at(d, m));
  }
  nlohmann::json desc{{"source", "market"}, {"symbol", s.symbol}, {"n_minutes", s.n_minutes}};
  return PathEnsemble(s.n_days, n, std::move(inc), desc.dump());
}

PathEnsemble detrend(const PathEnsemble& e) {
  const std::size_t P = e.n_paths();
  const std::size_t n = e.n_steps();
  if (P < 2) throw Error(Errc::too_few_paths, "detrending needs at least 2 paths");
  std::vector<double> data(e.increments().begin(), e.increments().end());
  std::vector<double> column(P);
  // The second pass removes the rounding left by the first.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t p = 0; p < P; ++p) column[p] = data[p * n + t];
      const double mean = pairwise_sum(column) / static_cast<double>(P);
      for (std::size_t p = 0; p < P; ++p) data[p * n + t] -= mean;
    }
  }
  return PathEnsemble(P, n, std::move(data), e.descriptor(), e.master_seed());
}

void IntervalSpec::validate() const {
  if (start < 0 || start >= end) {
    throw Error(Errc::interval_out_of_range, "interval needs 0 <= start < end, got " + label());
  }
  if (t_min < 1 || t_min >= end - start) {
    throw Error(Errc::interval_out_of_range,
                "t_min " + std::to_string(t_min) + " must lie in [1, end - start) for " + label());
  }
  if (grid_count < 1) throw Error(Errc::invalid_range, "grid count must be >= 1");
}

TimeGrid IntervalSpec::grid() const {
  validate();
  return make_time_grid(t_min, end - start, grid_count);
}

std::string IntervalSpec::label() const { return std::to_string(start) + ":" + std::to_string(end); }

IntervalSpec parse_interval(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(Errc::format, "interval must look like start:end, got " + text);
  const auto a = parse_int(trim(std::string_view(text).substr(0, colon)));
  const auto b = parse_int(trim(std::string_view(text).substr(colon + 1)));
  if (!a || !b) throw Error(Errc::format, "interval must look like start:end, got " + text);
  IntervalSpec spec;
  spec.start = *a;
  spec.end = *b;
  return spec;
}

PathEnsemble extract_interval(const PathEnsemble& e, const IntervalSpec& spec) {
  spec.validate();
  if (static_cast<std::size_t>(spec.end) > e.n_steps()) {
    throw Error(Errc::interval_out_of_range, "interval " + spec.label() + " exceeds the " +
                                                 std::to_string(e.n_steps()) + " available steps");
  }
  const std::size_t len = static_cast<std::size_t>(spec.end - spec.start);
  std::vector<double> data(e.n_paths() * len);
  for (std::size_t p = 0; p < e.n_paths(); ++p) {
    const auto row = e.row(p);
    std::copy(row.begin() + spec.start, row.begin() + spec.end, data.begin() + static_cast<std::ptrdiff_t>(p * len));
  }
  return PathEnsemble(e.n_paths(), len, std::move(data), e.descriptor(), e.master_seed());
}

MarketAnalysis analyze_market(const SessionMatrix& sessions, const std::vector<IntervalSpec>& intervals,
                              const EstimateOptions& options) {
  for (const auto& spec : intervals) spec.validate();
  const PathEnsemble detrended = detrend(to_return_ensemble(sessions));
  MarketAnalysis out;
  out.n_days = sessions.n_days;
  out.profile = mean_abs_increment_profile(detrended);
  for (const auto& spec : intervals) {
    const PathEnsemble piece = extract_interval(detrended, spec);
    const TimeGrid grid = spec.grid();
    out.intervals.push_back({spec, grid, estimate_exponents(piece, grid, options)});
  }
  return out;
}

}  // namespace anscale
