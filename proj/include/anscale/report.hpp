#pragma once

#include <iosfwd>

#include <nlohmann/json.hpp>

#include "anscale/core.hpp"
#include "anscale/estimators.hpp"
#include "anscale/fitting.hpp"
#include "anscale/market.hpp"

namespace anscale {

nlohmann::json to_json(const TimeGrid& grid);
nlohmann::json to_json(const ExponentReport& report);
nlohmann::json to_json(const FitResult& fit, const TimeGrid& grid);
nlohmann::json to_json(const ExponentAnalysis& analysis);
nlohmann::json to_json(const IntervalSpec& spec);

/// Columns t,value,variance; variance is empty when the series has none.
void write_series_csv(std::ostream& out, const StatisticSeries& series);
/// Columns t,data,model for plotting a fit against its data.
void write_fit_csv(std::ostream& out, const StatisticSeries& series, const FitResult& fit);

}  // namespace anscale
