#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "anscale/core.hpp"
#include "anscale/ensemble_io.hpp"
#include "anscale/error.hpp"
#include "anscale/parallel.hpp"

using namespace anscale;

namespace {

PathEnsemble small_ensemble() {
  std::vector<double> inc;
  for (int i = 0; i < 3 * 7; ++i) inc.push_back(std::sin(0.37 * i) + 0.1 * i);
  return PathEnsemble(3, 7, inc, R"({"family":"BM"})", 99);
}

}  // namespace

TEST(TimeGrid, LogSpacedAndDeduplicated) {
  const TimeGrid g = make_time_grid(50, 1000000, 500);
  ASSERT_FALSE(g.points.empty());
  EXPECT_EQ(g.points.back(), 1000000);
  EXPECT_LE(g.points.size(), 500u);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g.points[i - 1], g.points[i]);
  // First point is round(50 * 20000^(1/500)).
  EXPECT_EQ(g.points.front(), std::llround(50.0 * std::pow(20000.0, 1.0 / 500.0)));
}

TEST(TimeGrid, RoundingCollapsesDuplicates) {
  const TimeGrid g = make_time_grid(1, 10, 100);
  EXPECT_EQ(g.points.size(), 10u);
  EXPECT_EQ(g.points.front(), 1);
}

TEST(TimeGrid, RejectsBadRanges) {
  EXPECT_THROW(make_time_grid(0, 10, 5), Error);
  EXPECT_THROW(make_time_grid(10, 10, 5), Error);
  EXPECT_THROW(make_time_grid(1, 10, 0), Error);
}

TEST(PartialSums, MatchDirectSums) {
  const PathEnsemble e = small_ensemble();
  const auto sums = partial_sums(e, 5);
  ASSERT_EQ(sums.size(), 3u);
  for (std::size_t p = 0; p < 3; ++p) {
    double x = 0, y = 0, z = 0;
    for (int t = 0; t < 5; ++t) {
      x += e.at(p, t);
      y += std::abs(e.at(p, t));
      z += e.at(p, t) * e.at(p, t);
    }
    EXPECT_DOUBLE_EQ(sums[p].x, x);
    EXPECT_DOUBLE_EQ(sums[p].y, y);
    EXPECT_DOUBLE_EQ(sums[p].z, z);
  }
  EXPECT_THROW(partial_sums(e, 0), Error);
  EXPECT_THROW(partial_sums(e, 8), Error);
}

TEST(PartialSums, GridPassAgreesWithPointwise) {
  const PathEnsemble e = small_ensemble();
  TimeGrid g;
  g.points = {1, 3, 7};
  const auto on_grid = partial_sums_on_grid(e.row(1), g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto direct = partial_sums(e, g.points[i])[1];
    EXPECT_DOUBLE_EQ(on_grid[i].x, direct.x);
    EXPECT_DOUBLE_EQ(on_grid[i].z, direct.z);
  }
}

TEST(Quantile, LinearInterpolationBetweenRanks) {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  std::vector<double> w = v;
  EXPECT_DOUBLE_EQ(quantile_inplace(w, 0.75), 3.25);
  EXPECT_THROW(quantile(std::vector<double>{}, 0.5), Error);
}

TEST(PairwiseSum, ExactOnIntegersAndOrderIndependentOfProducer) {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(pairwise_sum(v), 500500.0);
  EXPECT_EQ(pairwise_sum({}), 0.0);
}

TEST(StatisticSeries, ValidateCatchesMismatch) {
  StatisticSeries s;
  s.grid = make_time_grid(1, 10, 10);
  s.values.assign(s.grid.size(), 1.0);
  EXPECT_NO_THROW(s.validate());
  s.values.pop_back();
  EXPECT_THROW(s.validate(), Error);
  s.values.assign(s.grid.size(), -1.0);
  s.kind = StatisticKind::width_iqr;
  EXPECT_THROW(s.validate(), Error);
}

TEST(StatisticKind, NamesRoundTrip) {
  for (auto k : {StatisticKind::rs_mean, StatisticKind::width_iqr, StatisticKind::median_y,
                 StatisticKind::median_z, StatisticKind::mean_abs_increment}) {
    EXPECT_EQ(statistic_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(statistic_kind_from_string("nope"), Error);
}

TEST(ExponentReport, SumCheckUsesQuadrature) {
  ExponentReport r;
  r.J = {0.5, 0.03};
  r.L = {0.6, 0.04};
  r.M = {0.7, 0.0};
  r.H = {0.8, 0.01};
  const auto s = r.sum_check();
  EXPECT_NEAR(s.value, 0.8, 1e-15);
  EXPECT_NEAR(s.stderr_, 0.05, 1e-15);
  EXPECT_TRUE(r.consistent());
  r.H = {1.2, 0.01};
  EXPECT_FALSE(r.consistent());
}

TEST(EnsembleIo, BinaryRoundTripIsExact) {
  const PathEnsemble e = small_ensemble();
  std::stringstream buf;
  write_ensemble_binary(buf, e);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "ANSC");
  std::istringstream in(bytes);
  EXPECT_EQ(read_ensemble_binary(in), e);
}

TEST(EnsembleIo, CsvRoundTripKeepsValues) {
  const PathEnsemble e = small_ensemble();
  std::stringstream buf;
  write_ensemble_csv(buf, e);
  const PathEnsemble back = read_ensemble_csv(buf);
  ASSERT_EQ(back.n_paths(), 3u);
  ASSERT_EQ(back.n_steps(), 7u);
  for (std::size_t i = 0; i < e.increments().size(); ++i) EXPECT_EQ(back.increments()[i], e.increments()[i]);
}

TEST(EnsembleIo, RejectsTruncatedAndRaggedInput) {
  std::stringstream buf;
  write_ensemble_binary(buf, small_ensemble());
  std::string bytes = buf.str();
  bytes.resize(40);
  std::istringstream cut(bytes);
  EXPECT_THROW(read_ensemble_binary(cut), Error);
  std::istringstream ragged("1,2,3\n4,5\n");
  EXPECT_THROW(read_ensemble_csv(ragged), Error);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  std::vector<double> a(1000), b(1000);
  parallel_for(a.size(), 1, [&](std::size_t i, std::size_t) { a[i] = std::sqrt(double(i)); });
  parallel_for(b.size(), 7, [&](std::size_t i, std::size_t) { b[i] = std::sqrt(double(i)); });
  EXPECT_EQ(a, b);
}

TEST(Parallel, PropagatesFirstException) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i, std::size_t) {
                              if (i == 37) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
