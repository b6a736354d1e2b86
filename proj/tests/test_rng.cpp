#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "anscale/rng.hpp"

using namespace anscale;

namespace {

// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

}  // namespace

TEST(RngStream, ReproducibleAndKeyedByPair) {
  RngStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  for (int i = 0; i < 100; ++i) {
    const double x = a.gaussian();
    EXPECT_EQ(x, b.gaussian());
    EXPECT_NE(x, c.gaussian());
    EXPECT_NE(x, d.gaussian());
  }
}

TEST(RngStream, IndependentOfInterleaving) {
  RngStream a(1, 0), b(1, 1);
  std::vector<double> seq_a;
  for (int i = 0; i < 50; ++i) {
    seq_a.push_back(a.uniform_open());
    b.uniform_open();
    b.gaussian();
  }
  RngStream alone(1, 0);
  for (double v : seq_a) EXPECT_EQ(v, alone.uniform_open());
}

TEST(RngStream, UniformIsOpenAndIndexInRange) {
  RngStream s(3, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform_open();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(s.index(13), 13u);
  }
}

TEST(RngStream, GaussianMatchesStandardNormal) {
  RngStream s(11, 0);
  std::vector<double> x(200000);
  for (double& v : x) v = s.gaussian();
  const double d = ks_statistic(x, [](double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); });
  EXPECT_LT(d, 1.63 / std::sqrt(double(x.size())));  // 1% level
}

TEST(Stable, HalfIsGaussianWithVarianceTwo) {
  RngStream s(5, 0);
  std::vector<double> x(200000);
  for (double& v : x) v = draw_levy_stable(0.5, s);
  const double d = ks_statistic(x, [](double v) { return 0.5 * std::erfc(-v / 2.0); });
  EXPECT_LT(d, 1.63 / std::sqrt(double(x.size())));
}

TEST(Stable, SamplerMatchesFreeFunction) {
  RngStream a(9, 2), b(9, 2);
  const StableSampler sampler(0.7);
  for (int i = 0; i < 1000; ++i) EXPECT_DOUBLE_EQ(sampler(a), draw_levy_stable(0.7, b));
}

TEST(Stable, SymmetricWithHeavyTail) {
  RngStream s(21, 0);
  const double L = 0.8;
  std::vector<double> x(400000);
  for (double& v : x) v = draw_levy_stable(L, s);
  const auto pos = std::count_if(x.begin(), x.end(), [](double v) { return v > 0; });
  EXPECT_NEAR(double(pos) / x.size(), 0.5, 0.005);
  // Hill estimate from the top 0.5% of |x|.
  for (double& v : x) v = std::abs(v);
  const std::size_t k = x.size() / 200;
  std::nth_element(x.begin(), x.begin() + k, x.end(), std::greater<>());
  double s_log = 0.0;
  for (std::size_t i = 0; i < k; ++i) s_log += std::log(x[i] / x[k]);
  EXPECT_NEAR(k / s_log, 1.0 / L, 0.1);
}

TEST(Stable, RejectsOutOfRangeIndex) {
  RngStream s(1, 1);
  EXPECT_ANY_THROW(draw_levy_stable(0.4, s));
  EXPECT_ANY_THROW(draw_levy_stable(1.0, s));
  EXPECT_ANY_THROW(StableSampler{1.2});
}
