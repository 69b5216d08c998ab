#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "convo/discretize.hpp"
#include "convo/error.hpp"

namespace convo {
namespace {

// Hyndman-Fan type 7 computed from scratch: 1-based position 1 + (n-1)p.
double type7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = 1.0 + (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size());
  return v[lo - 1] + (h - static_cast<double>(lo)) * (v[hi - 1] - v[lo - 1]);
}

TEST(EmpiricalQuantile, MatchesTypeSevenOracle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + rng() % 40);
    for (double& x : v) x = n(rng);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (double p : {0.0, 1.0, u(rng), u(rng)}) EXPECT_NEAR(empirical_quantile(sorted, p), type7(v, p), 1e-12);
  }
}

TEST(EmpiricalQuantile, KnownValues) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(empirical_quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile(v, 1.0 / 3.0), 2.0);
}

TEST(FitDimension, EqualMassOnDistinctValues) {
  std::vector<double> v(1000);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (double& x : v) x = u(rng);
  const DimensionBins b = fit_dimension(v, 10, "x");
  ASSERT_EQ(b.class_count(), 10u);
  std::vector<int> counts(10, 0);
  for (double x : v) ++counts[b.encode(x)];
  for (int c : counts) EXPECT_NEAR(c, 100, 1);
  EXPECT_TRUE(std::is_sorted(b.boundaries.begin(), b.boundaries.end()));
}

TEST(FitDimension, TiedBoundariesMerge) {
  // Half the mass sits on one value, so several nominal quantiles coincide.
  std::vector<double> v(50, 0.0);
  for (int i = 0; i < 50; ++i) v.push_back(1.0 + i);
  const DimensionBins b = fit_dimension(v, 10);
  EXPECT_LT(b.class_count(), 10u);
  for (std::size_t i = 1; i < b.boundaries.size(); ++i) EXPECT_LT(b.boundaries[i - 1], b.boundaries[i]);
  ASSERT_EQ(b.nominal_to_class.size(), 10u);
  EXPECT_TRUE(std::is_sorted(b.nominal_to_class.begin(), b.nominal_to_class.end()));
  EXPECT_EQ(b.nominal_to_class.back(), b.class_count() - 1);
}

TEST(FitDimension, ConstantDimensionIsOneNarrowClass) {
  const std::vector<double> v(20, 4.0);
  const DimensionBins b = fit_dimension(v, 10);
  EXPECT_TRUE(b.degenerate);
  ASSERT_EQ(b.class_count(), 1u);
  EXPECT_DOUBLE_EQ(b.interval(0).lo, 4.0 - kDegenerateHalfWidth);
  EXPECT_DOUBLE_EQ(b.interval(0).hi, 4.0 + kDegenerateHalfWidth);
  EXPECT_EQ(b.encode(4.0), 0u);
}

TEST(FitDimension, EncodeClampsOutOfRange) {
  const std::vector<double> v{0, 1, 2, 3, 4, 5, 6, 7};
  const DimensionBins b = fit_dimension(v, 4);
  EXPECT_EQ(b.encode(-100.0), 0u);
  EXPECT_EQ(b.encode(100.0), b.class_count() - 1);
}

TEST(QuantileGrid, EncodedValueLiesInDecodedInterval) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::vector<std::vector<double>> cols(3, std::vector<double>(300));
  for (auto& c : cols)
    for (double& x : c) x = n(rng);
  const QuantileGrid g = fit_grid_values(cols, 20, {"a", "b", "c"});
  for (std::size_t i = 0; i < 300; ++i) {
    const std::vector<double> v{cols[0][i], cols[1][i], cols[2][i]};
    const auto intervals = g.decode(g.encode_values(v));
    for (std::size_t d = 0; d < 3; ++d) {
      const Interval& iv = intervals[d];
      EXPECT_TRUE(iv.contains(v[d]) || v[d] == g.dim(d).boundaries.back()) << d << " " << v[d];
    }
  }
}

TEST(QuantileGrid, DecodeRejectsBadLabels) {
  const QuantileGrid g = fit_grid_values({{0, 1, 2, 3}}, 2);
  EXPECT_THROW(g.decode(ClassLabel{{5}}), Error);
  EXPECT_THROW(g.decode(ClassLabel{{0, 0}}), Error);
}

TEST(QuantileGrid, JsonRoundTrip) {
  const QuantileGrid g = fit_grid_values({{0, 1, 2, 3, 4, 5}, {2, 2, 2, 2, 2, 2}}, 3, {"u", "v"});
  const QuantileGrid back = QuantileGrid::from_json(g.to_json());
  EXPECT_EQ(back.to_json(), g.to_json());
  EXPECT_EQ(back.k(), 3u);
  EXPECT_EQ(back.dim(1).name, "v");
}

TEST(FitGrid, NeedsEnoughPoses) {
  Trajectory t;
  for (int i = 0; i < 5; ++i) t.push_back(i, Pose(Vec3(i, 0, 0), Quaternion{}));
  EXPECT_THROW(fit_grid(t, 10), Error);
  EXPECT_THROW(fit_grid(t, 1), Error);
  const QuantileGrid g = fit_grid(t, 5);
  EXPECT_EQ(g.dims(), kPoseDims);
  EXPECT_EQ(g.dim(0).class_count(), 5u);
  EXPECT_EQ(g.dim(1).class_count(), 1u);
}

}  // namespace
}  // namespace convo
