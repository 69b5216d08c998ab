#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "convo/conformal.hpp"
#include "convo/error.hpp"

namespace convo {
namespace {

// The ⌈(n+1)(1−α)⌉-th smallest score by sorting, 1 past the sample.
double oracle_quantile(std::vector<double> s, double alpha) {
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  const auto rank = static_cast<std::size_t>(std::ceil((n + 1.0) * (1.0 - alpha) - 1e-12));
  return rank > s.size() ? 1.0 : s[rank - 1];
}

TEST(ConformalQuantile, MatchesSortOracle) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u;
  int beyond = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    const double alpha = 0.01 + 0.5 * u(rng);
    std::vector<double> s(n);
    for (double& x : s) x = u(rng);
    if (conformal_rank(n, alpha) > n) ++beyond;
    EXPECT_DOUBLE_EQ(conformal_quantile(s, alpha), oracle_quantile(s, alpha)) << n << " " << alpha;
  }
  EXPECT_GT(beyond, 0);
}

TEST(ConformalQuantile, KnownRanks) {
  EXPECT_EQ(conformal_rank(99, 0.1), 90u);
  EXPECT_EQ(conformal_rank(9, 0.1), 9u);
  EXPECT_EQ(conformal_rank(5, 0.1), 6u);
  std::vector<double> s{0.5, 0.1, 0.9, 0.3, 0.7};
  EXPECT_DOUBLE_EQ(conformal_quantile(s, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(conformal_quantile(s, 0.5), 0.5);
}

TEST(ConformalQuantile, RejectsBadInput) {
  const std::vector<double> empty;
  EXPECT_THROW(conformal_quantile(empty, 0.1), Error);
  const std::vector<double> s{0.2};
  EXPECT_THROW(conformal_quantile(s, 0.0), Error);
  EXPECT_THROW(conformal_quantile(s, 1.0), Error);
}

TEST(PredictSet, StrictThresholdAndFallback) {
  HeadScores scores{Eigen::Vector3d(0.6, 0.3, 0.1), Eigen::Vector3d(0.34, 0.33, 0.33), Eigen::Vector2d(0.5, 0.5)};
  const std::vector<double> qhat{0.7, 0.5, 0.4};
  const PredictionSet set = predict_set_from_scores(scores, qhat);
  // Head 0: threshold 0.3; 0.3 itself is excluded.
  EXPECT_EQ(set.classes[0], (std::vector<std::size_t>{0}));
  EXPECT_FALSE(set.fallback[0]);
  // Head 1: threshold 0.5, nothing clears it.
  EXPECT_EQ(set.classes[1], (std::vector<std::size_t>{0}));
  EXPECT_TRUE(set.fallback[1]);
  // Head 2: threshold 0.6, argmax tie goes to the first class.
  EXPECT_EQ(set.classes[2], (std::vector<std::size_t>{0}));
  EXPECT_TRUE(set.any_fallback());
}

TEST(PredictSet, ExcludedHeadEmitsArgmaxOnly) {
  HeadScores scores{Eigen::Vector3d(0.2, 0.5, 0.3)};
  const PredictionSet set = predict_set_from_scores(scores, std::vector<double>{1.0}, {true});
  EXPECT_EQ(set.classes[0], (std::vector<std::size_t>{1}));
  EXPECT_FALSE(set.fallback[0]);
}

TEST(PredictSet, GrowsWithQhat) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd p(8);
    for (Eigen::Index k = 0; k < 8; ++k) p(k) = u(rng);
    p /= p.sum();
    const double a = u(rng), b = u(rng);
    const auto small = predict_set_from_scores({p}, std::vector<double>{std::min(a, b)});
    const auto large = predict_set_from_scores({p}, std::vector<double>{std::max(a, b)});
    if (!small.fallback[0]) {
      EXPECT_TRUE(std::includes(large.classes[0].begin(), large.classes[0].end(), small.classes[0].begin(),
                                small.classes[0].end()));
    }
  }
}

// Exchangeable toy problem: calibration and test draws come from the same
// distribution, so threshold coverage equals rank / (n + 1) in expectation.
TEST(Coverage, ExchangeableScoresHitNominalRate) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n;
  const std::size_t calib = 19, k = 6, trials = 4000;
  const double alpha = 0.1;
  auto draw = [&](std::size_t& label) {
    Eigen::VectorXd logits(k);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i) logits(i) = 1.5 * n(rng);
    Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
    p /= p.sum();
    std::discrete_distribution<std::size_t> pick(p.data(), p.data() + k);
    label = pick(rng);
    return p;
  };
  std::size_t covered = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<double> scores(calib);
    for (double& s : scores) {
      std::size_t y = 0;
      const Eigen::VectorXd p = draw(y);
      s = 1.0 - p(static_cast<Eigen::Index>(y));
    }
    const double q = conformal_quantile(scores, alpha);
    std::size_t y = 0;
    const Eigen::VectorXd p = draw(y);
    const PredictionSet set = predict_set_from_scores({p}, std::vector<double>{q});
    covered += std::binary_search(set.classes[0].begin(), set.classes[0].end(), y) ? 1 : 0;
  }
  const double rate = static_cast<double>(covered) / trials;
  const double se = std::sqrt(0.9 * 0.1 / trials);
  EXPECT_GT(rate, 0.9 - 4 * se);
  // The argmax fallback can only add coverage; it is rare here.
  EXPECT_LT(rate, 0.9 + 0.02 + 4 * se);
}

QuantileGrid five_bins() {
  return fit_grid_values({{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}, 5, {"a", "b"});
}

TEST(Region, AdjacentClassesMergeIntoOneInterval) {
  const QuantileGrid g = five_bins();
  PredictionSet set;
  set.classes = {{0, 1, 3}, {2}};
  set.scores = {Eigen::VectorXd::Constant(5, 0.2), Eigen::VectorXd::Constant(5, 0.2)};
  set.fallback = {false, false};
  const UncertaintyRegion r = to_region(set, g);
  ASSERT_EQ(r.interval_count(0), 2u);
  EXPECT_EQ(r.intervals(0)[0].first_class, 0u);
  EXPECT_EQ(r.intervals(0)[0].last_class, 1u);
  EXPECT_DOUBLE_EQ(r.intervals(0)[0].bounds.lo, g.dim(0).boundaries[0]);
  EXPECT_DOUBLE_EQ(r.intervals(0)[0].bounds.hi, g.dim(0).boundaries[2]);
  EXPECT_NEAR(r.intervals(0)[0].mass, 0.4, 1e-15);
  EXPECT_EQ(r.cuboid_count(), 2u);
  const double w = g.dim(0).interval(0).width() + g.dim(0).interval(1).width() + g.dim(0).interval(3).width();
  EXPECT_NEAR(r.measure(0), w, 1e-12);
}

TEST(Region, CuboidCountIsIntervalProductAndIndexable) {
  std::mt19937_64 rng(34);
  const QuantileGrid g = five_bins();
  for (int trial = 0; trial < 200; ++trial) {
    PredictionSet set;
    set.classes.resize(2);
    for (auto& c : set.classes) {
      for (std::size_t k = 0; k < 5; ++k)
        if (rng() % 2) c.push_back(k);
      if (c.empty()) c.push_back(rng() % 5);
    }
    const UncertaintyRegion r = to_region(set, g);
    EXPECT_EQ(r.cuboid_count(), r.interval_count(0) * r.interval_count(1));
    // Mixed radix with the last dimension fastest.
    for (std::uint64_t i = 0; i < r.cuboid_count(); ++i) {
      const auto idx = r.cuboid(i);
      EXPECT_EQ(idx[0] * r.interval_count(1) + idx[1], i);
    }
    EXPECT_THROW(r.cuboid(r.cuboid_count()), Error);
    for (std::size_t d = 0; d < 2; ++d) {
      const auto& ivs = r.intervals(d);
      for (std::size_t i = 1; i < ivs.size(); ++i) EXPECT_LT(ivs[i - 1].bounds.hi, ivs[i].bounds.lo);
    }
  }
}

MultiHeadModel toy_model(const QuantileGrid& grid, Eigen::MatrixXd& x, std::vector<ClassLabel>& labels) {
  std::mt19937_64 rng(35);
  std::normal_distribution<double> n(0.0, 0.4);
  x.resize(200, 2);
  labels.clear();
  for (Eigen::Index i = 0; i < 200; ++i) {
    const double v = static_cast<double>(i % 10);
    x(i, 0) = v + n(rng);
    x(i, 1) = n(rng);
    const double vals[] = {v, v};
    labels.push_back(grid.encode_values(vals));
  }
  TrainingOptions o;
  o.hidden_width = 6;
  o.max_epochs = 200;
  return train_multihead(x, labels, grid.class_counts(), o);
}

TEST(Calibrate, StoresScoresAndQhat) {
  const QuantileGrid g = five_bins();
  Eigen::MatrixXd x;
  std::vector<ClassLabel> labels;
  const MultiHeadModel m = toy_model(g, x, labels);
  const CalibratedModel cal = calibrate(m, g, x.topRows(99), std::span(labels).first(99), 0.1);
  ASSERT_EQ(cal.qhat.size(), 2u);
  EXPECT_EQ(cal.record.n, 99u);
  for (std::size_t h = 0; h < 2; ++h) {
    EXPECT_FALSE(cal.excluded[h]);
    EXPECT_DOUBLE_EQ(cal.qhat[h], conformal_quantile(cal.record.scores[h], 0.1));
  }
  const auto cov = coverage_audit(cal, x.bottomRows(101), std::span(labels).last(101));
  for (double c : cov) EXPECT_GE(c, 0.8);

  const CalibratedModel back = CalibratedModel::from_json(cal.to_json());
  EXPECT_EQ(back.qhat, cal.qhat);
  const PredictionSet a = predict_set(cal, x.row(3).transpose());
  const PredictionSet b = predict_set(back, x.row(3).transpose());
  EXPECT_EQ(a.classes, b.classes);
}

TEST(Calibrate, RejectsMismatches) {
  const QuantileGrid g = five_bins();
  Eigen::MatrixXd x;
  std::vector<ClassLabel> labels;
  const MultiHeadModel m = toy_model(g, x, labels);
  EXPECT_THROW(calibrate(m, g, x.topRows(0), std::span(labels).first(0), 0.1), Error);
  EXPECT_THROW(calibrate(m, g, x.topRows(5), std::span(labels).first(4), 0.1), Error);
  EXPECT_THROW(calibrate(m, g, x.topRows(5), std::span(labels).first(5), 1.5), Error);
}

TEST(MeanSetSize, AveragesOverHeadsAndSamples) {
  PredictionSet a, b;
  a.classes = {{0}, {1, 2, 3}};
  b.classes = {{0, 1}, {2, 3}};
  const std::vector<PredictionSet> sets{a, b};
  EXPECT_DOUBLE_EQ(mean_set_size(sets), 2.0);
}

}  // namespace
}  // namespace convo
