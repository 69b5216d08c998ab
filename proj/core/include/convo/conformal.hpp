#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <span>
#include <vector>

#include "convo/discretize.hpp"
#include "convo/multihead.hpp"

namespace convo {

/// ⌈(n+1)(1−α)⌉, the order-statistic rank of the split-conformal threshold.
std::size_t conformal_rank(std::size_t n, double alpha);

/// The conformal_rank(n, α)-th smallest score, or 1 when that rank exceeds n.
/// Throws kInvalidInput on an empty sample or α outside (0, 1).
double conformal_quantile(std::span<const double> scores, double alpha);

struct CalibrationRecord {
  /// scores[h][i] = 1 − softmax of the true class of sample i under head h.
  std::vector<std::vector<double>> scores;
  std::size_t n = 0;
  double alpha = 0.1;
};

class CalibratedModel {
 public:
  MultiHeadModel model;
  QuantileGrid grid;
  std::vector<double> qhat;
  /// Constant heads skip calibration and always emit their single class.
  std::vector<bool> excluded;
  CalibrationRecord record;

  double alpha() const { return record.alpha; }

  nlohmann::json to_json() const;
  static CalibratedModel from_json(const nlohmann::json& j);
};

/// Split-conformal calibration of every non-constant head. Throws
/// kInvalidInput on an empty calibration set, α outside (0, 1), or a model
/// whose heads do not match the grid.
CalibratedModel calibrate(const MultiHeadModel& model, const QuantileGrid& grid,
                          const Eigen::MatrixXd& calib_features, std::span<const ClassLabel> calib_labels,
                          double alpha);

struct PredictionSet {
  /// Sorted class indices per head.
  std::vector<std::vector<std::size_t>> classes;
  /// Scores the set was thresholded from (may be empty for hand-built sets).
  HeadScores scores;
  /// True where no class cleared the threshold and the argmax was used.
  std::vector<bool> fallback;

  bool any_fallback() const;
  bool contains(const ClassLabel& label) const;
};

/// {k : score_k > 1 − q̂} per head, with argmax fallback when that is empty.
/// Heads flagged in `excluded` emit their argmax class only.
PredictionSet predict_set_from_scores(const HeadScores& scores, std::span<const double> qhat,
                                      const std::vector<bool>& excluded = {});

PredictionSet predict_set(const CalibratedModel& cal, const FeatureVector& feature);
std::vector<PredictionSet> predict_sets(const CalibratedModel& cal, const Eigen::MatrixXd& features);

/// Maximal run of adjacent selected classes, decoded to one interval.
struct RegionInterval {
  Interval bounds;
  /// Sum of the softmax scores of the merged classes (0 without scores).
  double mass = 0.0;
  std::size_t first_class = 0;
  std::size_t last_class = 0;
};

/// Per-dimension sorted, disjoint interval unions; the region is their
/// Cartesian product of cuboids.
class UncertaintyRegion {
 public:
  UncertaintyRegion() = default;
  explicit UncertaintyRegion(std::vector<std::vector<RegionInterval>> dims);

  std::size_t dims() const { return dims_.size(); }
  const std::vector<RegionInterval>& intervals(std::size_t d) const { return dims_[d]; }
  std::size_t interval_count(std::size_t d) const { return dims_[d].size(); }

  /// Product of the per-dimension interval counts.
  std::uint64_t cuboid_count() const;
  /// Interval index per dimension of cuboid `index` (mixed radix, last
  /// dimension fastest). Throws kInvalidInput when out of range.
  std::vector<std::size_t> cuboid(std::uint64_t index) const;
  /// Total width covered in dimension d.
  double measure(std::size_t d) const;

  nlohmann::json to_json() const;

 private:
  std::vector<std::vector<RegionInterval>> dims_;
};

UncertaintyRegion to_region(const PredictionSet& set, const QuantileGrid& grid);

/// Region plus the calibration context it came from.
nlohmann::json region_report(const UncertaintyRegion& region, const PredictionSet& set,
                             const CalibratedModel& cal);

/// Fraction of samples whose true class lies in the prediction set, per head.
/// Throws kInvalidInput on an empty test set.
std::vector<double> coverage_audit(const CalibratedModel& cal, const Eigen::MatrixXd& test_features,
                                   std::span<const ClassLabel> test_labels);

/// Mean over heads and samples of the set cardinality.
double mean_set_size(std::span<const PredictionSet> sets);

}  // namespace convo
