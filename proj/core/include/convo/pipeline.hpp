#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "convo/baseline.hpp"
#include "convo/conformal.hpp"
#include "convo/reasoning.hpp"
#include "convo/world.hpp"

namespace convo {

/// A generated world with the clean features of every frame.
struct PreparedWorld {
  World world;
  FeatureExtractor extractor{96, 96};
  Eigen::MatrixXd features;  // one row per frame
};

PreparedWorld prepare_world(const ExperimentConfig& config);
/// Wraps an existing world, e.g. one loaded from disk.
PreparedWorld prepare_world(World world, const ExperimentConfig& config);

/// Settings for training both arms on one world.
struct ArmSettings {
  std::size_t classes = 50;
  double alpha = 0.1;
  double train_fraction = 1.0;
  double train_noise_sigma = 0.0;
  TrainingOptions training;
};

ArmSettings arm_settings(const ExperimentConfig& config, CapacityTier tier, double train_fraction);

/// Both arms before calibration.
struct TrainedModels {
  QuantileGrid grid;
  MultiHeadModel classifier;
  RegressionBaseline classical;
  std::vector<std::size_t> train_indices;
};

/// Fits the grid on the training subset and trains the classifier and the
/// regression baseline on the same frames.
TrainedModels train_models(const PreparedWorld& prepared, const ArmSettings& settings);

/// Split-conformal calibration on the world's calibration block.
CalibratedModel calibrate_on_world(const PreparedWorld& prepared, const MultiHeadModel& classifier,
                                   const QuantileGrid& grid, double alpha);

struct TrainedArms {
  CalibratedModel conformal;
  RegressionBaseline classical;
  std::vector<std::size_t> train_indices;
};

/// Evenly spaced positions of the training block: round(fraction · count)
/// indices floor(j · count / m) + begin. Throws kInvalidInput when that keeps
/// no frame.
std::vector<std::size_t> training_indices(const Split& split, double fraction);

/// Labels of the given frames under `grid`.
std::vector<ClassLabel> labels_for(const Trajectory& trajectory, std::span<const std::size_t> indices,
                                   const QuantileGrid& grid);

/// train_models followed by calibrate_on_world.
TrainedArms train_arms(const PreparedWorld& prepared, const ArmSettings& settings);

struct Evaluation {
  double conformal_rmse = 0.0;
  double classical_rmse = 0.0;
  double argmax_rmse = 0.0;
  double conformal_orientation_error = 0.0;
  double classical_orientation_error = 0.0;
  /// Mean set cardinality over test frames and heads.
  double mean_set_size = 0.0;
  /// Fraction of (frame, head) pairs whose true class is in the set.
  double coverage = 0.0;
  /// Fraction of rollout steps flagged with any fallback.
  double fallback_rate = 0.0;
  /// Fraction of test frames with ≥ 2 disjoint intervals in a position dimension.
  double multimodal_fraction = 0.0;
  /// Mean over test frames and dimensions of the covered region width.
  double mean_region_width = 0.0;
  /// Mean over test frames and dimensions of the average width of the
  /// dimension's intervals, i.e. the side length of a typical cuboid.
  double mean_interval_width = 0.0;
  /// True when every region's cuboid count equals its interval-count product.
  bool cuboid_counts_consistent = true;
  RolloutResult rollout;
  Trajectory truth;
};

/// Test frames get i.i.d. N(0, σ²) pixel noise drawn from `noise_seed`; σ = 0
/// leaves them untouched.
Evaluation evaluate(const PreparedWorld& prepared, const TrainedArms& arms, double noise_sigma,
                    std::uint64_t noise_seed, const RolloutOptions& options = {});

}  // namespace convo
