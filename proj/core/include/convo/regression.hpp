#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <span>

#include "convo/features.hpp"
#include "convo/geometry.hpp"
#include "convo/network.hpp"

namespace convo {

/// Direct pose regressor sharing the classifier's trunk architecture:
/// features → [tanh hidden] → 7 outputs (x, y, z, qw, qx, qy, qz), trained on
/// squared error against standardized targets.
class RegressionBaseline {
 public:
  RegressionBaseline() = default;

  /// Raw 7-vector in target units (quaternion part not yet normalized).
  std::array<double, 7> predict_raw(const FeatureVector& feature) const;
  /// Prediction with the quaternion part renormalized.
  Pose predict(const FeatureVector& feature) const;
  Eigen::MatrixXd predict_raw_batch(const Eigen::MatrixXd& features) const;

  std::size_t hidden_width() const { return static_cast<std::size_t>(net_.hidden()); }
  const Eigen::VectorXd& parameters() const { return params_; }
  const TrainingTrace& trace() const { return trace_; }

  nlohmann::json to_json() const;
  static RegressionBaseline from_json(const nlohmann::json& j);

  friend RegressionBaseline train_baseline(const Eigen::MatrixXd& features, std::span<const Pose> poses,
                                           const TrainingOptions& options);

 private:
  Standardizer inputs_;
  Standardizer targets_;
  Mlp net_;
  Eigen::VectorXd params_;
  TrainingTrace trace_;
};

RegressionBaseline train_baseline(const Eigen::MatrixXd& features, std::span<const Pose> poses,
                                  const TrainingOptions& options);

/// Renormalizes the quaternion part; a vanishing quaternion maps to identity.
Pose pose_from_regression(const std::array<double, 7>& raw);

}  // namespace convo
