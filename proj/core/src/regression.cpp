#include "convo/regression.hpp"

#include <nlohmann/json.hpp>

#include "convo/error.hpp"

namespace convo {

using Eigen::Index;
using Eigen::MatrixXd;

RegressionBaseline train_baseline(const MatrixXd& features, std::span<const Pose> poses,
                                  const TrainingOptions& options) {
  require(features.rows() > 0, "baseline needs at least one training sample");
  require(static_cast<std::size_t>(features.rows()) == poses.size(), "features and poses must have equal length");
  require(features.allFinite(), "features must be finite");

  MatrixXd y(features.rows(), 7);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto v = poses[i].to_vector();
    for (Index d = 0; d < 7; ++d) y(static_cast<Index>(i), d) = v[static_cast<std::size_t>(d)];
  }

  RegressionBaseline b;
  b.inputs_ = Standardizer::fit(features);
  b.targets_ = Standardizer::fit(y);
  b.net_ = Mlp(features.cols(), static_cast<Index>(options.hidden_width), 7);
  const MatrixXd x = b.inputs_.apply(features);
  const MatrixXd ys = b.targets_.apply(y);
  const Mlp& net = b.net_;
  const Objective objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
    return squared_error_objective(net, x, ys, options.weight_decay, p, g);
  };
  b.params_ = gradient_descent(objective, net.initial_parameters(options.seed), options, &b.trace_);
  return b;
}

MatrixXd RegressionBaseline::predict_raw_batch(const MatrixXd& features) const {
  const MatrixXd out = net_.forward(params_, inputs_.apply(features));
  return (out.array().rowwise() * targets_.scale.array()).rowwise() + targets_.mean.array();
}

std::array<double, 7> RegressionBaseline::predict_raw(const FeatureVector& feature) const {
  const MatrixXd out = predict_raw_batch(feature.transpose());
  std::array<double, 7> v{};
  for (Index d = 0; d < 7; ++d) v[static_cast<std::size_t>(d)] = out(0, d);
  return v;
}

Pose pose_from_regression(const std::array<double, 7>& raw) {
  const Quaternion q{raw[3], raw[4], raw[5], raw[6]};
  return Pose(Vec3(raw[0], raw[1], raw[2]), q.norm() > 1e-12 ? q : Quaternion{});
}

Pose RegressionBaseline::predict(const FeatureVector& feature) const {
  return pose_from_regression(predict_raw(feature));
}

nlohmann::json RegressionBaseline::to_json() const {
  return {{"format", "convo.regression"},
          {"version", 1},
          {"inputs", net_.inputs()},
          {"hidden", net_.hidden()},
          {"input_standardizer", inputs_.to_json()},
          {"target_standardizer", targets_.to_json()},
          {"parameters", std::vector<double>(params_.data(), params_.data() + params_.size())}};
}

RegressionBaseline RegressionBaseline::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "convo.regression" && j.at("version") == 1, "unsupported regression document");
    RegressionBaseline b;
    b.net_ = Mlp(j.at("inputs").get<Index>(), j.at("hidden").get<Index>(), 7);
    b.inputs_ = Standardizer::from_json(j.at("input_standardizer"));
    b.targets_ = Standardizer::from_json(j.at("target_standardizer"));
    const auto p = j.at("parameters").get<std::vector<double>>();
    require(static_cast<Index>(p.size()) == b.net_.parameter_count(), "parameter count mismatch");
    b.params_ = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size()));
    return b;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed regression model: ") + e.what());
  }
}

}  // namespace convo
