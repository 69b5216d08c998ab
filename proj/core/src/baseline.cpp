#include "convo/baseline.hpp"

#include <cmath>

#include "convo/error.hpp"

namespace convo {

namespace {

void require_aligned(const Trajectory& a, const Trajectory& b) {
  require(!a.empty() && a.size() == b.size(), "trajectories must be non-empty and of equal length");
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i].frame == b[i].frame, "trajectories must share frame indices");
  }
}

}  // namespace

BaselineResult baseline_rollout(const RegressionBaseline& model, const FeatureExtractor& extractor,
                                std::span<const Frame> frames, std::int64_t first_frame) {
  BaselineResult out;
  out.outputs.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto raw = model.predict_raw(extractor.extract(frames[i]));
    out.outputs.push_back(raw);
    out.trajectory.push_back(first_frame + static_cast<std::int64_t>(i), pose_from_regression(raw));
  }
  return out;
}

double rmse(const Trajectory& predicted, const Trajectory& truth) {
  require_aligned(predicted, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sum += (predicted[i].pose.position() - truth[i].pose.position()).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

double mean_orientation_error(const Trajectory& predicted, const Trajectory& truth) {
  require_aligned(predicted, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sum += quat_distance(predicted[i].pose.orientation(), truth[i].pose.orientation());
  }
  return sum / static_cast<double>(truth.size());
}

}  // namespace convo
