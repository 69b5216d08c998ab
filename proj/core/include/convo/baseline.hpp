#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "convo/features.hpp"
#include "convo/frame.hpp"
#include "convo/regression.hpp"

namespace convo {

struct BaselineResult {
  Trajectory trajectory;
  /// Raw regressor outputs, one (x, y, z, qw, qx, qy, qz) row per frame.
  std::vector<std::array<double, 7>> outputs;
};

/// Per-frame direct regression; frame indices run from `first_frame`.
BaselineResult baseline_rollout(const RegressionBaseline& model, const FeatureExtractor& extractor,
                                std::span<const Frame> frames, std::int64_t first_frame = 0);

/// Root mean squared position error. Throws kInvalidInput when the two
/// trajectories differ in length or frame indices, or are empty.
double rmse(const Trajectory& predicted, const Trajectory& truth);

/// Mean quaternion chordal distance, same preconditions as rmse.
double mean_orientation_error(const Trajectory& predicted, const Trajectory& truth);

}  // namespace convo
