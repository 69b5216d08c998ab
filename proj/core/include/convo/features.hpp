#pragma once

#include <Eigen/Core>

#include <vector>

#include "convo/frame.hpp"

namespace convo {

using FeatureVector = Eigen::VectorXd;

/// Block-statistics extractor: the frame is cut into a grid of blocks and
/// each block contributes its mean intensity, mean |∂I/∂x| and mean |∂I/∂y|.
/// Layout: [means (row-major), |gx| means, |gy| means].
class FeatureExtractor {
 public:
  FeatureExtractor(int height, int width, int grid_rows = 8, int grid_cols = 8);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return static_cast<std::size_t>(3 * grid_rows_ * grid_cols_); }

  /// Throws kInvalidInput if the frame size differs from the configuration.
  FeatureVector extract(const Frame& frame) const;
  Eigen::MatrixXd extract_all(const std::vector<Frame>& frames) const;  // one row per frame

 private:
  int height_;
  int width_;
  int grid_rows_;
  int grid_cols_;
};

inline FeatureVector extract_features(const Frame& frame, const FeatureExtractor& extractor) {
  return extractor.extract(frame);
}

}  // namespace convo
