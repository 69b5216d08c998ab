#include "convo/features.hpp"

#include <algorithm>
#include <cmath>

#include "convo/error.hpp"

namespace convo {

FeatureExtractor::FeatureExtractor(int height, int width, int grid_rows, int grid_cols)
    : height_(height), width_(width), grid_rows_(grid_rows), grid_cols_(grid_cols) {
  require(grid_rows >= 1 && grid_cols >= 1, "feature grid must be at least 1x1");
  require(grid_rows <= height && grid_cols <= width, "feature grid finer than the frame");
}

FeatureVector FeatureExtractor::extract(const Frame& frame) const {
  if (frame.height() != height_ || frame.width() != width_) {
    fail(ErrorCode::kInvalidInput, "frame is " + std::to_string(frame.height()) + "x" +
                                       std::to_string(frame.width()) + ", extractor expects " +
                                       std::to_string(height_) + "x" + std::to_string(width_));
  }
  const int blocks = grid_rows_ * grid_cols_;
  FeatureVector f = FeatureVector::Zero(3 * blocks);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(blocks);
  for (int r = 0; r < height_; ++r) {
    const int br = r * grid_rows_ / height_;
    for (int c = 0; c < width_; ++c) {
      const int b = br * grid_cols_ + c * grid_cols_ / width_;
      const double gx = 0.5 * (frame.at(r, std::min(c + 1, width_ - 1)) - frame.at(r, std::max(c - 1, 0)));
      const double gy = 0.5 * (frame.at(std::min(r + 1, height_ - 1), c) - frame.at(std::max(r - 1, 0), c));
      f(b) += frame.at(r, c);
      f(blocks + b) += std::abs(gx);
      f(2 * blocks + b) += std::abs(gy);
      counts(b) += 1.0;
    }
  }
  for (int b = 0; b < blocks; ++b) {
    f(b) /= counts(b);
    f(blocks + b) /= counts(b);
    f(2 * blocks + b) /= counts(b);
  }
  return f;
}

Eigen::MatrixXd FeatureExtractor::extract_all(const std::vector<Frame>& frames) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = extract(frames[i]).transpose();
  }
  return out;
}

}  // namespace convo
