#pragma once

#include <Eigen/Core>

#include <vector>

#include "convo/frame.hpp"

namespace convo {

struct LucasKanadeParams {
  int window = 15;  // odd side length
  int levels = 3;
  int max_iterations = 30;
  double epsilon = 0.01;  // px, per-iteration update norm to stop at
  /// Minimum eigenvalue of the window's gradient matrix divided by the window
  /// area; below this the point is untrackable.
  double min_eigen_threshold = 1e-4;
  /// Mean absolute intensity residual over the window after convergence.
  double max_residual = 0.08;
};

enum class TrackStatus { kTracked, kSingular, kLost, kHighResidual };

struct TrackResult {
  Eigen::Vector2d point;          // position in frame B, (u, v)
  Eigen::Vector2d displacement;   // point − source
  TrackStatus status = TrackStatus::kLost;
  double residual = 0.0;

  bool ok() const { return status == TrackStatus::kTracked; }
};

/// Pyramidal Lucas–Kanade: per level, solves the windowed normal equations of
/// Iₓu + I_y v + I_t = 0 iteratively, propagating the estimate down the pyramid.
/// Results are per input point, in input order.
std::vector<TrackResult> lucas_kanade(const Frame& a, const Frame& b,
                                      const std::vector<Eigen::Vector2d>& points,
                                      const LucasKanadeParams& params = {});

}  // namespace convo
