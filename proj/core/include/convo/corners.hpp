#pragma once

#include <Eigen/Core>

#include <vector>

#include "convo/frame.hpp"

namespace convo {

struct HarrisParams {
  double k = 0.04;
  double sigma = 1.0;
  int nms_radius = 5;
  /// Responses must exceed max(absolute_floor, relative_floor · max response).
  double absolute_floor = 1e-6;
  double relative_floor = 0.01;
  /// Pixels closer than this to the border are never reported.
  int border = 3;
};

struct Corner {
  Eigen::Vector2d pixel;  // (u, v) = (col, row)
  double response = 0.0;
};

/// Harris response det(M) − k·trace(M)² of the Gaussian-smoothed structure
/// tensor, row-major, same size as the frame.
std::vector<double> harris_response(const Frame& frame, const HarrisParams& params = {});

/// Strongest `max_points` non-maximum-suppressed corners above the floor,
/// ordered by descending response.
std::vector<Corner> harris_corners(const Frame& frame, int max_points,
                                   const HarrisParams& params = {});

}  // namespace convo
