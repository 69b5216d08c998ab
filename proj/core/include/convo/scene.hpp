#pragma once

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <vector>

#include "convo/frame.hpp"
#include "convo/geometry.hpp"

namespace convo {

/// Pinhole intrinsics. Pixel (row r, col c) has its center at (u, v) = (c, r).
struct Intrinsics {
  double fx = 80.0;
  double fy = 80.0;
  double cx = 47.5;
  double cy = 47.5;

  /// Throws kInvalidInput unless fx, fy > 0 and (cx, cy) lies inside a
  /// height × width image.
  void validate(int height, int width) const;

  Eigen::Vector2d project(const Vec3& camera_point) const;
  /// Homogeneous normalized coordinates (x, y, 1) of pixel (u, v).
  Vec3 normalize(const Eigen::Vector2d& pixel) const;
};

struct Landmark {
  Vec3 position = Vec3::Zero();
  double dark = 0.1;
  double light = 0.9;
};

/// Landmark field rendered as small checker patches on a flat background.
struct SyntheticScene {
  std::vector<Landmark> landmarks;
  Intrinsics intrinsics;
  int height = 96;
  int width = 96;
  double background = 0.5;
  int patch_cells = 2;
  int cell_pixels = 3;
  double near_plane = 0.1;

  nlohmann::json to_json() const;
  static SyntheticScene from_json(const nlohmann::json& j);
};

/// Camera-frame coordinates of a world point.
Vec3 world_to_camera(const Pose& pose, const Vec3& world);

/// Pixel projection if the point is in front of the camera and inside the image.
std::optional<Eigen::Vector2d> project_visible(const SyntheticScene& scene, const Pose& pose,
                                               const Vec3& world);

std::size_t count_visible(const SyntheticScene& scene, const Pose& pose);

/// Pinhole render, far-to-near, each visible landmark stamped as a checker
/// patch with bilinear sub-pixel placement. Throws kDegenerateView when fewer
/// than 8 landmarks are visible.
Frame render(const SyntheticScene& scene, const Pose& pose);

}  // namespace convo
