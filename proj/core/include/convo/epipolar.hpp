#pragma once

#include <nlohmann/json_fwd.hpp>

#include <vector>

#include "convo/geometry.hpp"
#include "convo/scene.hpp"

namespace convo {

/// Point pairs between frame A (0) and frame B (1). Normalized coordinates are
/// homogeneous (x, y, 1). Pixel coordinates are optional (empty when built
/// directly from normalized points).
struct Correspondences {
  std::vector<Eigen::Vector2d> pixels0;
  std::vector<Eigen::Vector2d> pixels1;
  std::vector<Vec3> normalized0;
  std::vector<Vec3> normalized1;

  std::size_t size() const { return normalized0.size(); }

  static Correspondences from_pixels(std::vector<Eigen::Vector2d> p0, std::vector<Eigen::Vector2d> p1,
                                     const Intrinsics& k);
  static Correspondences from_normalized(std::vector<Vec3> x0, std::vector<Vec3> x1);

  nlohmann::json to_json() const;
  static Correspondences from_json(const nlohmann::json& j);
};

/// Motion of camera B relative to camera A in the convention
/// X_B = R · X_A + s·t with unit t and unknown scale s > 0.
struct RelativeMotion {
  RotationMatrix rotation;
  Vec3 translation = Vec3::UnitX();
};

/// [t]ₓ such that [t]ₓ v = t × v.
Mat3 skew(const Vec3& t);

/// Essential matrix of a relative motion, E = [t]ₓ R.
Mat3 essential_from_motion(const RelativeMotion& motion);

/// max |x1ᵀ E x0| over the correspondences.
double max_epipolar_residual(const Mat3& e, const Correspondences& corr);

/// Hartley-normalized eight-point estimate, projected to singular values
/// (1, 1, 0). Throws kInvalidInput for fewer than 8 pairs and
/// kDegenerateConfiguration when the design matrix has rank below 8.
Mat3 estimate_essential(const Correspondences& corr);

/// SVD factorization into the four (R, ±t) candidates, resolved by counting
/// triangulated points in front of both cameras. Throws kInvalidInput if E is
/// not an essential matrix within tolerance and kAmbiguousDecomposition if the
/// best candidate is not strictly best.
RelativeMotion decompose_essential(const Mat3& e, const Correspondences& corr);

}  // namespace convo
