#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

namespace convo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Quaternion in (w, x, y, z) order. Not necessarily unit; see `normalized`
/// and `canonical`.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  Quaternion operator-() const { return {-w, -x, -y, -z}; }
  bool operator==(const Quaternion&) const = default;
};

/// Sign convention: w > 0, or w == 0 and the first nonzero of (x, y, z) > 0.
Quaternion canonical(const Quaternion& q);

/// Unit-norm, canonical-sign copy. Throws kInvalidInput when ‖q‖ < 1e-12.
Quaternion normalized(const Quaternion& q);

/// Rotation of `angle` radians about `axis` (need not be unit).
Quaternion quat_from_axis_angle(const Vec3& axis, double angle);

/// Shortest-arc spherical interpolation between unit quaternions, t in [0, 1].
Quaternion slerp(const Quaternion& a, const Quaternion& b, double t);

/// Validated 3x3 rotation: orthonormal and det = +1 within 1e-9.
class RotationMatrix {
 public:
  static constexpr double kTolerance = 1e-9;

  RotationMatrix() : m_(Mat3::Identity()) {}
  /// Throws kInvalidInput if `m` is not a proper rotation within kTolerance.
  explicit RotationMatrix(const Mat3& m);

  /// Nearest rotation in Frobenius norm (polar decomposition).
  static RotationMatrix nearest(const Mat3& m);

  const Mat3& matrix() const { return m_; }
  RotationMatrix transpose() const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Max-abs deviation of RᵀR from identity.
  double orthonormality_error() const;

 private:
  struct Unchecked {};
  RotationMatrix(const Mat3& m, Unchecked) : m_(m) {}

  Mat3 m_;
};

/// Angle of the rotation R_a·R_bᵀ in radians.
double rotation_angle_between(const RotationMatrix& a, const RotationMatrix& b);

/// Throws kInvalidInput unless ‖q‖ = 1 within 1e-6.
RotationMatrix quat_to_rotmat(const Quaternion& q);
Quaternion rotmat_to_quat(const RotationMatrix& r);

/// R_relative · R_previous, projected back onto SO(3) if drift exceeds 1e-12.
RotationMatrix compose_rotation(const RotationMatrix& relative, const RotationMatrix& previous);

/// Euclidean distance between canonicalized unit quaternions, in [0, 2].
double quat_distance(const Quaternion& a, const Quaternion& b);

/// Camera pose. `position` is the camera center in world coordinates (meters);
/// `orientation` rotates world coordinates into the camera frame, so that
/// X_cam = R(orientation) · (X_world − position). Under this convention the
/// frame-to-frame update is R_next = R_relative · R_previous.
class Pose {
 public:
  Pose() = default;
  /// Normalizes and canonicalizes `orientation`.
  Pose(const Vec3& position, const Quaternion& orientation);

  const Vec3& position() const { return position_; }
  const Quaternion& orientation() const { return orientation_; }
  RotationMatrix rotation() const { return quat_to_rotmat(orientation_); }

  /// (x, y, z, qw, qx, qy, qz).
  std::array<double, 7> to_vector() const;
  /// Inverse of to_vector; the quaternion part is renormalized.
  static Pose from_vector(const std::array<double, 7>& v);

 private:
  Vec3 position_ = Vec3::Zero();
  Quaternion orientation_{};
};

struct TrajectoryPoint {
  std::int64_t frame = 0;
  Pose pose;
};

/// Poses keyed by strictly increasing frame index.
class Trajectory {
 public:
  Trajectory() = default;

  /// Throws kInvalidInput unless `frame` exceeds the last stored index.
  void push_back(std::int64_t frame, const Pose& pose);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const TrajectoryPoint& operator[](std::size_t i) const { return points_[i]; }
  const TrajectoryPoint& front() const { return points_.front(); }
  const TrajectoryPoint& back() const { return points_.back(); }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  /// Points whose position in the sequence lies in [first, first + count).
  Trajectory slice(std::size_t first, std::size_t count) const;

 private:
  std::vector<TrajectoryPoint> points_;
};

}  // namespace convo
