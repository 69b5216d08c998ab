#include "convo/geometry.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "convo/error.hpp"

namespace convo {

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion canonical(const Quaternion& q) {
  if (q.w > 0.0) return q;
  if (q.w < 0.0) return -q;
  for (double c : {q.x, q.y, q.z}) {
    if (c > 0.0) return q;
    if (c < 0.0) return -q;
  }
  return q;
}

Quaternion normalized(const Quaternion& q) {
  const double n = q.norm();
  if (!(n >= 1e-12) || !std::isfinite(n)) {
    fail(ErrorCode::kInvalidInput, "cannot normalize a zero or non-finite quaternion");
  }
  return canonical(Quaternion{q.w / n, q.x / n, q.y / n, q.z / n});
}

Quaternion quat_from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  require(n > 0.0, "rotation axis must be nonzero");
  const Vec3 u = axis / n;
  const double s = std::sin(angle / 2.0);
  return normalized(Quaternion{std::cos(angle / 2.0), u.x() * s, u.y() * s, u.z() * s});
}

Quaternion slerp(const Quaternion& a, const Quaternion& b, double t) {
  const Quaternion na = normalized(a);
  Quaternion nb = normalized(b);
  double dot = na.w * nb.w + na.x * nb.x + na.y * nb.y + na.z * nb.z;
  if (dot < 0.0) {
    nb = -nb;
    dot = -dot;
  }
  double wa = 1.0 - t, wb = t;
  if (dot < 1.0 - 1e-12) {
    const double theta = std::acos(std::min(dot, 1.0));
    wa = std::sin((1.0 - t) * theta) / std::sin(theta);
    wb = std::sin(t * theta) / std::sin(theta);
  }
  return normalized(Quaternion{wa * na.w + wb * nb.w, wa * na.x + wb * nb.x, wa * na.y + wb * nb.y,
                               wa * na.z + wb * nb.z});
}

namespace {

double orthonormality(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

RotationMatrix::RotationMatrix(const Mat3& m) : m_(m) {
  if (!m.allFinite()) fail(ErrorCode::kInvalidInput, "rotation matrix has non-finite entries");
  const double ortho = orthonormality(m);
  const double det = m.determinant();
  if (ortho >= kTolerance || std::abs(det - 1.0) >= kTolerance) {
    fail(ErrorCode::kInvalidInput, "matrix is not a proper rotation (orthonormality error " +
                                       std::to_string(ortho) + ", det " + std::to_string(det) + ")");
  }
}

RotationMatrix RotationMatrix::nearest(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return RotationMatrix(svd.matrixU() * d * svd.matrixV().transpose(), Unchecked{});
}

RotationMatrix RotationMatrix::transpose() const {
  return RotationMatrix(m_.transpose(), Unchecked{});
}

double RotationMatrix::orthonormality_error() const { return orthonormality(m_); }

double rotation_angle_between(const RotationMatrix& a, const RotationMatrix& b) {
  const Mat3 d = a.matrix() * b.matrix().transpose();
  // atan2 form stays accurate for tiny angles, unlike acos of the trace.
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (d.trace() - 1.0));
}

RotationMatrix quat_to_rotmat(const Quaternion& q) {
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    fail(ErrorCode::kInvalidInput, "quaternion is not unit (norm " + std::to_string(q.norm()) + ")");
  }
  // Renormalize so the result is orthonormal to machine precision.
  const double n = q.norm();
  const double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return RotationMatrix(m);
}

Quaternion rotmat_to_quat(const RotationMatrix& r) {
  const Mat3& m = r.matrix();
  const double trace = m.trace();
  Quaternion q;
  // Shepperd: branch on the largest of (w², x², y², z²).
  if (trace > m(0, 0) && trace > m(1, 1) && trace > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    q = {0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s};
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    q = {(m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s};
  } else if (m(1, 1) > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 - m(0, 0) + m(1, 1) - m(2, 2));
    q = {(m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 - m(0, 0) - m(1, 1) + m(2, 2));
    q = {(m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s};
  }
  return normalized(q);
}

RotationMatrix compose_rotation(const RotationMatrix& relative, const RotationMatrix& previous) {
  const Mat3 product = relative.matrix() * previous.matrix();
  if (orthonormality(product) > 1e-12) return RotationMatrix::nearest(product);
  return RotationMatrix(product);
}

double quat_distance(const Quaternion& a, const Quaternion& b) {
  const Quaternion ca = canonical(a);
  const Quaternion cb = canonical(b);
  const double dw = ca.w - cb.w, dx = ca.x - cb.x, dy = ca.y - cb.y, dz = ca.z - cb.z;
  return std::sqrt(dw * dw + dx * dx + dy * dy + dz * dz);
}

Pose::Pose(const Vec3& position, const Quaternion& orientation)
    : position_(position), orientation_(normalized(orientation)) {
  require(position.allFinite(), "pose position must be finite");
}

std::array<double, 7> Pose::to_vector() const {
  return {position_.x(), position_.y(), position_.z(), orientation_.w,
          orientation_.x, orientation_.y, orientation_.z};
}

Pose Pose::from_vector(const std::array<double, 7>& v) {
  return Pose(Vec3(v[0], v[1], v[2]), Quaternion{v[3], v[4], v[5], v[6]});
}

void Trajectory::push_back(std::int64_t frame, const Pose& pose) {
  if (!points_.empty() && frame <= points_.back().frame) {
    fail(ErrorCode::kInvalidInput, "trajectory frame indices must be strictly increasing");
  }
  points_.push_back({frame, pose});
}

Trajectory Trajectory::slice(std::size_t first, std::size_t count) const {
  require(first + count <= points_.size(), "trajectory slice out of range");
  Trajectory out;
  out.points_.assign(points_.begin() + static_cast<std::ptrdiff_t>(first),
                     points_.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

}  // namespace convo
