#include "convo/epipolar.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <cmath>

#include "convo/error.hpp"

namespace convo {

Correspondences Correspondences::from_pixels(std::vector<Eigen::Vector2d> p0,
                                             std::vector<Eigen::Vector2d> p1, const Intrinsics& k) {
  require(p0.size() == p1.size(), "correspondence lists must have equal length");
  Correspondences c;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    c.normalized0.push_back(k.normalize(p0[i]));
    c.normalized1.push_back(k.normalize(p1[i]));
  }
  c.pixels0 = std::move(p0);
  c.pixels1 = std::move(p1);
  return c;
}

Correspondences Correspondences::from_normalized(std::vector<Vec3> x0, std::vector<Vec3> x1) {
  require(x0.size() == x1.size(), "correspondence lists must have equal length");
  Correspondences c;
  for (auto& v : x0) {
    require(std::abs(v.z()) > 1e-12, "normalized point at infinity");
    v /= v.z();
  }
  for (auto& v : x1) {
    require(std::abs(v.z()) > 1e-12, "normalized point at infinity");
    v /= v.z();
  }
  c.normalized0 = std::move(x0);
  c.normalized1 = std::move(x1);
  return c;
}

nlohmann::json Correspondences::to_json() const {
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t i = 0; i < size(); ++i) {
    nlohmann::json p = {{"x0", {normalized0[i].x(), normalized0[i].y()}},
                        {"x1", {normalized1[i].x(), normalized1[i].y()}}};
    if (i < pixels0.size()) {
      p["p0"] = {pixels0[i].x(), pixels0[i].y()};
      p["p1"] = {pixels1[i].x(), pixels1[i].y()};
    }
    pairs.push_back(p);
  }
  return {{"format", "convo.correspondences"}, {"version", 1}, {"pairs", pairs}};
}

Correspondences Correspondences::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "convo.correspondences", "unsupported correspondence document");
    Correspondences c;
    for (const auto& p : j.at("pairs")) {
      c.normalized0.emplace_back(p.at("x0").at(0), p.at("x0").at(1), 1.0);
      c.normalized1.emplace_back(p.at("x1").at(0), p.at("x1").at(1), 1.0);
      if (p.contains("p0")) {
        c.pixels0.emplace_back(p.at("p0").at(0), p.at("p0").at(1));
        c.pixels1.emplace_back(p.at("p1").at(0), p.at("p1").at(1));
      }
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed correspondences: ") + e.what());
  }
}

Mat3 skew(const Vec3& t) {
  Mat3 m;
  m << 0.0, -t.z(), t.y(), t.z(), 0.0, -t.x(), -t.y(), t.x(), 0.0;
  return m;
}

Mat3 essential_from_motion(const RelativeMotion& motion) {
  return skew(motion.translation) * motion.rotation.matrix();
}

double max_epipolar_residual(const Mat3& e, const Correspondences& corr) {
  double worst = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    worst = std::max(worst, std::abs(corr.normalized1[i].dot(e * corr.normalized0[i])));
  }
  return worst;
}

namespace {

// Similarity moving the centroid to the origin with mean distance √2.
Mat3 hartley_transform(const std::vector<Vec3>& pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p.head<2>();
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p.head<2>() - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 1e-15 ? std::sqrt(2.0) / dist : 1.0;
  Mat3 t;
  t << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return t;
}

}  // namespace

Mat3 estimate_essential(const Correspondences& corr) {
  const std::size_t n = corr.size();
  require(n >= 8, "essential matrix estimation needs at least 8 correspondences");
  require(corr.normalized1.size() == n, "correspondence lists must have equal length");

  const Mat3 t0 = hartley_transform(corr.normalized0);
  const Mat3 t1 = hartley_transform(corr.normalized1);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x0 = t0 * corr.normalized0[i];
    const Vec3 x1 = t1 * corr.normalized1[i];
    const auto r = static_cast<Eigen::Index>(i);
    // x1ᵀ E x0 = Σ_jk x1_j E_jk x0_k with E stored row-major.
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) a(r, 3 * j + k) = x1(j) * x0(k);
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Rank below 8 leaves more than a one-dimensional null space.
  if (sv.size() < 8 || !(sv(7) > 1e-10 * sv(0))) {
    fail(ErrorCode::kDegenerateConfiguration, "eight-point design matrix is rank deficient");
  }
  const Eigen::Matrix<double, 9, 1> e_vec = svd.matrixV().col(8);
  Mat3 e_norm;
  e_norm << e_vec(0), e_vec(1), e_vec(2), e_vec(3), e_vec(4), e_vec(5), e_vec(6), e_vec(7), e_vec(8);

  const Mat3 e = t1.transpose() * e_norm * t0;
  Eigen::JacobiSVD<Mat3> esvd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 projected = esvd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() *
                         esvd.matrixV().transpose();
  return projected;
}

namespace {

// Depths (d0, d1) with d1·x1 ≈ d0·R·x0 + t, in the least-squares sense.
Eigen::Vector2d triangulate_depths(const Mat3& r, const Vec3& t, const Vec3& x0, const Vec3& x1) {
  Eigen::Matrix<double, 3, 2> a;
  a.col(0) = r * x0;
  a.col(1) = -x1;
  return a.colPivHouseholderQr().solve(-t);
}

}  // namespace

RelativeMotion decompose_essential(const Mat3& e, const Correspondences& corr) {
  require(corr.size() >= 1, "decomposition needs at least one correspondence");
  require(e.allFinite(), "essential matrix has non-finite entries");
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  require(s(0) > 0.0 && s(1) / s(0) > 1.0 - 1e-6 && s(2) / s(0) < 1e-6,
          "matrix is not essential (singular values not (s, s, 0))");

  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Mat3 w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;

  const std::array<Mat3, 2> rotations = {u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Vec3 t = u.col(2).normalized();

  struct Candidate {
    Mat3 r;
    Vec3 t;
    std::size_t in_front = 0;
  };
  std::array<Candidate, 4> candidates = {Candidate{rotations[0], t}, Candidate{rotations[0], -t},
                                         Candidate{rotations[1], t}, Candidate{rotations[1], -t}};
  for (auto& c : candidates) {
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const Eigen::Vector2d d = triangulate_depths(c.r, c.t, corr.normalized0[i], corr.normalized1[i]);
      if (d(0) > 0.0 && d(1) > 0.0) ++c.in_front;
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].in_front > candidates[best].in_front) best = i;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i != best && candidates[i].in_front == candidates[best].in_front) {
      fail(ErrorCode::kAmbiguousDecomposition, "cheirality test does not single out one candidate");
    }
  }
  return {RotationMatrix::nearest(candidates[best].r), candidates[best].t};
}

}  // namespace convo
