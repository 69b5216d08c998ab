#include "convo/vision.hpp"

#include "convo/error.hpp"

namespace convo {

MotionEstimate estimate_relative_motion(const Frame& a, const Frame& b, const Intrinsics& intrinsics,
                                        const VisionParams& params) {
  MotionEstimate est;
  const auto corners = harris_corners(a, params.max_corners, params.harris);
  est.corners = corners.size();
  std::vector<Eigen::Vector2d> points;
  for (const auto& c : corners) {
    const auto& p = c.pixel;
    if (p.x() >= params.track_margin && p.y() >= params.track_margin &&
        p.x() <= a.width() - 1 - params.track_margin && p.y() <= a.height() - 1 - params.track_margin) {
      points.push_back(p);
    }
  }
  const auto tracks = lucas_kanade(a, b, points, params.flow);
  std::vector<Eigen::Vector2d> p0, p1;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!tracks[i].ok()) continue;
    p0.push_back(points[i]);
    p1.push_back(tracks[i].point);
  }
  if (params.max_forward_backward > 0.0 && !p1.empty()) {
    const auto back = lucas_kanade(b, a, p1, params.flow);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < back.size(); ++i) {
      if (!back[i].ok() || (back[i].point - p0[i]).norm() > params.max_forward_backward) continue;
      p0[kept] = p0[i];
      p1[kept] = p1[i];
      ++kept;
    }
    p0.resize(kept);
    p1.resize(kept);
  }
  est.tracked = p0.size();
  if (est.tracked < 8) {
    fail(ErrorCode::kDegenerateConfiguration, "only " + std::to_string(est.tracked) + " tracked points (need 8)");
  }
  est.correspondences = Correspondences::from_pixels(std::move(p0), std::move(p1), intrinsics);
  est.essential = estimate_essential(est.correspondences);
  est.motion = decompose_essential(est.essential, est.correspondences);
  est.epipolar_residual = max_epipolar_residual(essential_from_motion(est.motion), est.correspondences);
  return est;
}

}  // namespace convo
