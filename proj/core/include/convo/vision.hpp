#pragma once

#include <nlohmann/json_fwd.hpp>

#include "convo/corners.hpp"
#include "convo/epipolar.hpp"
#include "convo/optical_flow.hpp"
#include "convo/scene.hpp"

namespace convo {

struct VisionParams {
  HarrisParams harris;
  int max_corners = 150;
  LucasKanadeParams flow;
  /// Corners closer than this to the border are not tracked.
  int track_margin = 8;
  /// Tracks whose backward track (B to A) lands farther than this from the
  /// source corner are dropped, in pixels. Non-positive disables the check.
  double max_forward_backward = 0.5;
};

struct MotionEstimate {
  RelativeMotion motion;
  Correspondences correspondences;
  Mat3 essential = Mat3::Zero();
  std::size_t corners = 0;
  std::size_t tracked = 0;
  double epipolar_residual = 0.0;
};

/// Harris corners in `a`, tracked into `b` with Lucas–Kanade and checked by
/// tracking back into `a`, then the
/// eight-point essential matrix and its cheirality-resolved factorization.
/// Throws kDegenerateConfiguration when fewer than 8 tracks survive, plus
/// anything the epipolar stage throws.
MotionEstimate estimate_relative_motion(const Frame& a, const Frame& b, const Intrinsics& intrinsics,
                                        const VisionParams& params = {});

}  // namespace convo
