#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "convo/conformal.hpp"
#include "convo/features.hpp"
#include "convo/vision.hpp"

namespace convo {

/// One pose hypothesis per cuboid: interval midpoints per dimension, with the
/// quaternion part renormalized. `source` is the cuboid index.
struct CandidatePose {
  Vec3 position = Vec3::Zero();
  Quaternion orientation{};
  std::uint64_t source = 0;
  /// Product over dimensions of the interval softmax masses.
  double mass = 0.0;
  /// False when the quaternion midpoints have norm below 1e-6.
  bool valid = true;
};

/// Which dimensions to enumerate. kPosition and kOrientation enumerate only
/// the product of the position (resp. orientation) intervals and fill the
/// other part from the highest-mass interval of each remaining dimension.
enum class CandidateScope { kAll, kPosition, kOrientation };

/// Candidate per cuboid (in the chosen scope), in cuboid-index order. Requires
/// a 7-dimensional region.
std::vector<CandidatePose> enumerate_candidates(const UncertaintyRegion& region,
                                                CandidateScope scope = CandidateScope::kAll);

struct Selection {
  std::size_t index = 0;  // into the candidate list
  double objective = 0.0;
  bool fallback = false;
};

/// Tolerance within which two objective values count as tied.
inline constexpr double kObjectiveTieTolerance = 1e-12;

/// argmin ‖q − q_next‖ with q_next from R_next = R_relative · R(q_previous).
/// Ties go to the higher mass, then the lower source. Throws kNoCandidate when
/// no candidate is valid.
Selection select_orientation(std::span<const CandidatePose> candidates, const RotationMatrix& relative,
                             const Quaternion& previous);

/// argmin ‖t_relative − (p − t_previous)/|p − t_previous|‖ over candidates that
/// moved more than 1e-9 from t_previous; when none did, the highest-mass
/// candidate is returned with `fallback` set. Same tie-break as orientation.
Selection select_position(std::span<const CandidatePose> candidates, const Vec3& relative_direction,
                          const Vec3& previous);

/// Distance between a unit motion direction and the unit step toward a candidate.
double direction_objective(const Vec3& relative_direction, const Vec3& candidate, const Vec3& previous);

/// Pose from per-head argmax classes, decoded at interval midpoints.
Pose argmax_decode(const HeadScores& scores, const QuantileGrid& grid);

/// Pose at the midpoints of the highest-mass interval per dimension.
Pose region_midpoint_decode(const UncertaintyRegion& region);

struct RolloutOptions {
  VisionParams vision;
};

struct StepDiagnostics {
  std::int64_t frame = 0;
  std::vector<std::size_t> set_sizes;
  std::vector<std::size_t> interval_counts;
  std::uint64_t cuboids = 0;
  std::size_t position_candidates = 0;
  std::size_t orientation_candidates = 0;
  bool set_fallback = false;
  bool vision_ok = false;
  std::string vision_error;
  std::size_t corners = 0;
  std::size_t tracked = 0;
  double epipolar_residual = 0.0;
  bool selection_fallback = false;
  double position_objective = 0.0;
  double orientation_objective = 0.0;

  bool any_fallback() const { return set_fallback || !vision_ok || selection_fallback; }
  nlohmann::json to_json() const;
};

struct RolloutResult {
  Trajectory trajectory;
  std::vector<StepDiagnostics> steps;
  std::vector<PredictionSet> sets;
  std::vector<UncertaintyRegion> regions;
};

/// Sequential mode selection. Step 0 is the argmax decode; every later step
/// predicts a set, enumerates candidates, estimates relative motion from the
/// previous frame and picks orientation and position independently. A
/// vision failure falls back to the highest-mass candidate for that step.
/// Frame indices run from `first_frame`. Throws kInvalidInput for fewer than 2
/// frames.
RolloutResult rollout(const CalibratedModel& cal, const FeatureExtractor& extractor,
                      std::span<const Frame> frames, const Intrinsics& intrinsics,
                      std::int64_t first_frame = 0, const RolloutOptions& options = {});

/// Per-frame argmax decode with no set prediction or reasoning.
Trajectory argmax_rollout(const CalibratedModel& cal, const FeatureExtractor& extractor,
                          std::span<const Frame> frames, std::int64_t first_frame = 0);

}  // namespace convo
