#include "convo/reasoning.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "convo/error.hpp"

namespace convo {

namespace {

constexpr std::size_t kPositionDims = 3;

// Interval midpoints can straddle the origin in all four quaternion
// dimensions; fall back to identity there rather than throwing.
Pose pose_from_vector_safe(const std::array<double, kPoseDims>& v) {
  const Quaternion q{v[3], v[4], v[5], v[6]};
  if (q.norm() < 1e-6) return Pose(Vec3(v[0], v[1], v[2]), Quaternion{});
  return Pose::from_vector(v);
}

std::size_t best_mass_interval(const std::vector<RegionInterval>& ivs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < ivs.size(); ++i) {
    if (ivs[i].mass > ivs[best].mass) best = i;
  }
  return best;
}

CandidatePose make_candidate(const std::array<double, kPoseDims>& v, std::uint64_t source, double mass) {
  CandidatePose c;
  c.position = Vec3(v[0], v[1], v[2]);
  c.source = source;
  c.mass = mass;
  const Quaternion q{v[3], v[4], v[5], v[6]};
  if (q.norm() < 1e-6) {
    c.valid = false;
  } else {
    c.orientation = normalized(q);
  }
  return c;
}

// Among candidates accepted by `eligible`, the minimum objective with
// ties (within tolerance) resolved by larger mass, then smaller source.
template <typename Eligible, typename Objective>
std::optional<Selection> argmin_with_tiebreak(std::span<const CandidatePose> candidates, Eligible eligible,
                                              Objective objective) {
  std::vector<double> values(candidates.size(), std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!eligible(candidates[i])) continue;
    values[i] = objective(candidates[i]);
    best = std::min(best, values[i]);
  }
  if (!std::isfinite(best)) return std::nullopt;
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!(values[i] <= best + kObjectiveTieTolerance)) continue;
    if (!pick) {
      pick = i;
      continue;
    }
    const auto& a = candidates[i];
    const auto& b = candidates[*pick];
    if (a.mass > b.mass || (a.mass == b.mass && a.source < b.source)) pick = i;
  }
  return Selection{*pick, values[*pick], false};
}

std::size_t highest_mass(std::span<const CandidatePose> candidates) {
  std::size_t pick = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& a = candidates[i];
    const auto& b = candidates[pick];
    if (a.mass > b.mass || (a.mass == b.mass && a.source < b.source)) pick = i;
  }
  return pick;
}

}  // namespace

std::vector<CandidatePose> enumerate_candidates(const UncertaintyRegion& region, CandidateScope scope) {
  require(region.dims() == kPoseDims, "candidate enumeration needs a 7-dimensional pose region");
  std::size_t first = 0, last = kPoseDims;
  if (scope == CandidateScope::kPosition) last = kPositionDims;
  if (scope == CandidateScope::kOrientation) first = kPositionDims;

  // Dimensions outside the scope are pinned to their highest-mass interval.
  std::array<std::size_t, kPoseDims> pinned{};
  for (std::size_t d = 0; d < kPoseDims; ++d) pinned[d] = best_mass_interval(region.intervals(d));

  std::uint64_t count = 1;
  for (std::size_t d = first; d < last; ++d) count *= region.interval_count(d);
  require(count <= 5'000'000, "region has too many cuboids to enumerate");

  std::vector<CandidatePose> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t idx = 0; idx < count; ++idx) {
    std::array<std::size_t, kPoseDims> pick = pinned;
    std::uint64_t rest = idx;
    for (std::size_t d = last; d-- > first;) {
      pick[d] = static_cast<std::size_t>(rest % region.interval_count(d));
      rest /= region.interval_count(d);
    }
    std::array<double, kPoseDims> v{};
    double mass = 1.0;
    for (std::size_t d = 0; d < kPoseDims; ++d) {
      const auto& iv = region.intervals(d)[pick[d]];
      v[d] = iv.bounds.midpoint();
      mass *= iv.mass;
    }
    out.push_back(make_candidate(v, idx, mass));
  }
  return out;
}

Selection select_orientation(std::span<const CandidatePose> candidates, const RotationMatrix& relative,
                             const Quaternion& previous) {
  const RotationMatrix next = compose_rotation(relative, quat_to_rotmat(normalized(previous)));
  const Quaternion q_next = rotmat_to_quat(next);
  const auto sel = argmin_with_tiebreak(
      candidates, [](const CandidatePose& c) { return c.valid; },
      [&](const CandidatePose& c) { return quat_distance(c.orientation, q_next); });
  if (!sel) fail(ErrorCode::kNoCandidate, "no valid orientation candidate");
  return *sel;
}

double direction_objective(const Vec3& relative_direction, const Vec3& candidate, const Vec3& previous) {
  const Vec3 step = candidate - previous;
  return (relative_direction - step / step.norm()).norm();
}

Selection select_position(std::span<const CandidatePose> candidates, const Vec3& relative_direction,
                          const Vec3& previous) {
  if (candidates.empty()) fail(ErrorCode::kNoCandidate, "no position candidate");
  require(relative_direction.norm() > 0.0, "relative translation direction must be nonzero");
  const Vec3 dir = relative_direction.normalized();
  const auto sel = argmin_with_tiebreak(
      candidates, [&](const CandidatePose& c) { return (c.position - previous).norm() > 1e-9; },
      [&](const CandidatePose& c) { return direction_objective(dir, c.position, previous); });
  if (sel) return *sel;
  return Selection{highest_mass(candidates), 0.0, true};
}

Pose argmax_decode(const HeadScores& scores, const QuantileGrid& grid) {
  require(scores.size() == grid.dims() && grid.dims() == kPoseDims, "argmax decode needs 7 pose heads");
  std::array<double, kPoseDims> v{};
  for (std::size_t d = 0; d < kPoseDims; ++d) {
    Eigen::Index best = 0;
    scores[d].maxCoeff(&best);
    v[d] = grid.dim(d).interval(static_cast<std::size_t>(best)).midpoint();
  }
  return pose_from_vector_safe(v);
}

Pose region_midpoint_decode(const UncertaintyRegion& region) {
  require(region.dims() == kPoseDims, "midpoint decode needs a 7-dimensional pose region");
  std::array<double, kPoseDims> v{};
  for (std::size_t d = 0; d < kPoseDims; ++d) {
    v[d] = region.intervals(d)[best_mass_interval(region.intervals(d))].bounds.midpoint();
  }
  return pose_from_vector_safe(v);
}

nlohmann::json StepDiagnostics::to_json() const {
  return {{"frame", frame},
          {"set_sizes", set_sizes},
          {"interval_counts", interval_counts},
          {"cuboids", cuboids},
          {"position_candidates", position_candidates},
          {"orientation_candidates", orientation_candidates},
          {"set_fallback", set_fallback},
          {"vision_ok", vision_ok},
          {"vision_error", vision_error},
          {"corners", corners},
          {"tracked", tracked},
          {"epipolar_residual", epipolar_residual},
          {"selection_fallback", selection_fallback},
          {"position_objective", position_objective},
          {"orientation_objective", orientation_objective}};
}

RolloutResult rollout(const CalibratedModel& cal, const FeatureExtractor& extractor, std::span<const Frame> frames,
                      const Intrinsics& intrinsics, std::int64_t first_frame, const RolloutOptions& options) {
  require(frames.size() >= 2, "rollout needs at least two frames");
  RolloutResult result;

  Eigen::MatrixXd features(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(extractor.size()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    features.row(static_cast<Eigen::Index>(i)) = extractor.extract(frames[i]).transpose();
  }
  result.sets = predict_sets(cal, features);

  Pose previous;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const PredictionSet& set = result.sets[i];
    UncertaintyRegion region = to_region(set, cal.grid);

    StepDiagnostics diag;
    diag.frame = first_frame + static_cast<std::int64_t>(i);
    for (std::size_t d = 0; d < region.dims(); ++d) {
      diag.set_sizes.push_back(set.classes[d].size());
      diag.interval_counts.push_back(region.interval_count(d));
    }
    diag.cuboids = region.cuboid_count();
    diag.set_fallback = set.any_fallback();

    Pose selected;
    if (i == 0) {
      selected = argmax_decode(set.scores, cal.grid);
      diag.vision_ok = true;  // no relative motion is needed for the first frame
    } else {
      const auto positions = enumerate_candidates(region, CandidateScope::kPosition);
      const auto orientations = enumerate_candidates(region, CandidateScope::kOrientation);
      diag.position_candidates = positions.size();
      diag.orientation_candidates = orientations.size();
      try {
        const MotionEstimate est = estimate_relative_motion(frames[i - 1], frames[i], intrinsics, options.vision);
        diag.vision_ok = true;
        diag.corners = est.corners;
        diag.tracked = est.tracked;
        diag.epipolar_residual = est.epipolar_residual;

        const Selection o = select_orientation(orientations, est.motion.rotation, previous.orientation());
        const RotationMatrix next = compose_rotation(est.motion.rotation, previous.rotation());
        // Camera-frame translation → world-frame direction of camera motion.
        const Vec3 world_step = -(next.matrix().transpose() * est.motion.translation);
        const Selection p = select_position(positions, world_step, previous.position());
        diag.selection_fallback = p.fallback;
        diag.position_objective = p.objective;
        diag.orientation_objective = o.objective;
        selected = Pose(positions[p.index].position, orientations[o.index].orientation);
      } catch (const Error& e) {
        diag.vision_ok = false;
        diag.vision_error = std::string(to_string(e.code())) + ": " + e.what();
        diag.selection_fallback = true;
        const auto valid_orientation = std::find_if(orientations.begin(), orientations.end(),
                                                    [](const CandidatePose& c) { return c.valid; });
        const std::size_t pi = highest_mass(positions);
        std::size_t oi = 0;
        for (std::size_t k = 0; k < orientations.size(); ++k) {
          if (!orientations[k].valid) continue;
          const auto& a = orientations[k];
          const auto& b = orientations[oi];
          if (!b.valid || a.mass > b.mass || (a.mass == b.mass && a.source < b.source)) oi = k;
        }
        const Quaternion q = valid_orientation == orientations.end() ? previous.orientation()
                                                                       : orientations[oi].orientation;
        selected = Pose(positions[pi].position, q);
      }
    }
    result.trajectory.push_back(diag.frame, selected);
    result.steps.push_back(std::move(diag));
    result.regions.push_back(std::move(region));
    previous = selected;
  }
  return result;
}

Trajectory argmax_rollout(const CalibratedModel& cal, const FeatureExtractor& extractor, std::span<const Frame> frames,
                          std::int64_t first_frame) {
  Trajectory out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto scores = cal.model.predict_scores(extractor.extract(frames[i]));
    out.push_back(first_frame + static_cast<std::int64_t>(i), argmax_decode(scores, cal.grid));
  }
  return out;
}

}  // namespace convo
