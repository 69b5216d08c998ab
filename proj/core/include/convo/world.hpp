#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <random>
#include <vector>

#include "convo/config.hpp"
#include "convo/frame.hpp"
#include "convo/scene.hpp"

namespace convo {

/// Contiguous train / calibration / test blocks over frame positions.
struct Split {
  std::size_t train_begin = 0;
  std::size_t train_count = 0;
  std::size_t calib_begin = 0;
  std::size_t calib_count = 0;
  std::size_t test_begin = 0;
  std::size_t test_count = 0;

  nlohmann::json to_json() const;
  static Split from_json(const nlohmann::json& j);
  bool operator==(const Split&) const = default;
};

/// Block sizes round(train·n) and round(calib·n); the test block takes the
/// rest. Throws kInvalidInput when any block would be empty.
Split make_split(std::size_t length, double train, double calib);

/// Closed loop in the z = 0 plane made of two straight lanes joined by
/// half-ellipse turns. Lane A runs along +x at y = 0, lane B back along −x at
/// y = lane_offset. Orientation is slerped between keyframes placed along x
/// and so depends on x only: with a y-periodic landmark layout the two lanes
/// are visually indistinguishable.
class LoopPath {
 public:
  LoopPath() = default;
  static LoopPath sample(const SceneConfig& scene, std::mt19937_64& rng);

  /// Pose at arc parameter s ∈ [0, frames_per_lap), shifted by `offset`.
  /// Each lap starts at the apex of the turn at the −x end.
  Pose at(double s, const Vec3& offset = Vec3::Zero()) const;

  const SceneConfig& scene() const { return scene_; }

  nlohmann::json to_json() const;
  static LoopPath from_json(const nlohmann::json& j);

 private:
  SceneConfig scene_;
  double knot_start_ = 0.0;
  double knot_spacing_ = 1.0;
  std::vector<Quaternion> keyframes_;
};

struct World {
  SyntheticScene scene;
  LoopPath path;
  Trajectory trajectory;
  std::vector<Frame> frames;
  Split split;

  /// Scene, path, trajectory and split; frames are not included.
  nlohmann::json to_json() const;
  /// Rebuilds the frames by rendering the stored trajectory.
  static World from_json(const nlohmann::json& j);
};

/// Landmarks covering every view of a loop with these parameters. With `scene.symmetric` the layout
/// repeats along y with period `lane_offset`.
SyntheticScene make_scene(const SceneConfig& scene, std::mt19937_64& rng);

/// Deterministic in `config.seed`. Throws kGeneration when some view of the
/// trajectory sees too few landmarks.
World generate_world(const ExperimentConfig& config);

/// Pose drawn uniformly along the loop with a fresh per-sample lap offset;
/// used to build exchangeable audit data.
Pose sample_loop_pose(const LoopPath& path, std::mt19937_64& rng);

/// Minimum number of visible landmarks required of every generated view.
inline constexpr std::size_t kMinVisibleLandmarks = 20;

}  // namespace convo
