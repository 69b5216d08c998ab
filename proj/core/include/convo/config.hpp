#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace convo {

enum class CapacityTier { kSmall, kMedium, kLarge };

std::string to_string(CapacityTier tier);
/// Throws kInvalidInput on anything but "small", "medium" or "large".
CapacityTier capacity_from_string(const std::string& name);

/// Synthetic world layout. Positions in meters.
struct SceneConfig {
  /// Landmark layout repeats along y with period `lane_offset`, so that the
  /// two lanes of the loop see identical images.
  bool symmetric = true;
  int height = 96;
  int width = 96;
  double focal = 80.0;
  /// Half-length of each lane along x.
  double lane_half_length = 1.5;
  /// Lateral distance between the two lanes.
  double lane_offset = 1.0;
  /// How far the turns bulge beyond the lane ends.
  double turn_radius = 0.5;
  int frames_per_lap = 60;
  double depth_near = 2.5;
  double depth_far = 5.0;
  /// Landmarks per square meter of the (x, y) footprint.
  double landmark_density = 2.5;
  /// Half-range of the uniform per-lap shift in x and y.
  double lap_jitter = 0.02;

  nlohmann::json to_json() const;
  static SceneConfig from_json(const nlohmann::json& j);
  bool operator==(const SceneConfig&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  /// Seeds used by the studies: seed, seed + 1, ..., seed + seeds − 1.
  int seeds = 10;
  int classes = 50;
  double alpha = 0.1;
  CapacityTier capacity = CapacityTier::kMedium;
  double train_fraction = 1.0;
  double noise_sigma = 0.0;
  double train_noise_sigma = 0.0;
  int trajectory_length = 300;
  double train_split = 0.6;
  double calib_split = 0.2;
  int feature_grid = 8;
  /// Hidden widths of the small, medium and large tiers.
  int small_width = 8;
  int medium_width = 32;
  int large_width = 128;
  double learning_rate = 0.5;
  int max_epochs = 1500;
  double weight_decay = 1e-3;
  SceneConfig scene;
  std::string output_dir = "out";

  /// Throws kInvalidInput when a field is out of range.
  void validate() const;
  int hidden_width(CapacityTier tier) const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

}  // namespace convo
