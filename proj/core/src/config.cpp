#include "convo/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

#include "convo/error.hpp"

namespace convo {

namespace {

void reject_unknown(const nlohmann::json& j, const nlohmann::json& defaults, const std::string& where) {
  require(j.is_object(), where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) fail(ErrorCode::kInvalidInput, "unknown " + where + " key '" + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

std::string to_string(CapacityTier tier) {
  switch (tier) {
    case CapacityTier::kSmall: return "small";
    case CapacityTier::kMedium: return "medium";
    case CapacityTier::kLarge: return "large";
  }
  return "medium";
}

CapacityTier capacity_from_string(const std::string& name) {
  if (name == "small") return CapacityTier::kSmall;
  if (name == "medium") return CapacityTier::kMedium;
  if (name == "large") return CapacityTier::kLarge;
  fail(ErrorCode::kInvalidInput, "capacity must be small, medium or large, got '" + name + "'");
}

nlohmann::json SceneConfig::to_json() const {
  return {{"symmetric", symmetric},
          {"height", height},
          {"width", width},
          {"focal", focal},
          {"lane_half_length", lane_half_length},
          {"lane_offset", lane_offset},
          {"turn_radius", turn_radius},
          {"frames_per_lap", frames_per_lap},
          {"depth_near", depth_near},
          {"depth_far", depth_far},
          {"landmark_density", landmark_density},
          {"lap_jitter", lap_jitter}};
}

SceneConfig SceneConfig::from_json(const nlohmann::json& j) {
  SceneConfig s;
  reject_unknown(j, s.to_json(), "scene");
  read(j, "symmetric", s.symmetric);
  read(j, "height", s.height);
  read(j, "width", s.width);
  read(j, "focal", s.focal);
  read(j, "lane_half_length", s.lane_half_length);
  read(j, "lane_offset", s.lane_offset);
  read(j, "turn_radius", s.turn_radius);
  read(j, "frames_per_lap", s.frames_per_lap);
  read(j, "depth_near", s.depth_near);
  read(j, "depth_far", s.depth_far);
  read(j, "landmark_density", s.landmark_density);
  read(j, "lap_jitter", s.lap_jitter);
  return s;
}

void ExperimentConfig::validate() const {
  require(seeds >= 1, "seeds must be at least 1");
  require(classes >= 2, "classes must be at least 2");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(train_fraction > 0.0 && train_fraction <= 1.0, "train_fraction must lie in (0, 1]");
  require(noise_sigma >= 0.0 && train_noise_sigma >= 0.0, "noise sigmas must be non-negative");
  require(trajectory_length >= 3, "trajectory_length must be at least 3");
  require(train_split > 0.0 && calib_split > 0.0 && train_split + calib_split < 1.0,
          "train_split and calib_split must be positive and leave room for a test block");
  require(feature_grid >= 1, "feature_grid must be positive");
  require(small_width >= 0 && medium_width >= 0 && large_width >= 0, "tier widths must be non-negative");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(max_epochs >= 1, "max_epochs must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(scene.height >= 32 && scene.width >= 32, "frames must be at least 32x32");
  require(scene.focal > 0.0, "focal must be positive");
  require(scene.lane_half_length > 0.0 && scene.lane_offset > 0.0 && scene.turn_radius > 0.0,
          "lane geometry must be positive");
  require(scene.frames_per_lap >= 8 && scene.frames_per_lap % 2 == 0, "frames_per_lap must be even and >= 8");
  require(scene.depth_near > 0.0 && scene.depth_far > scene.depth_near, "need 0 < depth_near < depth_far");
  require(scene.landmark_density > 0.0, "landmark_density must be positive");
  require(scene.lap_jitter >= 0.0, "lap_jitter must be non-negative");
}

int ExperimentConfig::hidden_width(CapacityTier tier) const {
  switch (tier) {
    case CapacityTier::kSmall: return small_width;
    case CapacityTier::kMedium: return medium_width;
    case CapacityTier::kLarge: return large_width;
  }
  return medium_width;
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"seed", seed},
          {"seeds", seeds},
          {"classes", classes},
          {"alpha", alpha},
          {"capacity", to_string(capacity)},
          {"train_fraction", train_fraction},
          {"noise_sigma", noise_sigma},
          {"train_noise_sigma", train_noise_sigma},
          {"trajectory_length", trajectory_length},
          {"train_split", train_split},
          {"calib_split", calib_split},
          {"feature_grid", feature_grid},
          {"small_width", small_width},
          {"medium_width", medium_width},
          {"large_width", large_width},
          {"learning_rate", learning_rate},
          {"max_epochs", max_epochs},
          {"weight_decay", weight_decay},
          {"scene", scene.to_json()},
          {"output_dir", output_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  reject_unknown(j, c.to_json(), "config");
  read(j, "seed", c.seed);
  read(j, "seeds", c.seeds);
  read(j, "classes", c.classes);
  read(j, "alpha", c.alpha);
  if (j.contains("capacity")) {
    std::string tier;
    read(j, "capacity", tier);
    c.capacity = capacity_from_string(tier);
  }
  read(j, "train_fraction", c.train_fraction);
  read(j, "noise_sigma", c.noise_sigma);
  read(j, "train_noise_sigma", c.train_noise_sigma);
  read(j, "trajectory_length", c.trajectory_length);
  read(j, "train_split", c.train_split);
  read(j, "calib_split", c.calib_split);
  read(j, "feature_grid", c.feature_grid);
  read(j, "small_width", c.small_width);
  read(j, "medium_width", c.medium_width);
  read(j, "large_width", c.large_width);
  read(j, "learning_rate", c.learning_rate);
  read(j, "max_epochs", c.max_epochs);
  read(j, "weight_decay", c.weight_decay);
  if (j.contains("scene")) c.scene = SceneConfig::from_json(j.at("scene"));
  read(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write config " + path.string());
  out << config.to_json().dump(2) << '\n';
}

}  // namespace convo
