#include "convo/world.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "convo/error.hpp"

namespace convo {

namespace {

constexpr double kPi = std::numbers::pi;

// Distinct streams for the pieces of a world so that changing one does not
// reshuffle the others.
constexpr std::uint64_t kPathStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kSceneStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kLapStream = 0x94d049bb133111ebULL;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double x_extent(const SceneConfig& s) { return s.lane_half_length + s.turn_radius; }

// Laps differ by a small shift in the plane of the loop; height stays zero.
Vec3 lap_offset(const SceneConfig& s, std::mt19937_64& rng) {
  const double j = s.lap_jitter;
  if (j == 0.0) return Vec3::Zero();
  const double dx = uniform(rng, -j, j);
  return Vec3(dx, uniform(rng, -j, j), 0.0);
}

}  // namespace

nlohmann::json Split::to_json() const {
  return {{"train_begin", train_begin}, {"train_count", train_count}, {"calib_begin", calib_begin},
          {"calib_count", calib_count}, {"test_begin", test_begin},   {"test_count", test_count}};
}

Split Split::from_json(const nlohmann::json& j) {
  Split s;
  s.train_begin = j.at("train_begin");
  s.train_count = j.at("train_count");
  s.calib_begin = j.at("calib_begin");
  s.calib_count = j.at("calib_count");
  s.test_begin = j.at("test_begin");
  s.test_count = j.at("test_count");
  return s;
}

Split make_split(std::size_t length, double train, double calib) {
  const auto n = static_cast<double>(length);
  Split s;
  s.train_count = static_cast<std::size_t>(std::llround(train * n));
  s.calib_count = static_cast<std::size_t>(std::llround(calib * n));
  require(s.train_count >= 1 && s.calib_count >= 1 && s.train_count + s.calib_count < length,
          "split leaves an empty block");
  s.calib_begin = s.train_count;
  s.test_begin = s.train_count + s.calib_count;
  s.test_count = length - s.test_begin;
  return s;
}

LoopPath LoopPath::sample(const SceneConfig& scene, std::mt19937_64& rng) {
  LoopPath p;
  p.scene_ = scene;
  p.knot_spacing_ = 0.75;
  const double reach = x_extent(scene) + 2.0 * scene.lap_jitter + p.knot_spacing_;
  p.knot_start_ = -reach;
  const auto knots = static_cast<std::size_t>(std::ceil(2.0 * reach / p.knot_spacing_)) + 1;
  std::normal_distribution<double> axis(0.0, 1.0);
  for (std::size_t k = 0; k < knots; ++k) {
    const Vec3 a(axis(rng), axis(rng), axis(rng));
    p.keyframes_.push_back(quat_from_axis_angle(a, uniform(rng, 0.0, 0.08)));
  }
  return p;
}

Pose LoopPath::at(double s, const Vec3& offset) const {
  const auto& c = scene_;
  const double lap = c.frames_per_lap;
  const double turn = lap / 6.0;  // frames per turn
  const double lane = lap / 3.0;  // frames per lane
  const double a = c.lane_half_length, b = c.turn_radius, h = c.lane_offset;
  // Every segment is sampled at the midpoints of its frame slots, so lane A
  // and lane B visit the same x values. A lap starts halfway through the −x
  // turn, far from both lanes.
  s = std::fmod(std::fmod(s + 0.5 * turn, lap) + lap, lap);

  double x = 0.0, y = 0.0;
  if (s < turn) {  // −x turn, lane B end → lane A start
    const double phi = kPi * (s + 0.5) / turn;
    x = -a - b * std::sin(phi);
    y = 0.5 * h + 0.5 * h * std::cos(phi);
  } else if (s < turn + lane) {
    x = -a + 2.0 * a * (s - turn + 0.5) / lane;
  } else if (s < 2.0 * turn + lane) {  // +x turn, lane A end → lane B start
    const double phi = kPi * (s - turn - lane + 0.5) / turn;
    x = a + b * std::sin(phi);
    y = 0.5 * h - 0.5 * h * std::cos(phi);
  } else {
    x = a - 2.0 * a * (s - 2.0 * turn - lane + 0.5) / lane;
    y = h;
  }
  x += offset.x();
  y += offset.y();
  const double z = offset.z();

  const double u = std::clamp((x - knot_start_) / knot_spacing_, 0.0, static_cast<double>(keyframes_.size() - 1));
  const auto k = std::min(static_cast<std::size_t>(u), keyframes_.size() - 2);
  const Quaternion q = slerp(keyframes_[k], keyframes_[k + 1], u - static_cast<double>(k));
  return Pose(Vec3(x, y, z), q);
}

nlohmann::json LoopPath::to_json() const {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& q : keyframes_) keys.push_back({q.w, q.x, q.y, q.z});
  return {{"scene", scene_.to_json()},
          {"knot_start", knot_start_},
          {"knot_spacing", knot_spacing_},
          {"keyframes", keys}};
}

LoopPath LoopPath::from_json(const nlohmann::json& j) {
  LoopPath p;
  p.scene_ = SceneConfig::from_json(j.at("scene"));
  p.knot_start_ = j.at("knot_start");
  p.knot_spacing_ = j.at("knot_spacing");
  for (const auto& q : j.at("keyframes")) {
    p.keyframes_.push_back(normalized(Quaternion{q.at(0), q.at(1), q.at(2), q.at(3)}));
  }
  require(p.keyframes_.size() >= 2, "loop path needs at least two orientation keyframes");
  return p;
}

SyntheticScene make_scene(const SceneConfig& config, std::mt19937_64& rng) {
  SyntheticScene scene;
  scene.height = config.height;
  scene.width = config.width;
  scene.intrinsics = Intrinsics{config.focal, config.focal, 0.5 * (config.width - 1), 0.5 * (config.height - 1)};

  // Footprint of the widest view plus slack for wiggle, jitter and rotation.
  const double reach_x = config.depth_far * 0.5 * config.width / config.focal + 1.0;
  const double reach_y = config.depth_far * 0.5 * config.height / config.focal + 1.0;
  const double x_lo = -x_extent(config) - reach_x, x_hi = x_extent(config) + reach_x;
  const double y_lo = -reach_y, y_hi = config.lane_offset + reach_y;
  const double period = config.lane_offset;

  auto draw = [&](double ylo, double yhi) {
    const auto n = static_cast<std::size_t>(std::llround(config.landmark_density * (x_hi - x_lo) * (yhi - ylo)));
    std::vector<Landmark> out;
    for (std::size_t i = 0; i < n; ++i) {
      Landmark l;
      l.position = Vec3(uniform(rng, x_lo, x_hi), uniform(rng, ylo, yhi),
                        uniform(rng, config.depth_near, config.depth_far));
      l.dark = uniform(rng, 0.0, 0.35);
      l.light = uniform(rng, 0.65, 1.0);
      out.push_back(l);
    }
    return out;
  };

  if (config.symmetric) {
    const auto tile = draw(0.0, period);
    const auto k_lo = static_cast<long>(std::floor(y_lo / period));
    const auto k_hi = static_cast<long>(std::ceil(y_hi / period));
    for (long k = k_lo; k <= k_hi; ++k) {
      for (Landmark l : tile) {
        l.position.y() += static_cast<double>(k) * period;
        scene.landmarks.push_back(l);
      }
    }
  } else {
    scene.landmarks = draw(y_lo, y_hi);
  }
  return scene;
}

nlohmann::json World::to_json() const {
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& p : trajectory) {
    const auto v = p.pose.to_vector();
    traj.push_back({{"frame", p.frame}, {"pose", v}});
  }
  return {{"format", "convo.world"},
          {"version", 1},
          {"scene", scene.to_json()},
          {"path", path.to_json()},
          {"trajectory", traj},
          {"split", split.to_json()}};
}

World World::from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "convo.world", "not a convo.world document");
  World w;
  w.scene = SyntheticScene::from_json(j.at("scene"));
  w.path = LoopPath::from_json(j.at("path"));
  for (const auto& p : j.at("trajectory")) {
    w.trajectory.push_back(p.at("frame").get<std::int64_t>(), Pose::from_vector(p.at("pose").get<std::array<double, 7>>()));
  }
  w.split = Split::from_json(j.at("split"));
  require(w.split.test_begin + w.split.test_count == w.trajectory.size(), "split does not match trajectory");
  for (const auto& p : w.trajectory) w.frames.push_back(render(w.scene, p.pose));
  return w;
}

World generate_world(const ExperimentConfig& config) {
  config.validate();
  std::mt19937_64 path_rng(config.seed ^ kPathStream);
  std::mt19937_64 scene_rng(config.seed ^ kSceneStream);
  std::mt19937_64 lap_rng(config.seed ^ kLapStream);

  World w;
  w.path = LoopPath::sample(config.scene, path_rng);
  w.scene = make_scene(config.scene, scene_rng);
  w.split = make_split(static_cast<std::size_t>(config.trajectory_length), config.train_split, config.calib_split);

  const int per_lap = config.scene.frames_per_lap;
  Vec3 offset = Vec3::Zero();
  for (int i = 0; i < config.trajectory_length; ++i) {
    if (i % per_lap == 0) offset = lap_offset(config.scene, lap_rng);
    const Pose pose = w.path.at(static_cast<double>(i % per_lap), offset);
    const std::size_t visible = count_visible(w.scene, pose);
    if (visible < kMinVisibleLandmarks) {
      fail(ErrorCode::kGeneration, "frame " + std::to_string(i) + " sees only " + std::to_string(visible) +
                                       " landmarks; increase landmark_density");
    }
    w.trajectory.push_back(i, pose);
    w.frames.push_back(render(w.scene, pose));
  }
  return w;
}

Pose sample_loop_pose(const LoopPath& path, std::mt19937_64& rng) {
  const double s = uniform(rng, 0.0, static_cast<double>(path.scene().frames_per_lap));
  return path.at(s, lap_offset(path.scene(), rng));
}

}  // namespace convo
