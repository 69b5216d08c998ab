#include "convo/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <tuple>

#include "convo/error.hpp"

namespace convo {

void Intrinsics::validate(int height, int width) const {
  require(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
  require(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height,
          "principal point must lie inside the image");
}

Eigen::Vector2d Intrinsics::project(const Vec3& p) const {
  return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
}

Vec3 Intrinsics::normalize(const Eigen::Vector2d& pixel) const {
  return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0};
}

nlohmann::json SyntheticScene::to_json() const {
  nlohmann::json lms = nlohmann::json::array();
  for (const auto& l : landmarks) {
    lms.push_back({l.position.x(), l.position.y(), l.position.z(), l.dark, l.light});
  }
  return {{"format", "convo.scene"},
          {"version", 1},
          {"intrinsics", {{"fx", intrinsics.fx}, {"fy", intrinsics.fy}, {"cx", intrinsics.cx}, {"cy", intrinsics.cy}}},
          {"height", height},
          {"width", width},
          {"background", background},
          {"patch_cells", patch_cells},
          {"cell_pixels", cell_pixels},
          {"near_plane", near_plane},
          {"landmarks", lms}};
}

SyntheticScene SyntheticScene::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "convo.scene" && j.at("version") == 1, "unsupported scene document");
    SyntheticScene s;
    const auto& in = j.at("intrinsics");
    s.intrinsics = {in.at("fx"), in.at("fy"), in.at("cx"), in.at("cy")};
    s.height = j.at("height");
    s.width = j.at("width");
    s.background = j.at("background");
    s.patch_cells = j.at("patch_cells");
    s.cell_pixels = j.at("cell_pixels");
    s.near_plane = j.at("near_plane");
    for (const auto& l : j.at("landmarks")) {
      s.landmarks.push_back({Vec3(l.at(0), l.at(1), l.at(2)), l.at(3), l.at(4)});
    }
    s.intrinsics.validate(s.height, s.width);
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed scene: ") + e.what());
  }
}

Vec3 world_to_camera(const Pose& pose, const Vec3& world) {
  return pose.rotation().matrix() * (world - pose.position());
}

namespace {

std::optional<Eigen::Vector2d> project_with(const SyntheticScene& scene, const Mat3& r,
                                            const Vec3& center, const Vec3& world, double* depth) {
  const Vec3 pc = r * (world - center);
  if (pc.z() <= scene.near_plane) return std::nullopt;
  const Eigen::Vector2d px = scene.intrinsics.project(pc);
  if (px.x() < 0.0 || px.x() > scene.width - 1 || px.y() < 0.0 || px.y() > scene.height - 1) {
    return std::nullopt;
  }
  if (depth) *depth = pc.z();
  return px;
}

}  // namespace

std::optional<Eigen::Vector2d> project_visible(const SyntheticScene& scene, const Pose& pose,
                                               const Vec3& world) {
  return project_with(scene, pose.rotation().matrix(), pose.position(), world, nullptr);
}

std::size_t count_visible(const SyntheticScene& scene, const Pose& pose) {
  const Mat3 r = pose.rotation().matrix();
  std::size_t n = 0;
  for (const auto& l : scene.landmarks) {
    if (project_with(scene, r, pose.position(), l.position, nullptr)) ++n;
  }
  return n;
}

Frame render(const SyntheticScene& scene, const Pose& pose) {
  scene.intrinsics.validate(scene.height, scene.width);
  const Mat3 r = pose.rotation().matrix();

  struct Stamp {
    double depth;
    std::size_t index;
    Eigen::Vector2d pixel;
  };
  std::vector<Stamp> stamps;
  for (std::size_t i = 0; i < scene.landmarks.size(); ++i) {
    double depth = 0.0;
    if (auto px = project_with(scene, r, pose.position(), scene.landmarks[i].position, &depth)) {
      stamps.push_back({depth, i, *px});
    }
  }
  if (stamps.size() < 8) {
    fail(ErrorCode::kDegenerateView,
         "only " + std::to_string(stamps.size()) + " landmarks visible (need 8)");
  }
  std::sort(stamps.begin(), stamps.end(), [](const Stamp& a, const Stamp& b) {
    return std::tie(b.depth, a.index) < std::tie(a.depth, b.index);
  });

  Frame frame(scene.height, scene.width, scene.background);
  const int side = scene.patch_cells * scene.cell_pixels;
  const double half = 0.5 * side;
  auto texel = [&](const Landmark& l, int ti, int tj) {
    const int parity = (ti / scene.cell_pixels + tj / scene.cell_pixels) % 2;
    return parity == 0 ? l.dark : l.light;
  };

  for (const auto& s : stamps) {
    const Landmark& l = scene.landmarks[s.index];
    // Texel (ti, tj) is centered at pixel − (u − half − 0.5 + tj, v − half − 0.5 + ti).
    const double u0 = s.pixel.x() - half + 0.5;
    const double v0 = s.pixel.y() - half + 0.5;
    const int rmin = std::max(0, static_cast<int>(std::floor(v0)) - 1);
    const int rmax = std::min(scene.height - 1, static_cast<int>(std::ceil(v0 + side)) + 1);
    const int cmin = std::max(0, static_cast<int>(std::floor(u0)) - 1);
    const int cmax = std::min(scene.width - 1, static_cast<int>(std::ceil(u0 + side)) + 1);
    for (int row = rmin; row <= rmax; ++row) {
      const double ty = row - v0;
      const int ti0 = static_cast<int>(std::floor(ty));
      const double fy = ty - ti0;
      for (int col = cmin; col <= cmax; ++col) {
        const double tx = col - u0;
        const int tj0 = static_cast<int>(std::floor(tx));
        const double fx = tx - tj0;
        double coverage = 0.0, value = 0.0;
        for (int di = 0; di < 2; ++di) {
          const int ti = ti0 + di;
          if (ti < 0 || ti >= side) continue;
          const double wy = di == 0 ? 1.0 - fy : fy;
          for (int dj = 0; dj < 2; ++dj) {
            const int tj = tj0 + dj;
            if (tj < 0 || tj >= side) continue;
            const double w = wy * (dj == 0 ? 1.0 - fx : fx);
            coverage += w;
            value += w * texel(l, ti, tj);
          }
        }
        if (coverage > 0.0) frame.set(row, col, (1.0 - coverage) * frame.at(row, col) + value);
      }
    }
  }
  return frame;
}

}  // namespace convo
