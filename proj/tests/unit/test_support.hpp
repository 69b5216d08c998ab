#pragma once

#include <cmath>
#include <random>

#include "convo/epipolar.hpp"
#include "convo/frame.hpp"
#include "convo/geometry.hpp"

namespace convo::test {

/// Smooth random texture sampled analytically, so that a shift by (dx, dy)
/// is exact: pixel (r, c) of the result shows the texture at (c − dx, r − dy).
inline Frame textured_frame(int height, int width, double dx, double dy, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.15, 0.5), phase(0.0, 6.283185307179586), amp(0.3, 1.0);
  struct Wave {
    double fu, fv, ph, a;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 12; ++i) {
    const double f = freq(rng), ang = phase(rng);
    waves.push_back({f * std::cos(ang), f * std::sin(ang), phase(rng), amp(rng)});
  }
  double power = 0.0;
  for (const Wave& w : waves) power += 0.5 * w.a * w.a;
  const double rms = std::sqrt(power);
  Frame out(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double u = c - dx, v = r - dy;
      double s = 0.0;
      for (const Wave& w : waves) s += w.a * std::sin(w.fu * u + w.fv * v + w.ph);
      out.set(r, c, 0.5 + 0.45 * std::tanh(1.5 * s / rms));
    }
  }
  return out;
}

struct Scenario {
  RelativeMotion motion;
  Correspondences corr;
};

/// Random rigid motion and points in front of both cameras, noiseless.
inline Scenario random_scenario(std::mt19937_64& rng, std::size_t points) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(-1.0, 1.0), depth(2.0, 8.0), angle(0.0, 0.5);
  Scenario s;
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  s.motion.rotation = quat_to_rotmat(quat_from_axis_angle(axis, angle(rng)));
  s.motion.translation = Vec3(n(rng), n(rng), n(rng)).normalized();
  const double scale = 0.5;
  std::vector<Vec3> x0, x1;
  while (x0.size() < points) {
    const Vec3 p(u(rng) * 2.0, u(rng) * 2.0, depth(rng));
    const Vec3 q = s.motion.rotation * p + scale * s.motion.translation;
    if (q.z() < 0.5) continue;
    x0.push_back(p / p.z());
    x1.push_back(q / q.z());
  }
  s.corr = Correspondences::from_normalized(x0, x1);
  return s;
}

}  // namespace convo::test
