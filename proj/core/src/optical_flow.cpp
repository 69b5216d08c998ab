#include "convo/optical_flow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "convo/error.hpp"

namespace convo {

namespace {

struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> px;

  double at(int r, int c) const {
    return px[static_cast<std::size_t>(std::clamp(r, 0, h - 1)) * w + std::clamp(c, 0, w - 1)];
  }
  double sample(double r, double c) const {
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    const double fr = r - r0, fc = c - c0;
    const double top = at(r0, c0) + fc * (at(r0, c0 + 1) - at(r0, c0));
    const double bottom = at(r0 + 1, c0) + fc * (at(r0 + 1, c0 + 1) - at(r0 + 1, c0));
    return top + fr * (bottom - top);
  }
};

Image from_frame(const Frame& f) { return {f.height(), f.width(), f.data()}; }

// 5-tap binomial blur followed by 2x decimation.
Image pyr_down(const Image& src) {
  static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  Image dst{(src.h + 1) / 2, (src.w + 1) / 2, {}};
  dst.px.resize(static_cast<std::size_t>(dst.h) * dst.w);
  for (int r = 0; r < dst.h; ++r) {
    for (int c = 0; c < dst.w; ++c) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        for (int j = -2; j <= 2; ++j) acc += k[i + 2] * k[j + 2] * src.at(2 * r + i, 2 * c + j);
      }
      dst.px[static_cast<std::size_t>(r) * dst.w + c] = acc;
    }
  }
  return dst;
}

std::vector<Image> pyramid(const Frame& f, int levels) {
  std::vector<Image> out{from_frame(f)};
  for (int l = 1; l < levels; ++l) {
    if (out.back().h < 16 || out.back().w < 16) break;
    out.push_back(pyr_down(out.back()));
  }
  return out;
}

}  // namespace

std::vector<TrackResult> lucas_kanade(const Frame& a, const Frame& b,
                                      const std::vector<Eigen::Vector2d>& points,
                                      const LucasKanadeParams& params) {
  require(a.height() == b.height() && a.width() == b.width(), "frames must have equal size");
  require(params.window >= 3 && params.window % 2 == 1, "LK window must be odd and >= 3");
  require(params.levels >= 1, "LK needs at least one pyramid level");

  const auto pa = pyramid(a, params.levels);
  const auto pb = pyramid(b, params.levels);
  const int levels = static_cast<int>(std::min(pa.size(), pb.size()));
  const int half = params.window / 2;
  const double area = static_cast<double>(params.window * params.window);

  std::vector<TrackResult> results;
  results.reserve(points.size());
  for (const auto& p : points) {
    TrackResult res;
    Eigen::Vector2d guess = Eigen::Vector2d::Zero();
    bool singular = false;
    for (int level = levels - 1; level >= 0 && !singular; --level) {
      const Image& ia = pa[level];
      const Image& ib = pb[level];
      const double scale = std::ldexp(1.0, -level);
      const Eigen::Vector2d pl = p * scale;

      // Template patch, gradients and normal matrix in frame A.
      std::vector<double> tmpl, gx, gy;
      tmpl.reserve(params.window * params.window);
      gx.reserve(tmpl.capacity());
      gy.reserve(tmpl.capacity());
      Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
          const double r = pl.y() + dy, c = pl.x() + dx;
          const double ix = 0.5 * (ia.sample(r, c + 1) - ia.sample(r, c - 1));
          const double iy = 0.5 * (ia.sample(r + 1, c) - ia.sample(r - 1, c));
          tmpl.push_back(ia.sample(r, c));
          gx.push_back(ix);
          gy.push_back(iy);
          g(0, 0) += ix * ix;
          g(0, 1) += ix * iy;
          g(1, 1) += iy * iy;
        }
      }
      g(1, 0) = g(0, 1);
      const double tr = g.trace(), det = g.determinant();
      const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
      if (min_eig / area < params.min_eigen_threshold) {
        // Only the finest level decides; coarse levels may blur texture away.
        if (level == 0) {
          singular = true;
          break;
        }
        guess *= 2.0;
        continue;
      }
      const Eigen::Matrix2d g_inv = g.inverse();

      Eigen::Vector2d nu = Eigen::Vector2d::Zero();
      for (int it = 0; it < params.max_iterations; ++it) {
        Eigen::Vector2d mismatch = Eigen::Vector2d::Zero();
        std::size_t i = 0;
        for (int dy = -half; dy <= half; ++dy) {
          for (int dx = -half; dx <= half; ++dx, ++i) {
            const double r = pl.y() + guess.y() + nu.y() + dy;
            const double c = pl.x() + guess.x() + nu.x() + dx;
            const double diff = tmpl[i] - ib.sample(r, c);
            mismatch.x() += diff * gx[i];
            mismatch.y() += diff * gy[i];
          }
        }
        const Eigen::Vector2d eta = g_inv * mismatch;
        nu += eta;
        if (eta.norm() < params.epsilon) break;
      }
      guess += nu;
      if (level > 0) guess *= 2.0;
    }

    res.displacement = guess;
    res.point = p + guess;
    if (singular) {
      res.status = TrackStatus::kSingular;
    } else if (!res.point.allFinite() || res.point.x() < 0.0 || res.point.y() < 0.0 ||
               res.point.x() > a.width() - 1 || res.point.y() > a.height() - 1) {
      res.status = TrackStatus::kLost;
    } else {
      const Image& ia = pa[0];
      const Image& ib = pb[0];
      double sum = 0.0;
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
          sum += std::abs(ia.sample(p.y() + dy, p.x() + dx) - ib.sample(res.point.y() + dy, res.point.x() + dx));
        }
      }
      res.residual = sum / area;
      res.status = res.residual > params.max_residual ? TrackStatus::kHighResidual : TrackStatus::kTracked;
    }
    results.push_back(res);
  }
  return results;
}

}  // namespace convo
