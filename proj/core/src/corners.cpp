#include "convo/corners.hpp"

#include <algorithm>
#include <cmath>

#include "convo/error.hpp"

namespace convo {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& v : kernel) v /= sum;
  return kernel;
}

// Separable convolution with clamped borders.
std::vector<double> smooth(const std::vector<double>& src, int h, int w, const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * src[r * w + std::clamp(c + i, 0, w - 1)];
      }
      tmp[r * w + c] = acc;
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp[std::clamp(r + i, 0, h - 1) * w + c];
      }
      out[r * w + c] = acc;
    }
  }
  return out;
}

}  // namespace

std::vector<double> harris_response(const Frame& frame, const HarrisParams& params) {
  require(params.sigma > 0.0, "Harris smoothing sigma must be positive");
  const int h = frame.height(), w = frame.width();
  const auto n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  std::vector<double> ixx(n), iyy(n), ixy(n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double gx = 0.5 * (frame.at(r, std::min(c + 1, w - 1)) - frame.at(r, std::max(c - 1, 0)));
      const double gy = 0.5 * (frame.at(std::min(r + 1, h - 1), c) - frame.at(std::max(r - 1, 0), c));
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  }
  const auto kernel = gaussian_kernel(params.sigma);
  ixx = smooth(ixx, h, w, kernel);
  iyy = smooth(iyy, h, w, kernel);
  ixy = smooth(ixy, h, w, kernel);

  std::vector<double> response(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double det = ixx[i] * iyy[i] - ixy[i] * ixy[i];
    const double trace = ixx[i] + iyy[i];
    response[i] = det - params.k * trace * trace;
  }
  return response;
}

std::vector<Corner> harris_corners(const Frame& frame, int max_points, const HarrisParams& params) {
  if (max_points <= 0) return {};
  const int h = frame.height(), w = frame.width();
  const auto response = harris_response(frame, params);
  const double peak = *std::max_element(response.begin(), response.end());
  const double floor = std::max(params.absolute_floor, params.relative_floor * peak);

  auto at = [&](int r, int c) { return response[static_cast<std::size_t>(r) * w + c]; };
  std::vector<Corner> corners;
  const int rad = params.nms_radius;
  for (int r = params.border; r < h - params.border; ++r) {
    for (int c = params.border; c < w - params.border; ++c) {
      const double v = at(r, c);
      if (v <= floor) continue;
      bool is_max = true;
      for (int dr = -rad; dr <= rad && is_max; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= h) continue;
        for (int dc = -rad; dc <= rad; ++dc) {
          const int cc = c + dc;
          if (cc < 0 || cc >= w || (dr == 0 && dc == 0) || dr * dr + dc * dc > rad * rad) continue;
          const double o = at(rr, cc);
          // Plateaus keep only their first pixel in raster order.
          if (o > v || (o == v && (dr < 0 || (dr == 0 && dc < 0)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) corners.push_back({Eigen::Vector2d(c, r), v});
    }
  }
  std::stable_sort(corners.begin(), corners.end(),
                   [](const Corner& a, const Corner& b) { return a.response > b.response; });
  if (corners.size() > static_cast<std::size_t>(max_points)) corners.resize(max_points);
  return corners;
}

}  // namespace convo
