#include "convo/frame.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "convo/error.hpp"

namespace convo {

Frame::Frame(int height, int width, double fill) : height_(height), width_(width) {
  require(height >= kMinSide && width >= kMinSide, "frame sides must be at least 32 pixels");
  fill = std::isfinite(fill) ? std::clamp(fill, 0.0, 1.0) : 0.0;
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

void Frame::set(int row, int col, double value) {
  data_[index(row, col)] = std::isfinite(value) ? std::clamp(value, 0.0, 1.0) : 0.0;
}

double Frame::sample(double row, double col) const {
  row = std::clamp(row, 0.0, static_cast<double>(height_ - 1));
  col = std::clamp(col, 0.0, static_cast<double>(width_ - 1));
  const int r0 = std::min(static_cast<int>(row), height_ - 2);
  const int c0 = std::min(static_cast<int>(col), width_ - 2);
  const double fr = row - r0, fc = col - c0;
  const double* p = data_.data() + index(r0, c0);
  const double top = p[0] + fc * (p[1] - p[0]);
  const double bottom = p[width_] + fc * (p[width_ + 1] - p[width_]);
  return top + fr * (bottom - top);
}

Frame add_gaussian_noise(const Frame& frame, double sigma, std::mt19937_64& rng) {
  require(sigma >= 0.0, "noise sigma must be non-negative");
  if (sigma == 0.0) return frame;
  std::normal_distribution<double> noise(0.0, sigma);
  Frame out = frame;
  for (int r = 0; r < frame.height(); ++r) {
    for (int c = 0; c < frame.width(); ++c) out.set(r, c, frame.at(r, c) + noise(rng));
  }
  return out;
}

void write_pgm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  for (double v : frame.data()) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

Frame read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || maxval <= 0 || maxval > 255) {
    fail(ErrorCode::kIo, path.string() + " is not an 8-bit binary PGM");
  }
  in.get();
  Frame frame(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const int byte = in.get();
      if (byte == std::char_traits<char>::eof()) fail(ErrorCode::kIo, "truncated PGM " + path.string());
      frame.set(r, c, static_cast<double>(byte) / maxval);
    }
  }
  return frame;
}

}  // namespace convo
