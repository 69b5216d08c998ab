#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace convo {

/// Grayscale image, row-major, intensities clamped to [0, 1].
class Frame {
 public:
  static constexpr int kMinSide = 32;

  Frame() = default;
  /// Throws kInvalidInput if either side is below kMinSide.
  Frame(int height, int width, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  double at(int row, int col) const { return data_[index(row, col)]; }
  /// Stores `value` clamped to [0, 1]; non-finite values become 0.
  void set(int row, int col, double value);
  const std::vector<double>& data() const { return data_; }

  /// Bilinear sample at (row, col) with edge clamping.
  double sample(double row, double col) const;

  bool operator==(const Frame&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Additive i.i.d. Gaussian pixel noise, clamped back to [0, 1].
[[nodiscard]] Frame add_gaussian_noise(const Frame& frame, double sigma, std::mt19937_64& rng);

/// Binary PGM (P5, 8-bit). Reading maps 0..maxval back onto [0, 1].
void write_pgm(const Frame& frame, const std::filesystem::path& path);
Frame read_pgm(const std::filesystem::path& path);

}  // namespace convo
