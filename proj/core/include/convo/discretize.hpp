#pragma once

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convo/geometry.hpp"

namespace convo {

inline constexpr std::size_t kPoseDims = 7;
inline constexpr std::array<std::string_view, kPoseDims> kPoseDimNames = {"x",  "y",  "z", "qw",
                                                                          "qx", "qy", "qz"};

/// Half-width of the single class used for a constant dimension.
inline constexpr double kDegenerateHalfWidth = 1e-6;

/// Closed-open interval [lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return lo <= v && v < hi; }
  bool operator==(const Interval&) const = default;
};

/// Boundaries of one dimension. `boundaries` has class_count() + 1 strictly
/// increasing entries.
struct DimensionBins {
  std::string name;
  std::vector<double> boundaries;
  /// Nominal quantile class (0..K-1) -> merged class after tie collapse.
  std::vector<std::size_t> nominal_to_class;
  bool degenerate = false;

  std::size_t class_count() const { return boundaries.size() - 1; }
  /// Index i with boundaries[i] <= v < boundaries[i+1], clamped to the range.
  std::size_t encode(double v) const;
  Interval interval(std::size_t cls) const;
};

/// Linear interpolation between order statistics: position h = (n − 1)·p in
/// the sorted sample, value = s[⌊h⌋] + (h − ⌊h⌋)(s[⌊h⌋+1] − s[⌊h⌋]).
double empirical_quantile(std::span<const double> sorted, double p);

/// K-quantile boundaries of one dimension, with tied boundaries merged and a
/// constant dimension collapsed to [v − ε, v + ε].
DimensionBins fit_dimension(std::span<const double> values, std::size_t k, std::string name = {});

struct ClassLabel {
  std::vector<std::size_t> classes;
  bool operator==(const ClassLabel&) const = default;
};

class QuantileGrid {
 public:
  QuantileGrid() = default;
  QuantileGrid(std::size_t k, std::vector<DimensionBins> dims);

  std::size_t k() const { return k_; }
  std::size_t dims() const { return dims_.size(); }
  const DimensionBins& dim(std::size_t d) const { return dims_[d]; }
  std::vector<std::size_t> class_counts() const;

  ClassLabel encode_values(std::span<const double> values) const;
  ClassLabel encode(const Pose& pose) const;
  /// Throws kInvalidInput on a wrong dimension count or out-of-range class.
  std::vector<Interval> decode(const ClassLabel& label) const;

  nlohmann::json to_json() const;
  static QuantileGrid from_json(const nlohmann::json& j);

 private:
  std::size_t k_ = 0;
  std::vector<DimensionBins> dims_;
};

/// Grid over the seven pose dimensions of `training`. Throws kInvalidInput when
/// K < 2 or the trajectory has fewer than K distinct poses.
QuantileGrid fit_grid(const Trajectory& training, std::size_t k);

/// Same, over arbitrary columns of values (one vector per dimension).
QuantileGrid fit_grid_values(const std::vector<std::vector<double>>& columns, std::size_t k,
                             const std::vector<std::string>& names = {});

ClassLabel encode(const Pose& pose, const QuantileGrid& grid);
std::vector<Interval> decode(const ClassLabel& label, const QuantileGrid& grid);

}  // namespace convo
