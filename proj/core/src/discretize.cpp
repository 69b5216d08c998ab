#include "convo/discretize.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "convo/error.hpp"

namespace convo {

std::size_t DimensionBins::encode(double v) const {
  // upper_bound gives the first boundary > v, so boundary[i] <= v < boundary[i+1].
  const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), v);
  const auto pos = static_cast<std::size_t>(it - boundaries.begin());
  if (pos == 0) return 0;
  return std::min(pos - 1, class_count() - 1);
}

Interval DimensionBins::interval(std::size_t cls) const {
  require(cls < class_count(), "class index out of range for dimension " + name);
  return {boundaries[cls], boundaries[cls + 1]};
}

double empirical_quantile(std::span<const double> sorted, double p) {
  require(!sorted.empty(), "quantile of an empty sample");
  require(p >= 0.0 && p <= 1.0, "quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

DimensionBins fit_dimension(std::span<const double> values, std::size_t k, std::string name) {
  require(k >= 2, "class count K must be at least 2");
  require(!values.empty(), "cannot discretize an empty dimension");
  for (double v : values) require(std::isfinite(v), "non-finite training value in dimension " + name);

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  DimensionBins bins;
  bins.name = std::move(name);
  if (sorted.front() == sorted.back()) {
    const double v = sorted.front();
    bins.boundaries = {v - kDegenerateHalfWidth, v + kDegenerateHalfWidth};
    bins.nominal_to_class.assign(k, 0);
    bins.degenerate = true;
    return bins;
  }

  bins.nominal_to_class.resize(k);
  bins.boundaries.push_back(sorted.front());
  for (std::size_t i = 1; i <= k; ++i) {
    const double b = i == k ? sorted.back()
                            : empirical_quantile(sorted, static_cast<double>(i) / static_cast<double>(k));
    // A tied boundary folds nominal class i-1 into the previous merged class,
    // or into the first one when nothing has been emitted yet.
    if (b > bins.boundaries.back()) bins.boundaries.push_back(b);
    bins.nominal_to_class[i - 1] = bins.boundaries.size() >= 2 ? bins.boundaries.size() - 2 : 0;
  }
  return bins;
}

QuantileGrid::QuantileGrid(std::size_t k, std::vector<DimensionBins> dims)
    : k_(k), dims_(std::move(dims)) {
  require(k_ >= 2, "class count K must be at least 2");
  for (const auto& d : dims_) {
    require(d.boundaries.size() >= 2, "dimension " + d.name + " needs at least two boundaries");
    require(std::adjacent_find(d.boundaries.begin(), d.boundaries.end(),
                               [](double a, double b) { return !(a < b); }) == d.boundaries.end(),
            "boundaries of dimension " + d.name + " must be strictly increasing");
    require(d.class_count() <= k_, "dimension " + d.name + " has more classes than K");
  }
}

std::vector<std::size_t> QuantileGrid::class_counts() const {
  std::vector<std::size_t> out;
  out.reserve(dims_.size());
  for (const auto& d : dims_) out.push_back(d.class_count());
  return out;
}

ClassLabel QuantileGrid::encode_values(std::span<const double> values) const {
  require(values.size() == dims_.size(), "value count does not match grid dimensions");
  ClassLabel label;
  label.classes.reserve(dims_.size());
  for (std::size_t d = 0; d < dims_.size(); ++d) label.classes.push_back(dims_[d].encode(values[d]));
  return label;
}

ClassLabel QuantileGrid::encode(const Pose& pose) const {
  const auto v = pose.to_vector();
  return encode_values(v);
}

std::vector<Interval> QuantileGrid::decode(const ClassLabel& label) const {
  require(label.classes.size() == dims_.size(), "label dimension count does not match grid");
  std::vector<Interval> out;
  out.reserve(dims_.size());
  for (std::size_t d = 0; d < dims_.size(); ++d) out.push_back(dims_[d].interval(label.classes[d]));
  return out;
}

nlohmann::json QuantileGrid::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : dims_) {
    dims.push_back({{"name", d.name},
                    {"boundaries", d.boundaries},
                    {"nominal_to_class", d.nominal_to_class},
                    {"degenerate", d.degenerate}});
  }
  return {{"format", "convo.quantile_grid"}, {"version", 1}, {"K", k_}, {"dimensions", dims}};
}

QuantileGrid QuantileGrid::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "convo.quantile_grid" && j.at("version") == 1,
            "unsupported quantile grid document");
    std::vector<DimensionBins> dims;
    for (const auto& jd : j.at("dimensions")) {
      DimensionBins d;
      d.name = jd.at("name").get<std::string>();
      d.boundaries = jd.at("boundaries").get<std::vector<double>>();
      d.nominal_to_class = jd.at("nominal_to_class").get<std::vector<std::size_t>>();
      d.degenerate = jd.at("degenerate").get<bool>();
      dims.push_back(std::move(d));
    }
    return QuantileGrid(j.at("K").get<std::size_t>(), std::move(dims));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed quantile grid: ") + e.what());
  }
}

QuantileGrid fit_grid_values(const std::vector<std::vector<double>>& columns, std::size_t k,
                             const std::vector<std::string>& names) {
  require(k >= 2, "class count K must be at least 2");
  require(!columns.empty(), "no dimensions to discretize");
  std::vector<DimensionBins> dims;
  for (std::size_t d = 0; d < columns.size(); ++d) {
    dims.push_back(fit_dimension(columns[d], k, d < names.size() ? names[d] : "d" + std::to_string(d)));
  }
  return QuantileGrid(k, std::move(dims));
}

QuantileGrid fit_grid(const Trajectory& training, std::size_t k) {
  require(k >= 2, "class count K must be at least 2");
  std::set<std::array<double, kPoseDims>> distinct;
  std::vector<std::vector<double>> columns(kPoseDims);
  for (const auto& p : training) {
    const auto v = p.pose.to_vector();
    distinct.insert(v);
    for (std::size_t d = 0; d < kPoseDims; ++d) columns[d].push_back(v[d]);
  }
  require(distinct.size() >= k, "training trajectory has fewer than K distinct poses");
  return fit_grid_values(columns, k, {kPoseDimNames.begin(), kPoseDimNames.end()});
}

ClassLabel encode(const Pose& pose, const QuantileGrid& grid) { return grid.encode(pose); }

std::vector<Interval> decode(const ClassLabel& label, const QuantileGrid& grid) {
  return grid.decode(label);
}

}  // namespace convo
