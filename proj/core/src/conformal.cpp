#include "convo/conformal.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "convo/error.hpp"

namespace convo {

std::size_t conformal_rank(std::size_t n, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "miscoverage alpha must lie in (0, 1)");
  const double x = static_cast<double>(n + 1) * (1.0 - alpha);
  // Guard against (n+1)(1−α) landing a rounding error above an integer.
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

double conformal_quantile(std::span<const double> scores, double alpha) {
  require(!scores.empty(), "conformal quantile of an empty calibration set");
  const std::size_t rank = conformal_rank(scores.size(), alpha);
  if (rank > scores.size()) return 1.0;
  std::vector<double> sorted(scores.begin(), scores.end());
  const auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(rank, 1) - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return std::clamp(*nth, 0.0, 1.0);
}

CalibratedModel calibrate(const MultiHeadModel& model, const QuantileGrid& grid,
                          const Eigen::MatrixXd& calib_features, std::span<const ClassLabel> calib_labels,
                          double alpha) {
  require(calib_features.rows() > 0, "calibration set is empty");
  require(static_cast<std::size_t>(calib_features.rows()) == calib_labels.size(),
          "calibration features and labels must have equal length");
  require(alpha > 0.0 && alpha < 1.0, "miscoverage alpha must lie in (0, 1)");
  require(model.class_counts() == grid.class_counts(), "model heads do not match the quantile grid");

  CalibratedModel cal;
  cal.model = model;
  cal.grid = grid;
  cal.record.n = calib_labels.size();
  cal.record.alpha = alpha;
  const auto heads = model.heads();
  cal.qhat.assign(heads, 0.0);
  cal.excluded.assign(heads, false);
  cal.record.scores.assign(heads, {});

  const auto probs = model.predict_scores_batch(calib_features);
  for (std::size_t h = 0; h < heads; ++h) {
    if (model.constant_class(h)) {
      cal.excluded[h] = true;
      continue;
    }
    auto& s = cal.record.scores[h];
    s.reserve(calib_labels.size());
    for (std::size_t i = 0; i < calib_labels.size(); ++i) {
      require(calib_labels[i].classes.size() == heads, "calibration label has the wrong number of heads");
      const auto cls = static_cast<Eigen::Index>(calib_labels[i].classes[h]);
      s.push_back(std::clamp(1.0 - probs[h](static_cast<Eigen::Index>(i), cls), 0.0, 1.0));
    }
    cal.qhat[h] = conformal_quantile(s, alpha);
  }
  return cal;
}

nlohmann::json CalibratedModel::to_json() const {
  return {{"format", "convo.calibrated"},
          {"version", 1},
          {"alpha", record.alpha},
          {"n", record.n},
          {"rank", conformal_rank(record.n, record.alpha)},
          {"qhat", qhat},
          {"excluded", excluded},
          {"scores", record.scores},
          {"grid", grid.to_json()},
          {"model", model.to_json()}};
}

CalibratedModel CalibratedModel::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "convo.calibrated" && j.at("version") == 1, "unsupported calibrated model document");
    CalibratedModel c;
    c.record.alpha = j.at("alpha");
    c.record.n = j.at("n");
    c.qhat = j.at("qhat").get<std::vector<double>>();
    c.excluded = j.at("excluded").get<std::vector<bool>>();
    c.record.scores = j.at("scores").get<std::vector<std::vector<double>>>();
    c.grid = QuantileGrid::from_json(j.at("grid"));
    c.model = MultiHeadModel::from_json(j.at("model"));
    require(c.qhat.size() == c.model.heads() && c.excluded.size() == c.model.heads(),
            "calibrated model head count mismatch");
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed calibrated model: ") + e.what());
  }
}

bool PredictionSet::any_fallback() const {
  return std::any_of(fallback.begin(), fallback.end(), [](bool b) { return b; });
}

bool PredictionSet::contains(const ClassLabel& label) const {
  if (label.classes.size() != classes.size()) return false;
  for (std::size_t h = 0; h < classes.size(); ++h) {
    if (!std::binary_search(classes[h].begin(), classes[h].end(), label.classes[h])) return false;
  }
  return true;
}

PredictionSet predict_set_from_scores(const HeadScores& scores, std::span<const double> qhat,
                                      const std::vector<bool>& excluded) {
  require(scores.size() == qhat.size(), "one threshold per head required");
  PredictionSet set;
  set.scores = scores;
  set.classes.resize(scores.size());
  set.fallback.assign(scores.size(), false);
  for (std::size_t h = 0; h < scores.size(); ++h) {
    const auto& p = scores[h];
    require(p.size() > 0, "head has no classes");
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    if (h < excluded.size() && excluded[h]) {
      set.classes[h] = {static_cast<std::size_t>(best)};
      continue;
    }
    const double threshold = 1.0 - qhat[h];
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (p(k) > threshold) set.classes[h].push_back(static_cast<std::size_t>(k));
    }
    if (set.classes[h].empty()) {
      set.classes[h] = {static_cast<std::size_t>(best)};
      set.fallback[h] = true;
    }
  }
  return set;
}

PredictionSet predict_set(const CalibratedModel& cal, const FeatureVector& feature) {
  return predict_set_from_scores(cal.model.predict_scores(feature), cal.qhat, cal.excluded);
}

std::vector<PredictionSet> predict_sets(const CalibratedModel& cal, const Eigen::MatrixXd& features) {
  const auto probs = cal.model.predict_scores_batch(features);
  std::vector<PredictionSet> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    HeadScores s;
    for (const auto& m : probs) s.push_back(m.row(i).transpose());
    out.push_back(predict_set_from_scores(s, cal.qhat, cal.excluded));
  }
  return out;
}

UncertaintyRegion::UncertaintyRegion(std::vector<std::vector<RegionInterval>> dims) : dims_(std::move(dims)) {
  for (const auto& d : dims_) {
    require(!d.empty(), "every region dimension needs at least one interval");
    for (std::size_t i = 1; i < d.size(); ++i) {
      require(d[i - 1].bounds.hi < d[i].bounds.lo, "region intervals must be sorted, disjoint and non-touching");
    }
  }
}

std::uint64_t UncertaintyRegion::cuboid_count() const {
  std::uint64_t n = dims_.empty() ? 0 : 1;
  for (const auto& d : dims_) n *= d.size();
  return n;
}

std::vector<std::size_t> UncertaintyRegion::cuboid(std::uint64_t index) const {
  require(index < cuboid_count(), "cuboid index out of range");
  std::vector<std::size_t> out(dims_.size());
  for (std::size_t d = dims_.size(); d-- > 0;) {
    out[d] = static_cast<std::size_t>(index % dims_[d].size());
    index /= dims_[d].size();
  }
  return out;
}

double UncertaintyRegion::measure(std::size_t d) const {
  double total = 0.0;
  for (const auto& iv : dims_[d]) total += iv.bounds.width();
  return total;
}

nlohmann::json UncertaintyRegion::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : dims_) {
    nlohmann::json ivs = nlohmann::json::array();
    for (const auto& iv : d) {
      ivs.push_back({{"lo", iv.bounds.lo}, {"hi", iv.bounds.hi}, {"mass", iv.mass},
                     {"classes", {iv.first_class, iv.last_class}}});
    }
    dims.push_back(ivs);
  }
  return {{"dimensions", dims}, {"cuboids", cuboid_count()}};
}

UncertaintyRegion to_region(const PredictionSet& set, const QuantileGrid& grid) {
  require(set.classes.size() == grid.dims(), "prediction set does not match the grid");
  std::vector<std::vector<RegionInterval>> dims(grid.dims());
  for (std::size_t d = 0; d < grid.dims(); ++d) {
    const auto& bins = grid.dim(d);
    const bool has_scores = d < set.scores.size();
    for (std::size_t cls : set.classes[d]) {
      require(cls < bins.class_count(), "prediction set class out of range");
      const double mass = has_scores ? set.scores[d](static_cast<Eigen::Index>(cls)) : 0.0;
      auto& ivs = dims[d];
      if (!ivs.empty() && ivs.back().last_class + 1 == cls) {
        ivs.back().bounds.hi = bins.boundaries[cls + 1];
        ivs.back().last_class = cls;
        ivs.back().mass += mass;
      } else {
        ivs.push_back({bins.interval(cls), mass, cls, cls});
      }
    }
  }
  return UncertaintyRegion(std::move(dims));
}

nlohmann::json region_report(const UncertaintyRegion& region, const PredictionSet& set,
                             const CalibratedModel& cal) {
  nlohmann::json j = region.to_json();
  j["alpha"] = cal.alpha();
  j["qhat"] = cal.qhat;
  j["fallback"] = set.fallback;
  nlohmann::json names = nlohmann::json::array();
  for (std::size_t d = 0; d < cal.grid.dims(); ++d) names.push_back(cal.grid.dim(d).name);
  j["names"] = names;
  return j;
}

std::vector<double> coverage_audit(const CalibratedModel& cal, const Eigen::MatrixXd& test_features,
                                   std::span<const ClassLabel> test_labels) {
  require(test_features.rows() > 0 && !test_labels.empty(), "coverage audit needs a non-empty test set");
  require(static_cast<std::size_t>(test_features.rows()) == test_labels.size(),
          "test features and labels must have equal length");
  const auto sets = predict_sets(cal, test_features);
  std::vector<double> covered(cal.model.heads(), 0.0);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t h = 0; h < covered.size(); ++h) {
      const auto& c = sets[i].classes[h];
      if (std::binary_search(c.begin(), c.end(), test_labels[i].classes[h])) covered[h] += 1.0;
    }
  }
  for (double& c : covered) c /= static_cast<double>(sets.size());
  return covered;
}

double mean_set_size(std::span<const PredictionSet> sets) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : sets) {
    for (const auto& c : s.classes) {
      total += static_cast<double>(c.size());
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace convo
