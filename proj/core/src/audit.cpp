#include "convo/audit.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "convo/conformal.hpp"
#include "convo/error.hpp"
#include "convo/pipeline.hpp"

namespace convo {

namespace {

struct Sample {
  Pose pose;
  Frame frame;
};

// Poses whose view is too sparse to render are redrawn.
std::vector<Sample> draw_samples(const World& world, std::size_t count, std::mt19937_64& rng) {
  std::vector<Sample> out;
  out.reserve(count);
  std::size_t attempts = 0;
  while (out.size() < count) {
    require(++attempts <= 20 * count + 100, "audit scene rejects too many poses");
    const Pose p = sample_loop_pose(world.path, rng);
    if (count_visible(world.scene, p) < kMinVisibleLandmarks) continue;
    out.push_back({p, render(world.scene, p)});
  }
  return out;
}

}  // namespace

bool AuditReport::passed() const {
  return std::all_of(heads.begin(), heads.end(), [](const HeadAudit& h) { return h.excluded || h.in_band; });
}

nlohmann::json AuditReport::to_json() const {
  nlohmann::json j;
  j["format"] = "convo.audit";
  j["version"] = 1;
  j["seed"] = seed;
  j["alpha"] = options.alpha;
  j["calib_size"] = options.calib_size;
  j["test_size"] = options.test_size;
  j["train_size"] = options.train_size;
  j["resplits"] = options.resplits;
  j["nominal"] = nominal;
  j["passed"] = passed();
  j["heads"] = nlohmann::json::array();
  for (const HeadAudit& h : heads) {
    j["heads"].push_back({{"name", h.name},
                          {"excluded", h.excluded},
                          {"mean", h.mean},
                          {"binomial_se", h.binomial_se},
                          {"empirical_se", h.empirical_se},
                          {"lower", h.lower},
                          {"upper", h.upper},
                          {"in_band", h.in_band}});
  }
  return j;
}

AuditReport run_audit(const ExperimentConfig& config, const AuditOptions& options) {
  require(options.alpha > 0.0 && options.alpha < 1.0, "alpha must lie in (0, 1)");
  require(options.calib_size > 0 && options.test_size > 0 && options.train_size > 0, "audit blocks must be non-empty");
  require(options.resplits > 0, "audit needs at least one resplit");
  config.validate();

  const World world = generate_world(config);
  const FeatureExtractor extractor(config.scene.height, config.scene.width, config.feature_grid, config.feature_grid);
  std::mt19937_64 rng(config.seed ^ 0xa0761d6478bd642fULL);

  const auto train = draw_samples(world, options.train_size, rng);
  Trajectory train_traj;
  std::vector<Frame> train_frames;
  for (std::size_t i = 0; i < train.size(); ++i) {
    train_traj.push_back(static_cast<std::int64_t>(i), train[i].pose);
    train_frames.push_back(train[i].frame);
  }
  const QuantileGrid grid = fit_grid(train_traj, static_cast<std::size_t>(config.classes));
  std::vector<ClassLabel> train_labels;
  for (const Sample& s : train) train_labels.push_back(grid.encode(s.pose));
  const ArmSettings settings = arm_settings(config, config.capacity, 1.0);
  const MultiHeadModel model =
      train_multihead(extractor.extract_all(train_frames), train_labels, grid.class_counts(), settings.training);

  const std::size_t pool_size = options.calib_size + options.test_size;
  const auto pool = draw_samples(world, pool_size, rng);
  std::vector<HeadScores> scores;
  std::vector<ClassLabel> labels;
  for (const Sample& s : pool) {
    scores.push_back(model.predict_scores(extractor.extract(s.frame)));
    labels.push_back(grid.encode(s.pose));
  }

  const std::size_t heads = grid.dims();
  std::vector<bool> excluded(heads);
  for (std::size_t h = 0; h < heads; ++h) excluded[h] = model.constant_class(h).has_value();

  std::vector<std::vector<double>> coverage(heads);
  std::vector<std::size_t> order(pool_size);
  std::vector<double> calib_scores(options.calib_size);
  std::vector<double> qhat(heads);
  for (std::size_t r = 0; r < options.resplits; ++r) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t h = 0; h < heads; ++h) {
      if (excluded[h]) continue;
      for (std::size_t i = 0; i < options.calib_size; ++i) {
        const std::size_t s = order[i];
        calib_scores[i] = 1.0 - scores[s][h](static_cast<Eigen::Index>(labels[s].classes[h]));
      }
      qhat[h] = conformal_quantile(calib_scores, options.alpha);
    }
    std::vector<std::size_t> covered(heads, 0);
    for (std::size_t i = options.calib_size; i < pool_size; ++i) {
      const std::size_t s = order[i];
      const PredictionSet set = predict_set_from_scores(scores[s], qhat, excluded);
      for (std::size_t h = 0; h < heads; ++h) {
        const auto& cls = set.classes[h];
        covered[h] += std::binary_search(cls.begin(), cls.end(), labels[s].classes[h]) ? 1 : 0;
      }
    }
    for (std::size_t h = 0; h < heads; ++h) {
      coverage[h].push_back(static_cast<double>(covered[h]) / static_cast<double>(options.test_size));
    }
  }

  AuditReport report;
  report.options = options;
  report.seed = config.seed;
  report.nominal = static_cast<double>(conformal_rank(options.calib_size, options.alpha)) /
                   static_cast<double>(options.calib_size + 1);
  const double target = 1.0 - options.alpha;
  const auto reps = static_cast<double>(options.resplits);
  for (std::size_t h = 0; h < heads; ++h) {
    HeadAudit a;
    a.name = grid.dim(h).name;
    a.excluded = excluded[h];
    const auto& c = coverage[h];
    a.mean = std::accumulate(c.begin(), c.end(), 0.0) / reps;
    a.binomial_se = std::sqrt(std::max(0.0, a.mean * (1.0 - a.mean)) / reps);
    double ss = 0.0;
    for (double v : c) ss += (v - a.mean) * (v - a.mean);
    a.empirical_se = c.size() > 1 ? std::sqrt(ss / (reps - 1.0) / reps) : 0.0;
    a.lower = target - 3.0 * a.binomial_se;
    a.upper = target + 0.01 + 3.0 * a.binomial_se;
    a.in_band = a.mean >= a.lower && a.mean <= a.upper;
    report.heads.push_back(a);
  }
  return report;
}

}  // namespace convo
