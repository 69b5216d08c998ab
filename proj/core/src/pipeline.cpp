#include "convo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "convo/error.hpp"

namespace convo {

namespace {

std::vector<Frame> frames_at(const World& world, std::size_t begin, std::size_t count) {
  return {world.frames.begin() + static_cast<std::ptrdiff_t>(begin),
          world.frames.begin() + static_cast<std::ptrdiff_t>(begin + count)};
}

Eigen::MatrixXd rows_at(const Eigen::MatrixXd& m, std::span<const std::size_t> indices) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(indices[i]));
  }
  return out;
}

std::vector<std::size_t> block(std::size_t begin, std::size_t count) {
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = begin + i;
  return out;
}

}  // namespace

PreparedWorld prepare_world(const ExperimentConfig& config) { return prepare_world(generate_world(config), config); }

PreparedWorld prepare_world(World world, const ExperimentConfig& config) {
  PreparedWorld p{std::move(world),
                  FeatureExtractor(config.scene.height, config.scene.width, config.feature_grid, config.feature_grid),
                  {}};
  p.features = p.extractor.extract_all(p.world.frames);
  return p;
}

ArmSettings arm_settings(const ExperimentConfig& config, CapacityTier tier, double train_fraction) {
  ArmSettings s;
  s.classes = static_cast<std::size_t>(config.classes);
  s.alpha = config.alpha;
  s.train_fraction = train_fraction;
  s.train_noise_sigma = config.train_noise_sigma;
  s.training.hidden_width = static_cast<std::size_t>(config.hidden_width(tier));
  s.training.seed = config.seed;
  s.training.step = config.learning_rate;
  s.training.max_epochs = static_cast<std::size_t>(config.max_epochs);
  s.training.weight_decay = config.weight_decay;
  return s;
}

std::vector<std::size_t> training_indices(const Split& split, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "training fraction must lie in (0, 1]");
  const auto m = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(split.train_count)));
  require(m >= 1, "training fraction keeps no frame");
  std::vector<std::size_t> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = split.train_begin + j * split.train_count / m;
  return out;
}

std::vector<ClassLabel> labels_for(const Trajectory& trajectory, std::span<const std::size_t> indices,
                                   const QuantileGrid& grid) {
  std::vector<ClassLabel> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(grid.encode(trajectory[i].pose));
  return out;
}

TrainedModels train_models(const PreparedWorld& prepared, const ArmSettings& settings) {
  const World& w = prepared.world;
  TrainedModels arms;
  arms.train_indices = training_indices(w.split, settings.train_fraction);

  Trajectory train_traj;
  std::vector<Pose> train_poses;
  for (std::size_t i : arms.train_indices) {
    train_traj.push_back(w.trajectory[i].frame, w.trajectory[i].pose);
    train_poses.push_back(w.trajectory[i].pose);
  }
  Eigen::MatrixXd train_x;
  if (settings.train_noise_sigma > 0.0) {
    std::mt19937_64 rng(settings.training.seed ^ 0x5851f42d4c957f2dULL);
    train_x.resize(static_cast<Eigen::Index>(arms.train_indices.size()), prepared.features.cols());
    for (std::size_t r = 0; r < arms.train_indices.size(); ++r) {
      Frame f = w.frames[arms.train_indices[r]];
      f = add_gaussian_noise(f, settings.train_noise_sigma, rng);
      train_x.row(static_cast<Eigen::Index>(r)) = prepared.extractor.extract(f).transpose();
    }
  } else {
    train_x = rows_at(prepared.features, arms.train_indices);
  }

  arms.grid = fit_grid(train_traj, settings.classes);
  const auto labels = labels_for(w.trajectory, arms.train_indices, arms.grid);
  arms.classifier = train_multihead(train_x, labels, arms.grid.class_counts(), settings.training);
  arms.classical = train_baseline(train_x, train_poses, settings.training);
  return arms;
}

CalibratedModel calibrate_on_world(const PreparedWorld& prepared, const MultiHeadModel& classifier,
                                   const QuantileGrid& grid, double alpha) {
  const World& w = prepared.world;
  const auto calib = block(w.split.calib_begin, w.split.calib_count);
  const auto calib_labels = labels_for(w.trajectory, calib, grid);
  return calibrate(classifier, grid, rows_at(prepared.features, calib), calib_labels, alpha);
}

TrainedArms train_arms(const PreparedWorld& prepared, const ArmSettings& settings) {
  TrainedModels m = train_models(prepared, settings);
  TrainedArms arms;
  arms.conformal = calibrate_on_world(prepared, m.classifier, m.grid, settings.alpha);
  arms.classical = std::move(m.classical);
  arms.train_indices = std::move(m.train_indices);
  return arms;
}

Evaluation evaluate(const PreparedWorld& prepared, const TrainedArms& arms, double noise_sigma,
                    std::uint64_t noise_seed, const RolloutOptions& options) {
  const World& w = prepared.world;
  const Split& s = w.split;
  std::vector<Frame> frames = frames_at(w, s.test_begin, s.test_count);
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(noise_seed);
    for (Frame& f : frames) f = add_gaussian_noise(f, noise_sigma, rng);
  }
  const auto first = w.trajectory[s.test_begin].frame;

  Evaluation e;
  e.truth = w.trajectory.slice(s.test_begin, s.test_count);
  e.rollout = rollout(arms.conformal, prepared.extractor, frames, w.scene.intrinsics, first, options);
  const BaselineResult classical = baseline_rollout(arms.classical, prepared.extractor, frames, first);
  const Trajectory argmax = argmax_rollout(arms.conformal, prepared.extractor, frames, first);

  e.conformal_rmse = rmse(e.rollout.trajectory, e.truth);
  e.classical_rmse = rmse(classical.trajectory, e.truth);
  e.argmax_rmse = rmse(argmax, e.truth);
  e.conformal_orientation_error = mean_orientation_error(e.rollout.trajectory, e.truth);
  e.classical_orientation_error = mean_orientation_error(classical.trajectory, e.truth);
  e.mean_set_size = mean_set_size(e.rollout.sets);

  std::size_t covered = 0, pairs = 0, fallbacks = 0, multimodal = 0;
  double width = 0.0, interval_width = 0.0;
  std::size_t widths = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const ClassLabel truth = arms.conformal.grid.encode(e.truth[i].pose);
    const PredictionSet& set = e.rollout.sets[i];
    for (std::size_t h = 0; h < truth.classes.size(); ++h) {
      const auto& cls = set.classes[h];
      covered += std::binary_search(cls.begin(), cls.end(), truth.classes[h]) ? 1 : 0;
      ++pairs;
    }
    if (e.rollout.steps[i].any_fallback()) ++fallbacks;
    const UncertaintyRegion& region = e.rollout.regions[i];
    bool multi = false;
    std::uint64_t product = 1;
    for (std::size_t d = 0; d < region.dims(); ++d) {
      if (d < 3 && region.interval_count(d) >= 2) multi = true;
      product *= region.interval_count(d);
      width += region.measure(d);
      interval_width += region.measure(d) / static_cast<double>(region.interval_count(d));
      ++widths;
    }
    if (product != region.cuboid_count()) e.cuboid_counts_consistent = false;
    if (multi) ++multimodal;
  }
  const auto n = static_cast<double>(frames.size());
  e.coverage = static_cast<double>(covered) / static_cast<double>(pairs);
  e.fallback_rate = static_cast<double>(fallbacks) / n;
  e.multimodal_fraction = static_cast<double>(multimodal) / n;
  e.mean_region_width = width / static_cast<double>(widths);
  e.mean_interval_width = interval_width / static_cast<double>(widths);
  return e;
}

}  // namespace convo
