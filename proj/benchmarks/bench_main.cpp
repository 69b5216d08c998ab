#include <benchmark/benchmark.h>

#include <random>

#include "convo/conformal.hpp"
#include "convo/corners.hpp"
#include "convo/epipolar.hpp"
#include "convo/optical_flow.hpp"
#include "convo/pipeline.hpp"

namespace {

using namespace convo;

// One rendered world shared by every benchmark.
const PreparedWorld& world() {
  static const PreparedWorld w = [] {
    ExperimentConfig c;
    c.trajectory_length = 120;
    return prepare_world(c);
  }();
  return w;
}

void BM_HarrisCorners(benchmark::State& state) {
  const Frame& f = world().world.frames[10];
  for (auto _ : state) benchmark::DoNotOptimize(harris_corners(f, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_HarrisCorners)->Arg(50)->Arg(150);

void BM_LucasKanade(benchmark::State& state) {
  const Frame& a = world().world.frames[10];
  const Frame& b = world().world.frames[11];
  std::vector<Eigen::Vector2d> pts;
  for (const Corner& c : harris_corners(a, static_cast<int>(state.range(0)))) pts.push_back(c.pixel);
  for (auto _ : state) benchmark::DoNotOptimize(lucas_kanade(a, b, pts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_LucasKanade)->Arg(50)->Arg(150);

void BM_EssentialEstimate(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<Vec3> x0, x1;
  const RotationMatrix r = quat_to_rotmat(quat_from_axis_angle(Vec3(0.2, 1, 0.1), 0.1));
  const Vec3 t = Vec3(0.3, 0.1, 1).normalized();
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    const Vec3 p(n(rng), n(rng), 4 + std::abs(n(rng)));
    const Vec3 q = r * p + 0.2 * t;
    x0.push_back(p / p.z());
    x1.push_back(q / q.z());
  }
  const Correspondences corr = Correspondences::from_normalized(x0, x1);
  for (auto _ : state) {
    const Mat3 e = estimate_essential(corr);
    benchmark::DoNotOptimize(decompose_essential(e, corr));
  }
}
BENCHMARK(BM_EssentialEstimate)->Arg(16)->Arg(128);

void BM_RelativeMotion(benchmark::State& state) {
  const World& w = world().world;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_relative_motion(w.frames[10], w.frames[11], w.scene.intrinsics));
}
BENCHMARK(BM_RelativeMotion)->Unit(benchmark::kMillisecond);

void BM_TrainingEpochs(benchmark::State& state) {
  ExperimentConfig c;
  c.trajectory_length = 120;
  c.max_epochs = 10;
  ArmSettings s = arm_settings(c, CapacityTier::kMedium, 1.0);
  s.training.hidden_width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train_models(world(), s));
}
BENCHMARK(BM_TrainingEpochs)->Arg(0)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_PredictSet(benchmark::State& state) {
  ExperimentConfig c;
  c.trajectory_length = 120;
  c.max_epochs = 20;
  static const TrainedArms arms = train_arms(world(), arm_settings(c, CapacityTier::kMedium, 1.0));
  const FeatureVector f = world().features.row(100).transpose();
  for (auto _ : state) {
    const PredictionSet set = predict_set(arms.conformal, f);
    benchmark::DoNotOptimize(to_region(set, arms.conformal.grid));
  }
}
BENCHMARK(BM_PredictSet);

}  // namespace

BENCHMARK_MAIN();
