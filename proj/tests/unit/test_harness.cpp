#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "convo/error.hpp"
#include "convo/experiments.hpp"
#include "convo/pipeline.hpp"

namespace convo {
namespace {

namespace fs = std::filesystem;

// Small enough to train in well under a second.
ExperimentConfig quick_config() {
  ExperimentConfig c;
  c.trajectory_length = 120;
  c.classes = 10;
  c.max_epochs = 60;
  c.seeds = 1;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("convo_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Config, JsonRoundTripIsLossless) {
  ExperimentConfig c;
  c.seed = 42;
  c.alpha = 0.05;
  c.capacity = CapacityTier::kLarge;
  c.scene.lap_jitter = 0.013;
  c.output_dir = "somewhere";
  EXPECT_EQ(ExperimentConfig::from_json(c.to_json()), c);

  const fs::path dir = scratch_dir("config");
  save_config(c, dir / "c.json");
  EXPECT_EQ(load_config(dir / "c.json"), c);
  fs::remove_all(dir);
}

TEST(Config, MissingKeysDefaultAndUnknownKeysFail) {
  const ExperimentConfig c = ExperimentConfig::from_json(nlohmann::json{{"seed", 3}});
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.classes, 50);
  EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json{{"sed", 3}}), Error);
  EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json{{"scene", {{"hieght", 3}}}}), Error);
  EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json{{"capacity", "huge"}}), Error);
}

TEST(Config, ValidateRejectsOutOfRange) {
  ExperimentConfig c;
  c.alpha = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.train_fraction = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.train_split = 0.9;
  c.calib_split = 0.1;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_NO_THROW(ExperimentConfig{}.validate());
}

TEST(Split, BlocksAreContiguousAndDisjoint) {
  const Split s = make_split(100, 0.6, 0.2);
  EXPECT_EQ(s.train_count, 60u);
  EXPECT_EQ(s.calib_count, 20u);
  EXPECT_EQ(s.test_count, 20u);
  EXPECT_EQ(s.train_begin + s.train_count, s.calib_begin);
  EXPECT_EQ(s.calib_begin + s.calib_count, s.test_begin);
  EXPECT_EQ(s.test_begin + s.test_count, 100u);
  EXPECT_THROW(make_split(3, 0.9, 0.05), Error);
  EXPECT_EQ(Split::from_json(s.to_json()), s);
}

TEST(World, SameSeedSameWorld) {
  const ExperimentConfig c = quick_config();
  const World a = generate_world(c);
  const World b = generate_world(c);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.frames, b.frames);
  ExperimentConfig other = c;
  other.seed = 1;
  EXPECT_NE(generate_world(other).to_json(), a.to_json());
}

TEST(World, JsonReloadRerendersIdenticalFrames) {
  const World w = generate_world(quick_config());
  const World back = World::from_json(nlohmann::json::parse(w.to_json().dump()));
  EXPECT_EQ(back.frames, w.frames);
  EXPECT_EQ(back.split, w.split);
}

TEST(World, SymmetricLanesLookAlike) {
  const ExperimentConfig c = quick_config();
  const World w = generate_world(c);
  std::mt19937_64 rng(9);
  // Any pose and its copy shifted by one lane offset see the same landmarks.
  for (int i = 0; i < 5; ++i) {
    const Pose p = sample_loop_pose(w.path, rng);
    const Pose q(p.position() + Vec3(0, c.scene.lane_offset, 0), p.orientation());
    const Frame a = render(w.scene, p), b = render(w.scene, q);
    double diff = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k) diff = std::max(diff, std::abs(a.data()[k] - b.data()[k]));
    EXPECT_LT(diff, 1e-9);
  }
}

TEST(World, SparseSceneIsAGenerationError) {
  ExperimentConfig c = quick_config();
  c.scene.landmark_density = 0.01;
  try {
    generate_world(c);
    FAIL() << "expected a generation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGeneration);
  }
}

TEST(Pipeline, TrainingIndicesAreEvenlySpaced) {
  const Split s = make_split(100, 0.6, 0.2);
  const auto idx = training_indices(s, 0.4);
  ASSERT_EQ(idx.size(), 24u);
  EXPECT_EQ(idx.front(), 0u);
  EXPECT_LT(idx.back(), 60u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(training_indices(s, 1.0).size(), 60u);
  EXPECT_THROW(training_indices(s, 0.0), Error);
}

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    config_ = new ExperimentConfig(quick_config());
    prepared_ = new PreparedWorld(prepare_world(*config_));
    arms_ = new TrainedArms(train_arms(*prepared_, arm_settings(*config_, CapacityTier::kSmall, 1.0)));
  }
  static void TearDownTestSuite() {
    delete arms_;
    delete prepared_;
    delete config_;
  }
  static ExperimentConfig* config_;
  static PreparedWorld* prepared_;
  static TrainedArms* arms_;
};
ExperimentConfig* PipelineTest::config_ = nullptr;
PreparedWorld* PipelineTest::prepared_ = nullptr;
TrainedArms* PipelineTest::arms_ = nullptr;

TEST_F(PipelineTest, EvaluationIsConsistent) {
  const Evaluation e = evaluate(*prepared_, *arms_, 0.0, 1);
  const Split& s = prepared_->world.split;
  EXPECT_EQ(e.rollout.trajectory.size(), s.test_count);
  EXPECT_EQ(e.rollout.steps.size(), s.test_count);
  EXPECT_EQ(e.rollout.trajectory.front().frame, static_cast<std::int64_t>(s.test_begin));
  EXPECT_TRUE(e.cuboid_counts_consistent);
  EXPECT_GE(e.coverage, 0.0);
  EXPECT_LE(e.coverage, 1.0);
  EXPECT_GE(e.mean_set_size, 1.0);
  EXPECT_DOUBLE_EQ(e.conformal_rmse, rmse(e.rollout.trajectory, e.truth));
  for (std::size_t i = 0; i < e.rollout.regions.size(); ++i) {
    EXPECT_EQ(e.rollout.regions[i].cuboid_count(), e.rollout.steps[i].cuboids);
  }
}

TEST_F(PipelineTest, NoiseOnlyTouchesTestFramesAndIsSeeded) {
  const Evaluation clean = evaluate(*prepared_, *arms_, 0.0, 1);
  const Evaluation clean2 = evaluate(*prepared_, *arms_, 0.0, 99);
  EXPECT_EQ(clean.conformal_rmse, clean2.conformal_rmse);
  const Evaluation noisy = evaluate(*prepared_, *arms_, 0.1, 5);
  const Evaluation noisy2 = evaluate(*prepared_, *arms_, 0.1, 5);
  EXPECT_EQ(noisy.conformal_rmse, noisy2.conformal_rmse);
  EXPECT_NE(noisy.classical_rmse, clean.classical_rmse);
}

TEST_F(PipelineTest, CalibrationUsesTheCalibrationBlock) {
  EXPECT_EQ(arms_->conformal.record.n, prepared_->world.split.calib_count);
  for (std::size_t i : arms_->train_indices) EXPECT_LT(i, prepared_->world.split.calib_begin);
}

ResultRow row(const std::string& cond, std::uint64_t seed, double conf, double cls, double size) {
  ResultRow r;
  r.condition = cond;
  r.seed = seed;
  r.conformal_rmse = conf;
  r.classical_rmse = cls;
  r.improvement = -1.0;  // overwritten on insertion
  r.mean_set_size = size;
  return r;
}

TEST(ResultTable, SortedRowsAndComputedRatios) {
  ResultTable t("noise");
  t.add(row("sigma=0.10", 1, 0.5, 1.0, 3));
  t.add(row("sigma=0.00", 2, 0.2, 0.3, 2));
  t.add(row("sigma=0.00", 0, 0.4, 0.2, 1));
  t.add(row("sigma=0.00", 1, 0.1, 0.4, 4));
  ASSERT_EQ(t.rows().size(), 4u);
  EXPECT_EQ(t.rows()[0].seed, 0u);
  EXPECT_EQ(t.rows()[2].seed, 2u);
  EXPECT_EQ(t.rows()[3].condition, "sigma=0.10");
  for (const ResultRow& r : t.rows()) EXPECT_DOUBLE_EQ(r.improvement, r.classical_rmse / r.conformal_rmse);
  EXPECT_NO_THROW(t.verify_ratios());

  const auto summary = t.summary();
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_DOUBLE_EQ(summary[0].conformal_rmse, 0.2);
  EXPECT_DOUBLE_EQ(summary[0].improvement, 1.5);
  EXPECT_DOUBLE_EQ(summary[0].mean_set_size, 2.0);
  EXPECT_FALSE(summary[0].seed.has_value());
}

TEST(ResultTable, CsvAndJsonAreVersioned) {
  ResultTable t("sample");
  t.add(row("fraction=0.4", 0, 0.25, 0.5, 2));
  const std::string csv = t.to_csv();
  EXPECT_EQ(csv.rfind("# convo results v1\n", 0), 0u);
  EXPECT_NE(csv.find(kCsvHeader), std::string::npos);
  EXPECT_NE(csv.find("sample,fraction=0.4,0,0.25,0.5,2,2,0,0\n"), std::string::npos);
  EXPECT_NE(csv.find("sample,fraction=0.4,median,"), std::string::npos);
  const nlohmann::json j = t.to_json();
  EXPECT_EQ(j["version"], kResultSchemaVersion);
  EXPECT_EQ(j["rows"].size(), 1u);
}

TEST(ResultTable, LabelsAndNoiseSeeds) {
  EXPECT_EQ(fraction_label(0.4), "fraction=0.4");
  EXPECT_EQ(sigma_label(0.05), "sigma=0.05");
  EXPECT_EQ(noise_seed(3, 0.1), noise_seed(3, 0.1));
  EXPECT_NE(noise_seed(3, 0.1), noise_seed(3, 0.2));
  EXPECT_NE(noise_seed(3, 0.1), noise_seed(4, 0.1));
  EXPECT_THROW(run_study("speed", quick_config()), Error);
}

TEST(Study, NoiseTableHasOneRowPerSigma) {
  const ResultTable t = run_noise_robustness(quick_config());
  EXPECT_EQ(t.conditions().size(), 4u);
  EXPECT_EQ(t.summary().size(), 4u);
  EXPECT_EQ(t.rows_for(sigma_label(0.0)).size(), 1u);
  EXPECT_FALSE(t.checks.empty());
}

int cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return code;
}

TEST(Cli, UsageErrorsExitTwo) {
  std::string err;
  EXPECT_EQ(cli({"fly"}, nullptr, &err), 2);
  EXPECT_NE(err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli({}), 2);
  EXPECT_EQ(cli({"experiment"}), 2);
  EXPECT_EQ(cli({"experiment", "--study", "speed"}), 2);
  EXPECT_EQ(cli({"audit", "--resplits", "many"}), 2);
  EXPECT_EQ(cli({"--help"}), 0);
}

TEST(Cli, ComponentFailureWritesErrorRecord) {
  std::string err;
  const fs::path dir = scratch_dir("missing");
  EXPECT_EQ(cli({"rollout", "--dir", (dir / "nothing").string()}, nullptr, &err), 1);
  const nlohmann::json j = nlohmann::json::parse(err);
  EXPECT_EQ(j["error"]["code"], "io");
  fs::remove_all(dir);
}

TEST(Cli, StagesChainThroughFiles) {
  const fs::path dir = scratch_dir("stages");
  save_config(quick_config(), dir / "quick.json");
  const std::string d = (dir / "run").string();
  ASSERT_EQ(cli({"generate", "--config", (dir / "quick.json").string(), "--dir", d}), 0);
  ASSERT_EQ(cli({"train", "--dir", d, "--capacity", "small"}), 0);
  ASSERT_EQ(cli({"calibrate", "--dir", d}), 0);
  std::string out;
  ASSERT_EQ(cli({"rollout", "--dir", d}, &out), 0);
  EXPECT_TRUE(nlohmann::json::parse(out).contains("conformal_rmse"));
  for (const char* f : {"world.json", "grid.json", "classifier.json", "baseline.json", "calibrated.json", "qhat.json",
                        "steps.jsonl", "trajectory.json"}) {
    EXPECT_TRUE(fs::exists(fs::path(d) / f)) << f;
  }
  fs::remove_all(dir);
}

TEST(Cli, ExperimentRerunsAreByteIdentical) {
  const fs::path dir = scratch_dir("determinism");
  save_config(quick_config(), dir / "quick.json");
  const std::string cfg = (dir / "quick.json").string();
  ASSERT_EQ(cli({"experiment", "--study", "noise", "--seed", "7", "--config", cfg, "--dir", (dir / "a").string()}), 0);
  ASSERT_EQ(cli({"experiment", "--study", "noise", "--seed", "7", "--config", cfg, "--dir", (dir / "b").string()}), 0);
  EXPECT_EQ(slurp(dir / "a" / "noise.csv"), slurp(dir / "b" / "noise.csv"));
  EXPECT_EQ(slurp(dir / "a" / "noise.json"), slurp(dir / "b" / "noise.json"));
  EXPECT_FALSE(slurp(dir / "a" / "noise.csv").empty());
  fs::remove_all(dir);
}

}  // namespace
}  // namespace convo
