#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "convo/audit.hpp"
#include "convo/error.hpp"
#include "convo/experiments.hpp"
#include "convo/pipeline.hpp"

namespace convo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorCode::kIo, "write to " + path.string() + " failed");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json pose_json(const Pose& p) {
  const Quaternion& q = p.orientation();
  return {{"position", {p.position().x(), p.position().y(), p.position().z()}},
          {"orientation", {q.w, q.x, q.y, q.z}}};
}

json trajectory_json(const Trajectory& t) {
  json out = json::array();
  for (const TrajectoryPoint& p : t) {
    json j = pose_json(p.pose);
    j["frame"] = p.frame;
    out.push_back(j);
  }
  return out;
}

// Flags shared by every subcommand that builds on a config.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string dir;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file (missing keys keep defaults)")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Overrides the config seed");
    app->add_option("--dir", dir, "Artifact directory (default: the config's output_dir)");
  }

  ExperimentConfig config() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }

  fs::path directory(const ExperimentConfig& c) const { return dir.empty() ? fs::path(c.output_dir) : fs::path(dir); }
};

// Config saved next to a generated world, with an optional seed override.
ExperimentConfig stored_config(const fs::path& dir) {
  ExperimentConfig c = ExperimentConfig::from_json(read_json(dir / "config.json"));
  c.validate();
  return c;
}

PreparedWorld load_prepared(const fs::path& dir, const ExperimentConfig& c) {
  return prepare_world(World::from_json(read_json(dir / "world.json")), c);
}

void cmd_generate(const Common& common, bool dump_frames, std::ostream& out) {
  const ExperimentConfig c = common.config();
  const fs::path dir = common.directory(c);
  const World w = generate_world(c);
  fs::create_directories(dir);
  save_config(c, dir / "config.json");
  write_json(dir / "world.json", w.to_json());
  if (dump_frames) {
    fs::create_directories(dir / "frames");
    for (std::size_t i = 0; i < w.frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%04zu.pgm", i);
      write_pgm(w.frames[i], dir / "frames" / name);
    }
  }
  out << json{{"world", (dir / "world.json").string()},
              {"frames", w.frames.size()},
              {"split", w.split.to_json()}}
             .dump()
      << "\n";
}

void cmd_train(const fs::path& dir, const std::string& capacity, std::optional<double> fraction, std::ostream& out) {
  const ExperimentConfig c = stored_config(dir);
  const CapacityTier tier = capacity.empty() ? c.capacity : capacity_from_string(capacity);
  const PreparedWorld p = load_prepared(dir, c);
  const TrainedModels m = train_models(p, arm_settings(c, tier, fraction.value_or(c.train_fraction)));
  write_json(dir / "grid.json", m.grid.to_json());
  write_json(dir / "classifier.json", m.classifier.to_json());
  write_json(dir / "baseline.json", m.classical.to_json());
  out << json{{"capacity", to_string(tier)},
              {"train_frames", m.train_indices.size()},
              {"classifier_epochs", m.classifier.trace().losses.size() - 1},
              {"classifier_loss", m.classifier.trace().losses.back()},
              {"baseline_loss", m.classical.trace().losses.back()}}
             .dump()
      << "\n";
}

void cmd_calibrate(const fs::path& dir, std::optional<double> alpha, std::ostream& out) {
  const ExperimentConfig c = stored_config(dir);
  const PreparedWorld p = load_prepared(dir, c);
  const QuantileGrid grid = QuantileGrid::from_json(read_json(dir / "grid.json"));
  const MultiHeadModel model = MultiHeadModel::from_json(read_json(dir / "classifier.json"));
  const CalibratedModel cal = calibrate_on_world(p, model, grid, alpha.value_or(c.alpha));
  write_json(dir / "calibrated.json", cal.to_json());
  json report{{"alpha", cal.alpha()}, {"n", cal.record.n}, {"heads", json::array()}};
  for (std::size_t h = 0; h < cal.qhat.size(); ++h) {
    report["heads"].push_back({{"name", grid.dim(h).name}, {"qhat", cal.qhat[h]}, {"excluded", bool(cal.excluded[h])}});
  }
  write_json(dir / "qhat.json", report);
  out << report.dump() << "\n";
}

void cmd_rollout(const fs::path& dir, double sigma, std::ostream& out) {
  const ExperimentConfig c = stored_config(dir);
  const PreparedWorld p = load_prepared(dir, c);
  TrainedArms arms;
  arms.conformal = CalibratedModel::from_json(read_json(dir / "calibrated.json"));
  arms.classical = RegressionBaseline::from_json(read_json(dir / "baseline.json"));
  const Evaluation e = evaluate(p, arms, sigma, noise_seed(c.seed, sigma));

  std::string lines;
  for (std::size_t i = 0; i < e.rollout.steps.size(); ++i) {
    json step = e.rollout.steps[i].to_json();
    step["region"] = e.rollout.regions[i].to_json();
    step["pose"] = pose_json(e.rollout.trajectory[i].pose);
    lines += step.dump() + "\n";
  }
  write_text(dir / "steps.jsonl", lines);
  const json summary{{"conformal_rmse", e.conformal_rmse},
                     {"classical_rmse", e.classical_rmse},
                     {"argmax_rmse", e.argmax_rmse},
                     {"mean_set_size", e.mean_set_size},
                     {"coverage", e.coverage},
                     {"fallback_rate", e.fallback_rate},
                     {"multimodal_fraction", e.multimodal_fraction}};
  write_json(dir / "trajectory.json",
             {{"conformal", trajectory_json(e.rollout.trajectory)}, {"truth", trajectory_json(e.truth)}, {"summary", summary}});
  out << summary.dump() << "\n";
}

void cmd_experiment(const Common& common, const std::string& study, std::optional<int> seeds, std::ostream& out) {
  ExperimentConfig c = common.config();
  if (seeds) c.seeds = *seeds;
  c.validate();
  const fs::path dir = common.directory(c);
  const ResultTable t = run_study(study, c);
  write_text(dir / (study + ".csv"), t.to_csv());
  write_json(dir / (study + ".json"), t.to_json());
  for (const ResultRow& r : t.summary()) {
    char line[256];
    std::snprintf(line, sizeof line, "%-14s conformal %.4f classical %.4f improvement %.3f set %.2f coverage %.3f\n",
                  r.condition.c_str(), r.conformal_rmse, r.classical_rmse, r.improvement, r.mean_set_size, r.coverage);
    out << line;
  }
  for (const StudyCheck& k : t.checks) out << k.name << ": " << k.passed << "/" << k.total << "\n";
}

void cmd_audit(const Common& common, const AuditOptions& options, std::ostream& out) {
  const ExperimentConfig c = common.config();
  const AuditReport r = run_audit(c, options);
  write_json(common.directory(c) / "audit.json", r.to_json());
  for (const HeadAudit& h : r.heads) {
    char line[256];
    if (h.excluded) {
      std::snprintf(line, sizeof line, "%-3s constant head, not calibrated\n", h.name.c_str());
    } else {
      std::snprintf(line, sizeof line, "%-3s mean %.4f se %.4f (empirical %.4f) band [%.4f, %.4f] %s\n", h.name.c_str(),
                    h.mean, h.binomial_se, h.empirical_se, h.lower, h.upper, h.in_band ? "in band" : "OUT OF BAND");
    }
    out << line;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformalized visual odometry on synthetic worlds", "convo"};
  app.require_subcommand(1);

  Common common;
  bool dump_frames = false;
  std::string capacity, study, dir;
  std::optional<double> fraction, alpha;
  std::optional<int> seeds;
  double sigma = 0.0;
  AuditOptions audit;

  auto* generate = app.add_subcommand("generate", "Generate a world and its split");
  common.attach(generate);
  generate->add_flag("--frames", dump_frames, "Also write every frame as PGM");

  auto* train = app.add_subcommand("train", "Fit the grid and train both arms on a generated world");
  train->add_option("--dir", dir, "World directory")->required();
  train->add_option("--capacity", capacity, "small, medium or large");
  train->add_option("--fraction", fraction, "Training fraction in (0, 1]");

  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the trained classifier");
  calibrate->add_option("--dir", dir, "World directory")->required();
  calibrate->add_option("--alpha", alpha, "Miscoverage rate");

  auto* rollout = app.add_subcommand("rollout", "Run both arms over the test block");
  rollout->add_option("--dir", dir, "World directory")->required();
  rollout->add_option("--sigma", sigma, "Pixel noise on the test frames")->check(CLI::NonNegativeNumber);

  auto* experiment = app.add_subcommand("experiment", "Run one study over the seed suite");
  common.attach(experiment);
  experiment->add_option("--study", study, "sample, capacity or noise")
      ->required()
      ->check(CLI::IsMember({"sample", "capacity", "noise"}));
  experiment->add_option("--seeds", seeds, "Number of seeds");

  auto* audit_cmd = app.add_subcommand("audit", "Coverage audit on exchangeable data");
  common.attach(audit_cmd);
  audit_cmd->add_option("--alpha", audit.alpha, "Miscoverage rate");
  audit_cmd->add_option("--resplits", audit.resplits, "Random calibration/test splits");
  audit_cmd->add_option("--calib", audit.calib_size, "Calibration block size");
  audit_cmd->add_option("--test", audit.test_size, "Test block size");
  audit_cmd->add_option("--train", audit.train_size, "Training samples");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (generate->parsed()) cmd_generate(common, dump_frames, out);
    if (train->parsed()) cmd_train(dir, capacity, fraction, out);
    if (calibrate->parsed()) cmd_calibrate(dir, alpha, out);
    if (rollout->parsed()) cmd_rollout(dir, sigma, out);
    if (experiment->parsed()) cmd_experiment(common, study, seeds, out);
    if (audit_cmd->parsed()) cmd_audit(common, audit, out);
  } catch (const Error& e) {
    err << json{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace convo::cli
