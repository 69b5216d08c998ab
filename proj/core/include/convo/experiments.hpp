#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "convo/config.hpp"
#include "convo/pipeline.hpp"

namespace convo {

/// Bumped whenever the CSV columns or the JSON layout change.
inline constexpr int kResultSchemaVersion = 1;

struct ResultRow {
  std::string condition;
  /// Seed of the run; summary rows have none.
  std::optional<std::uint64_t> seed;
  double conformal_rmse = 0.0;
  double classical_rmse = 0.0;
  /// classical_rmse / conformal_rmse, filled by `ResultTable::add`.
  double improvement = 0.0;
  double mean_set_size = 0.0;
  double coverage = 0.0;
  double fallback_rate = 0.0;
};

/// Outcome of a study-level property, counted over seeds.
struct StudyCheck {
  std::string name;
  std::size_t passed = 0;
  std::size_t total = 0;
  bool holds() const { return total > 0 && 2 * passed > total; }
};

class ResultTable {
 public:
  ResultTable() = default;
  explicit ResultTable(std::string study) : study_(std::move(study)) {}

  const std::string& study() const { return study_; }
  /// Per-seed rows ordered by condition label, then seed.
  const std::vector<ResultRow>& rows() const { return rows_; }
  std::vector<std::string> conditions() const;
  /// Per-seed rows of one condition, in seed order.
  std::vector<ResultRow> rows_for(const std::string& condition) const;
  /// One row per condition holding per-column medians over seeds; the
  /// improvement column is the median of the per-seed ratios.
  std::vector<ResultRow> summary() const;

  /// Inserts in sorted position and recomputes the improvement ratio.
  void add(ResultRow row);

  std::vector<StudyCheck> checks;

  /// Header plus per-seed rows, then summary rows with seed column "median".
  std::string to_csv() const;
  nlohmann::json to_json() const;
  /// Throws kInvalidInput when a stored ratio differs from classical/conformal.
  void verify_ratios() const;

 private:
  std::string study_;
  std::vector<ResultRow> rows_;
};

inline constexpr const char* kCsvHeader =
    "study,condition,seed,conformal_rmse,classical_rmse,improvement,mean_set_size,coverage,fallback_rate";

/// Condition labels: "fraction=0.4", "sigma=0.05", or the tier name.
std::string fraction_label(double fraction);
std::string sigma_label(double sigma);

/// Worlds and trained arms shared between studies, keyed by seed and by
/// (seed, K, tier, fraction). Every entry is a pure function of the base
/// config and its key.
class StudyRunner {
 public:
  explicit StudyRunner(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  std::vector<std::uint64_t> seeds() const;

  ExperimentConfig config_for(std::uint64_t seed) const;
  const PreparedWorld& world(std::uint64_t seed);
  const TrainedArms& arms(std::uint64_t seed, int classes, CapacityTier tier, double fraction);
  Evaluation evaluate(std::uint64_t seed, int classes, CapacityTier tier, double fraction, double sigma);

  ResultTable sample_efficiency();
  ResultTable parametric_efficiency();
  ResultTable noise_robustness();

 private:
  ExperimentConfig config_;
  std::map<std::uint64_t, std::unique_ptr<PreparedWorld>> worlds_;
  std::map<std::tuple<std::uint64_t, int, int, double>, std::unique_ptr<TrainedArms>> arms_;
};

inline constexpr double kStudyFractions[] = {0.4, 0.8, 1.0};
inline constexpr double kStudySigmas[] = {0.0, 0.05, 0.1, 0.2};
inline constexpr CapacityTier kStudyTiers[] = {CapacityTier::kSmall, CapacityTier::kMedium, CapacityTier::kLarge};

/// Seed of the test-frame noise for a run; fixed by the seed and σ alone.
std::uint64_t noise_seed(std::uint64_t seed, double sigma);

ResultTable run_sample_efficiency(const ExperimentConfig& config);
ResultTable run_parametric_efficiency(const ExperimentConfig& config);
ResultTable run_noise_robustness(const ExperimentConfig& config);
/// `study` is one of "sample", "capacity", "noise"; throws kInvalidInput otherwise.
ResultTable run_study(const std::string& study, const ExperimentConfig& config);

}  // namespace convo
