#include "convo/experiments.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iterator>
#include <limits>

#include "convo/error.hpp"

namespace convo {

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double ratio(double classical, double conformal) {
  return conformal > 0.0 ? classical / conformal : std::numeric_limits<double>::infinity();
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  if (a.condition != b.condition) return a.condition < b.condition;
  return a.seed.value_or(0) < b.seed.value_or(0);
}

nlohmann::json row_json(const ResultRow& r) {
  nlohmann::json j;
  j["condition"] = r.condition;
  j["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
  j["conformal_rmse"] = r.conformal_rmse;
  j["classical_rmse"] = r.classical_rmse;
  j["improvement"] = r.improvement;
  j["mean_set_size"] = r.mean_set_size;
  j["coverage"] = r.coverage;
  j["fallback_rate"] = r.fallback_rate;
  return j;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

ResultRow row_from(const std::string& condition, std::uint64_t seed, const Evaluation& e) {
  ResultRow r;
  r.condition = condition;
  r.seed = seed;
  r.conformal_rmse = e.conformal_rmse;
  r.classical_rmse = e.classical_rmse;
  r.mean_set_size = e.mean_set_size;
  r.coverage = e.coverage;
  r.fallback_rate = e.fallback_rate;
  return r;
}

const ResultRow& row_of(const std::vector<ResultRow>& rows, std::uint64_t seed) {
  for (const ResultRow& r : rows) {
    if (r.seed == seed) return r;
  }
  fail(ErrorCode::kInvalidInput, "no row for seed " + std::to_string(seed));
}

StudyCheck count_seeds(const std::string& name, const std::vector<std::uint64_t>& seeds,
                       const std::function<bool(std::uint64_t)>& pred) {
  StudyCheck c{name, 0, seeds.size()};
  for (std::uint64_t s : seeds) c.passed += pred(s) ? 1 : 0;
  return c;
}

}  // namespace

std::vector<std::string> ResultTable::conditions() const {
  std::vector<std::string> out;
  for (const ResultRow& r : rows_) {
    if (out.empty() || out.back() != r.condition) out.push_back(r.condition);
  }
  return out;
}

std::vector<ResultRow> ResultTable::rows_for(const std::string& condition) const {
  std::vector<ResultRow> out;
  std::copy_if(rows_.begin(), rows_.end(), std::back_inserter(out),
               [&](const ResultRow& r) { return r.condition == condition; });
  return out;
}

std::vector<ResultRow> ResultTable::summary() const {
  std::vector<ResultRow> out;
  for (const std::string& c : conditions()) {
    const auto rows = rows_for(c);
    auto column = [&](auto field) {
      std::vector<double> v;
      for (const ResultRow& r : rows) v.push_back(field(r));
      return median(std::move(v));
    };
    ResultRow s;
    s.condition = c;
    s.conformal_rmse = column([](const ResultRow& r) { return r.conformal_rmse; });
    s.classical_rmse = column([](const ResultRow& r) { return r.classical_rmse; });
    s.improvement = column([](const ResultRow& r) { return r.improvement; });
    s.mean_set_size = column([](const ResultRow& r) { return r.mean_set_size; });
    s.coverage = column([](const ResultRow& r) { return r.coverage; });
    s.fallback_rate = column([](const ResultRow& r) { return r.fallback_rate; });
    out.push_back(s);
  }
  return out;
}

void ResultTable::add(ResultRow row) {
  require(row.seed.has_value(), "result rows need a seed");
  row.improvement = ratio(row.classical_rmse, row.conformal_rmse);
  rows_.insert(std::upper_bound(rows_.begin(), rows_.end(), row, row_less), std::move(row));
}

void ResultTable::verify_ratios() const {
  for (const ResultRow& r : rows_) {
    const double expected = ratio(r.classical_rmse, r.conformal_rmse);
    require(r.improvement == expected, "improvement ratio of " + r.condition + " is not classical/conformal");
  }
}

std::string ResultTable::to_csv() const {
  verify_ratios();
  std::string out = std::string("# convo results v") + std::to_string(kResultSchemaVersion) + "\n";
  out += kCsvHeader;
  out += '\n';
  auto emit = [&](const ResultRow& r, const std::string& seed) {
    out += study_ + ',' + r.condition + ',' + seed + ',' + format_number(r.conformal_rmse) + ',' +
           format_number(r.classical_rmse) + ',' + format_number(r.improvement) + ',' +
           format_number(r.mean_set_size) + ',' + format_number(r.coverage) + ',' +
           format_number(r.fallback_rate) + '\n';
  };
  for (const ResultRow& r : rows_) emit(r, std::to_string(*r.seed));
  for (const ResultRow& r : summary()) emit(r, "median");
  return out;
}

nlohmann::json ResultTable::to_json() const {
  verify_ratios();
  nlohmann::json j;
  j["format"] = "convo.results";
  j["version"] = kResultSchemaVersion;
  j["study"] = study_;
  j["rows"] = nlohmann::json::array();
  for (const ResultRow& r : rows_) j["rows"].push_back(row_json(r));
  j["summary"] = nlohmann::json::array();
  for (const ResultRow& r : summary()) j["summary"].push_back(row_json(r));
  j["checks"] = nlohmann::json::array();
  for (const StudyCheck& c : checks) {
    j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"total", c.total}, {"holds", c.holds()}});
  }
  return j;
}

std::string fraction_label(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fraction=%.1f", fraction);
  return buf;
}

std::string sigma_label(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sigma=%.2f", sigma);
  return buf;
}

std::uint64_t noise_seed(std::uint64_t seed, double sigma) {
  return splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(std::llround(sigma * 1e6)));
}

StudyRunner::StudyRunner(ExperimentConfig config) : config_(std::move(config)) { config_.validate(); }

std::vector<std::uint64_t> StudyRunner::seeds() const {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < config_.seeds; ++i) out.push_back(config_.seed + static_cast<std::uint64_t>(i));
  return out;
}

ExperimentConfig StudyRunner::config_for(std::uint64_t seed) const {
  ExperimentConfig c = config_;
  c.seed = seed;
  return c;
}

const PreparedWorld& StudyRunner::world(std::uint64_t seed) {
  auto& slot = worlds_[seed];
  if (!slot) slot = std::make_unique<PreparedWorld>(prepare_world(config_for(seed)));
  return *slot;
}

const TrainedArms& StudyRunner::arms(std::uint64_t seed, int classes, CapacityTier tier, double fraction) {
  auto& slot = arms_[{seed, classes, static_cast<int>(tier), fraction}];
  if (!slot) {
    ExperimentConfig c = config_for(seed);
    c.classes = classes;
    slot = std::make_unique<TrainedArms>(train_arms(world(seed), arm_settings(c, tier, fraction)));
  }
  return *slot;
}

Evaluation StudyRunner::evaluate(std::uint64_t seed, int classes, CapacityTier tier, double fraction,
                                 double sigma) {
  const TrainedArms& a = arms(seed, classes, tier, fraction);
  return convo::evaluate(world(seed), a, sigma, noise_seed(seed, sigma));
}

ResultTable StudyRunner::sample_efficiency() {
  ResultTable t("sample");
  const auto seeds = this->seeds();
  for (std::uint64_t s : seeds) {
    for (double f : kStudyFractions) {
      t.add(row_from(fraction_label(f), s, evaluate(s, config_.classes, config_.capacity, f, config_.noise_sigma)));
    }
  }
  const auto low = t.rows_for(fraction_label(0.4));
  const auto mid = t.rows_for(fraction_label(0.8));
  const auto full = t.rows_for(fraction_label(1.0));
  t.checks.push_back(count_seeds("set size at 0.4 >= set size at 1.0", seeds, [&](std::uint64_t s) {
    return row_of(low, s).mean_set_size >= row_of(full, s).mean_set_size;
  }));
  t.checks.push_back(count_seeds("set size non-increasing in fraction", seeds, [&](std::uint64_t s) {
    return row_of(low, s).mean_set_size >= row_of(mid, s).mean_set_size &&
           row_of(mid, s).mean_set_size >= row_of(full, s).mean_set_size;
  }));
  t.checks.push_back(count_seeds("conformal < classical at 0.4", seeds, [&](std::uint64_t s) {
    return row_of(low, s).conformal_rmse < row_of(low, s).classical_rmse;
  }));
  std::vector<double> classical_degrade, conformal_degrade;
  for (std::uint64_t s : seeds) {
    classical_degrade.push_back(row_of(low, s).classical_rmse / row_of(full, s).classical_rmse);
    conformal_degrade.push_back(row_of(low, s).conformal_rmse / row_of(full, s).conformal_rmse);
  }
  const bool degrade = median(classical_degrade) > median(conformal_degrade);
  t.checks.push_back({"classical degrades more from 1.0 to 0.4 (median)", degrade ? 1u : 0u, 1});
  return t;
}

ResultTable StudyRunner::parametric_efficiency() {
  ResultTable t("capacity");
  const auto seeds = this->seeds();
  for (std::uint64_t s : seeds) {
    for (CapacityTier tier : kStudyTiers) {
      t.add(row_from(to_string(tier), s, evaluate(s, config_.classes, tier, config_.train_fraction, config_.noise_sigma)));
    }
  }
  auto spread = [&](std::uint64_t s, bool conformal) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (CapacityTier tier : kStudyTiers) {
      const ResultRow& r = row_of(t.rows_for(to_string(tier)), s);
      const double v = conformal ? r.conformal_rmse : r.classical_rmse;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi / lo;
  };
  t.checks.push_back(count_seeds("conformal spread <= 1.5", seeds,
                                 [&](std::uint64_t s) { return spread(s, true) <= 1.5; }));
  t.checks.push_back(count_seeds("classical spread > conformal spread", seeds,
                                 [&](std::uint64_t s) { return spread(s, false) > spread(s, true); }));
  t.checks.push_back(count_seeds("classical worst at an extreme tier", seeds, [&](std::uint64_t s) {
    const double mid = row_of(t.rows_for("medium"), s).classical_rmse;
    return row_of(t.rows_for("small"), s).classical_rmse >= mid || row_of(t.rows_for("large"), s).classical_rmse >= mid;
  }));
  return t;
}

ResultTable StudyRunner::noise_robustness() {
  ResultTable t("noise");
  const auto seeds = this->seeds();
  for (std::uint64_t s : seeds) {
    for (double sigma : kStudySigmas) {
      t.add(row_from(sigma_label(sigma), s, evaluate(s, config_.classes, config_.capacity, config_.train_fraction, sigma)));
    }
  }
  auto size = [&](double sigma, std::uint64_t s) { return row_of(t.rows_for(sigma_label(sigma)), s).mean_set_size; };
  t.checks.push_back(count_seeds("set size non-decreasing in sigma", seeds, [&](std::uint64_t s) {
    for (std::size_t i = 1; i < std::size(kStudySigmas); ++i) {
      if (size(kStudySigmas[i], s) < size(kStudySigmas[i - 1], s)) return false;
    }
    return true;
  }));
  t.checks.push_back(count_seeds("set size at 0.2 > set size at 0", seeds,
                                 [&](std::uint64_t s) { return size(0.2, s) > size(0.0, s); }));
  t.checks.push_back(count_seeds("conformal < classical at 0.2", seeds, [&](std::uint64_t s) {
    const ResultRow& r = row_of(t.rows_for(sigma_label(0.2)), s);
    return r.conformal_rmse < r.classical_rmse;
  }));
  return t;
}

ResultTable run_sample_efficiency(const ExperimentConfig& config) { return StudyRunner(config).sample_efficiency(); }

ResultTable run_parametric_efficiency(const ExperimentConfig& config) {
  return StudyRunner(config).parametric_efficiency();
}

ResultTable run_noise_robustness(const ExperimentConfig& config) { return StudyRunner(config).noise_robustness(); }

ResultTable run_study(const std::string& study, const ExperimentConfig& config) {
  if (study == "sample") return run_sample_efficiency(config);
  if (study == "capacity") return run_parametric_efficiency(config);
  if (study == "noise") return run_noise_robustness(config);
  fail(ErrorCode::kInvalidInput, "unknown study '" + study + "' (expected sample, capacity or noise)");
}

}  // namespace convo
