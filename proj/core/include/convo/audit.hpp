#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "convo/config.hpp"

namespace convo {

struct AuditOptions {
  double alpha = 0.1;
  std::size_t calib_size = 99;
  std::size_t test_size = 400;
  std::size_t resplits = 500;
  /// I.i.d. samples the classifier is trained on; never reused for calibration.
  std::size_t train_size = 300;
};

struct HeadAudit {
  std::string name;
  /// Constant heads are not calibrated and are left out of the band check.
  bool excluded = false;
  /// Mean over resplits of the test-set coverage.
  double mean = 0.0;
  /// Binomial standard error sqrt(m(1−m)/resplits) of that mean.
  double binomial_se = 0.0;
  /// Sample standard deviation of the per-resplit coverage over sqrt(resplits).
  double empirical_se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool in_band = false;
};

/// Marginal coverage of split-conformal sets on exchangeable data: poses
/// drawn i.i.d. along the loop, one pool split at random into calibration and
/// test blocks `resplits` times.
struct AuditReport {
  AuditOptions options;
  std::uint64_t seed = 0;
  /// rank / (n + 1), the exact expected coverage for distinct scores.
  double nominal = 0.0;
  std::vector<HeadAudit> heads;

  /// Every calibrated head lies in [1 − α − 3SE, 1 − α + 0.01 + 3SE].
  bool passed() const;
  nlohmann::json to_json() const;
};

/// Throws kInvalidInput on empty blocks, α outside (0, 1) or zero resplits.
AuditReport run_audit(const ExperimentConfig& config, const AuditOptions& options = {});

}  // namespace convo
