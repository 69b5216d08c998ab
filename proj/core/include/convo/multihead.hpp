#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <span>
#include <vector>

#include "convo/discretize.hpp"
#include "convo/features.hpp"
#include "convo/network.hpp"

namespace convo {

/// Per-head probability vectors, one per pose dimension.
using HeadScores = std::vector<Eigen::VectorXd>;

/// Shared trunk feeding one softmax head per discretized dimension.
/// A head whose training labels contain a single class (or whose dimension has
/// a single class) is a constant one-hot predictor.
class MultiHeadModel {
 public:
  MultiHeadModel() = default;

  /// Untrained model: zero output layer, hence exactly uniform scores.
  static MultiHeadModel untrained(std::size_t feature_count, std::vector<std::size_t> class_counts,
                                  const TrainingOptions& options);

  std::size_t heads() const { return class_counts_.size(); }
  std::size_t feature_count() const { return static_cast<std::size_t>(net_.inputs()); }
  const std::vector<std::size_t>& class_counts() const { return class_counts_; }
  std::size_t hidden_width() const { return static_cast<std::size_t>(net_.hidden()); }
  const Eigen::VectorXd& parameters() const { return params_; }
  /// Class emitted by a constant head, if the head is constant.
  const std::optional<std::size_t>& constant_class(std::size_t head) const { return constant_[head]; }
  const TrainingTrace& trace() const { return trace_; }

  HeadScores predict_scores(const FeatureVector& feature) const;
  /// One N × k_h matrix per head.
  std::vector<Eigen::MatrixXd> predict_scores_batch(const Eigen::MatrixXd& features) const;

  nlohmann::json to_json() const;
  static MultiHeadModel from_json(const nlohmann::json& j);

  friend MultiHeadModel train_multihead(const Eigen::MatrixXd& features, std::span<const ClassLabel> labels,
                                        std::span<const std::size_t> class_counts,
                                        const TrainingOptions& options);

 private:
  HeadLayout layout() const;

  Standardizer standardizer_;
  Mlp net_;
  Eigen::VectorXd params_;
  std::vector<std::size_t> class_counts_;
  std::vector<std::optional<std::size_t>> constant_;
  TrainingTrace trace_;
};

/// Per-head cross-entropy over a shared tanh trunk, trained by full-batch
/// gradient descent. Rows of `features` are samples. Deterministic in
/// `options.seed`. Throws kInvalidInput on size mismatches or fewer samples
/// than the largest class count.
MultiHeadModel train_multihead(const Eigen::MatrixXd& features, std::span<const ClassLabel> labels,
                               std::span<const std::size_t> class_counts, const TrainingOptions& options);

HeadScores predict_scores(const MultiHeadModel& model, const FeatureVector& feature);

}  // namespace convo
