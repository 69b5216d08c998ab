#include "convo/multihead.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

#include "convo/error.hpp"

namespace convo {

using Eigen::Index;
using Eigen::MatrixXd;

HeadLayout MultiHeadModel::layout() const {
  HeadLayout l;
  Index off = 0;
  for (std::size_t h = 0; h < class_counts_.size(); ++h) {
    l.offsets.push_back(off);
    l.sizes.push_back(static_cast<Index>(class_counts_[h]));
    l.active.push_back(!constant_[h].has_value());
    off += static_cast<Index>(class_counts_[h]);
  }
  return l;
}

MultiHeadModel MultiHeadModel::untrained(std::size_t feature_count, std::vector<std::size_t> class_counts,
                                         const TrainingOptions& options) {
  require(feature_count > 0, "feature count must be positive");
  require(!class_counts.empty(), "at least one head required");
  MultiHeadModel m;
  std::size_t outputs = 0;
  for (auto k : class_counts) {
    require(k >= 1, "every head needs at least one class");
    outputs += k;
  }
  m.class_counts_ = std::move(class_counts);
  m.constant_.assign(m.class_counts_.size(), std::nullopt);
  for (std::size_t h = 0; h < m.class_counts_.size(); ++h) {
    if (m.class_counts_[h] == 1) m.constant_[h] = 0;
  }
  m.standardizer_ = Standardizer::identity(static_cast<Index>(feature_count));
  m.net_ = Mlp(static_cast<Index>(feature_count), static_cast<Index>(options.hidden_width),
               static_cast<Index>(outputs));
  m.params_ = m.net_.initial_parameters(options.seed);
  return m;
}

MultiHeadModel train_multihead(const MatrixXd& features, std::span<const ClassLabel> labels,
                               std::span<const std::size_t> class_counts, const TrainingOptions& options) {
  const auto n = static_cast<std::size_t>(features.rows());
  require(n == labels.size(), "features and labels must have the same length");
  require(!class_counts.empty(), "at least one head required");
  const std::size_t max_k = *std::max_element(class_counts.begin(), class_counts.end());
  require(n >= std::max<std::size_t>(max_k, 1), "need at least as many samples as classes per head");
  require(features.allFinite(), "features must be finite");

  MultiHeadModel m = MultiHeadModel::untrained(static_cast<std::size_t>(features.cols()),
                                               {class_counts.begin(), class_counts.end()}, options);
  const std::size_t heads = class_counts.size();
  Eigen::MatrixXi label_matrix(static_cast<Index>(n), static_cast<Index>(heads));
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i].classes.size() == heads, "label has the wrong number of heads");
    for (std::size_t h = 0; h < heads; ++h) {
      require(labels[i].classes[h] < class_counts[h], "label class out of range");
      label_matrix(static_cast<Index>(i), static_cast<Index>(h)) = static_cast<int>(labels[i].classes[h]);
    }
  }
  for (std::size_t h = 0; h < heads; ++h) {
    const auto col = label_matrix.col(static_cast<Index>(h));
    if ((col.array() == col(0)).all()) m.constant_[h] = static_cast<std::size_t>(col(0));
  }

  m.standardizer_ = Standardizer::fit(features);
  const MatrixXd x = m.standardizer_.apply(features);
  const HeadLayout layout = m.layout();
  const Mlp& net = m.net_;
  const Objective objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
    return cross_entropy_objective(net, layout, x, label_matrix, options.weight_decay, p, g);
  };
  m.params_ = gradient_descent(objective, m.params_, options, &m.trace_);
  return m;
}

std::vector<MatrixXd> MultiHeadModel::predict_scores_batch(const MatrixXd& features) const {
  const MatrixXd out = net_.forward(params_, standardizer_.apply(features));
  std::vector<MatrixXd> scores;
  Index off = 0;
  for (std::size_t h = 0; h < class_counts_.size(); ++h) {
    const auto k = static_cast<Index>(class_counts_[h]);
    if (constant_[h]) {
      MatrixXd one_hot = MatrixXd::Zero(features.rows(), k);
      one_hot.col(static_cast<Index>(*constant_[h])).setOnes();
      scores.push_back(std::move(one_hot));
    } else {
      scores.push_back(softmax_rows(out.middleCols(off, k)));
    }
    off += k;
  }
  return scores;
}

HeadScores MultiHeadModel::predict_scores(const FeatureVector& feature) const {
  const auto batch = predict_scores_batch(feature.transpose());
  HeadScores out;
  out.reserve(batch.size());
  for (const auto& m : batch) out.push_back(m.row(0).transpose());
  return out;
}

nlohmann::json MultiHeadModel::to_json() const {
  nlohmann::json constants = nlohmann::json::array();
  for (const auto& c : constant_) constants.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
  return {{"format", "convo.multihead"},
          {"version", 1},
          {"inputs", net_.inputs()},
          {"hidden", net_.hidden()},
          {"class_counts", class_counts_},
          {"constant_class", constants},
          {"standardizer", standardizer_.to_json()},
          {"parameters", std::vector<double>(params_.data(), params_.data() + params_.size())}};
}

MultiHeadModel MultiHeadModel::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "convo.multihead" && j.at("version") == 1, "unsupported multihead document");
    MultiHeadModel m;
    m.class_counts_ = j.at("class_counts").get<std::vector<std::size_t>>();
    std::size_t outputs = 0;
    for (auto k : m.class_counts_) outputs += k;
    m.net_ = Mlp(j.at("inputs").get<Index>(), j.at("hidden").get<Index>(), static_cast<Index>(outputs));
    for (const auto& c : j.at("constant_class")) {
      m.constant_.push_back(c.is_null() ? std::nullopt : std::optional<std::size_t>(c.get<std::size_t>()));
    }
    require(m.constant_.size() == m.class_counts_.size(), "constant_class length mismatch");
    m.standardizer_ = Standardizer::from_json(j.at("standardizer"));
    const auto p = j.at("parameters").get<std::vector<double>>();
    require(static_cast<Index>(p.size()) == m.net_.parameter_count(), "parameter count mismatch");
    m.params_ = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size()));
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed multihead model: ") + e.what());
  }
}

HeadScores predict_scores(const MultiHeadModel& model, const FeatureVector& feature) {
  return model.predict_scores(feature);
}

}  // namespace convo
