#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <vector>

namespace convo {

struct TrainingOptions {
  /// Width of the tanh hidden layer; 0 trains a linear model on the features.
  std::size_t hidden_width = 32;
  std::uint64_t seed = 0;
  double step = 0.5;
  std::size_t max_epochs = 1500;
  /// Stop when the relative loss decrease of an accepted step falls below this.
  double tolerance = 1e-6;
  double weight_decay = 1e-3;
};

struct TrainingTrace {
  std::vector<double> losses;  // loss after each accepted step, starting with the initial loss
  std::size_t halvings = 0;
  bool converged = false;
};

/// Per-column affine map to zero mean and unit variance. Columns with zero
/// variance keep scale 1.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  static Standardizer identity(Eigen::Index columns);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::RowVectorXd apply_row(const Eigen::RowVectorXd& x) const;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

/// Multilayer perceptron over a flat parameter vector:
/// input → [tanh(W₁x + b₁)] → W₂h + b₂. Parameter layout is W₁, b₁, W₂, b₂
/// with matrices column-major; without a hidden layer only W₂, b₂ exist.
class Mlp {
 public:
  Mlp() = default;
  Mlp(Eigen::Index inputs, Eigen::Index hidden, Eigen::Index outputs);

  Eigen::Index inputs() const { return inputs_; }
  Eigen::Index hidden() const { return hidden_; }
  Eigen::Index outputs() const { return outputs_; }
  Eigen::Index parameter_count() const;

  /// Hidden weights ~ N(0, 1/inputs); every other parameter zero, so the
  /// untrained outputs are identically zero.
  Eigen::VectorXd initial_parameters(std::uint64_t seed) const;

  /// Rows of `x` are samples. `hidden_out` receives the hidden activations.
  Eigen::MatrixXd forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& x,
                          Eigen::MatrixXd* hidden_out = nullptr) const;

  /// Gradient of Σ dL/dout · out with respect to the parameters.
  Eigen::VectorXd backward(const Eigen::VectorXd& params, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& hidden, const Eigen::MatrixXd& d_out) const;

  /// ½λ‖W‖² over weight matrices (biases excluded); adds its gradient to `grad`.
  double weight_penalty(const Eigen::VectorXd& params, double lambda, Eigen::VectorXd* grad) const;

 private:
  Eigen::Index inputs_ = 0;
  Eigen::Index hidden_ = 0;
  Eigen::Index outputs_ = 0;
};

/// Softmax per head over column slices of the output. `labels` is N × heads;
/// heads with `active[h] == false` are excluded from the loss.
struct HeadLayout {
  std::vector<Eigen::Index> offsets;
  std::vector<Eigen::Index> sizes;
  std::vector<bool> active;
};

double cross_entropy_objective(const Mlp& net, const HeadLayout& layout, const Eigen::MatrixXd& x,
                               const Eigen::MatrixXi& labels, double weight_decay,
                               const Eigen::VectorXd& params, Eigen::VectorXd* grad);

/// ½·mean over samples of the squared output error.
double squared_error_objective(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                               double weight_decay, const Eigen::VectorXd& params,
                               Eigen::VectorXd* grad);

/// Row-wise numerically stable softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

/// Full-batch gradient descent with a fixed step that is halved (and the step
/// retried) whenever the loss would increase. Accepted losses are therefore
/// non-increasing.
Eigen::VectorXd gradient_descent(const Objective& objective, Eigen::VectorXd params,
                                 const TrainingOptions& options, TrainingTrace* trace);

}  // namespace convo
