#include "convo/network.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

#include "convo/error.hpp"

namespace convo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Standardizer Standardizer::fit(const MatrixXd& x) {
  require(x.rows() > 0, "cannot standardize an empty sample");
  Standardizer s;
  s.mean = x.colwise().mean();
  const MatrixXd centered = x.rowwise() - s.mean;
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
  for (Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(Index columns) {
  return {Eigen::RowVectorXd::Zero(columns), Eigen::RowVectorXd::Ones(columns)};
}

MatrixXd Standardizer::apply(const MatrixXd& x) const {
  require(x.cols() == mean.size(), "feature length does not match the fitted model");
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

Eigen::RowVectorXd Standardizer::apply_row(const Eigen::RowVectorXd& x) const {
  require(x.size() == mean.size(), "feature length does not match the fitted model");
  return (x - mean).array() / scale.array();
}

nlohmann::json Standardizer::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto s = j.at("scale").get<std::vector<double>>();
  require(m.size() == s.size(), "standardizer mean/scale length mismatch");
  Standardizer out;
  out.mean = Eigen::Map<const Eigen::RowVectorXd>(m.data(), static_cast<Index>(m.size()));
  out.scale = Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Index>(s.size()));
  return out;
}

Mlp::Mlp(Index inputs, Index hidden, Index outputs) : inputs_(inputs), hidden_(hidden), outputs_(outputs) {
  require(inputs > 0 && outputs > 0 && hidden >= 0, "invalid network shape");
}

Index Mlp::parameter_count() const {
  const Index trunk = hidden_ > 0 ? hidden_ * inputs_ + hidden_ : 0;
  const Index width = hidden_ > 0 ? hidden_ : inputs_;
  return trunk + outputs_ * width + outputs_;
}

VectorXd Mlp::initial_parameters(std::uint64_t seed) const {
  VectorXd p = VectorXd::Zero(parameter_count());
  if (hidden_ > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(inputs_)));
    for (Index i = 0; i < hidden_ * inputs_; ++i) p(i) = normal(rng);
  }
  return p;
}

MatrixXd Mlp::forward(const VectorXd& p, const MatrixXd& x, MatrixXd* hidden_out) const {
  require(x.cols() == inputs_, "input width does not match the network");
  Index off = 0;
  MatrixXd h;
  if (hidden_ > 0) {
    Eigen::Map<const MatrixXd> w1(p.data(), hidden_, inputs_);
    Eigen::Map<const VectorXd> b1(p.data() + hidden_ * inputs_, hidden_);
    off = hidden_ * inputs_ + hidden_;
    h = ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
  }
  const MatrixXd& trunk = hidden_ > 0 ? h : x;
  const Index width = trunk.cols();
  Eigen::Map<const MatrixXd> w2(p.data() + off, outputs_, width);
  Eigen::Map<const VectorXd> b2(p.data() + off + outputs_ * width, outputs_);
  MatrixXd out = (trunk * w2.transpose()).rowwise() + b2.transpose();
  if (hidden_out) *hidden_out = std::move(h);
  return out;
}

VectorXd Mlp::backward(const VectorXd& p, const MatrixXd& x, const MatrixXd& h, const MatrixXd& d_out) const {
  VectorXd g = VectorXd::Zero(parameter_count());
  Index off = 0;
  if (hidden_ > 0) off = hidden_ * inputs_ + hidden_;
  const MatrixXd& trunk = hidden_ > 0 ? h : x;
  const Index width = trunk.cols();

  Eigen::Map<MatrixXd> gw2(g.data() + off, outputs_, width);
  Eigen::Map<VectorXd> gb2(g.data() + off + outputs_ * width, outputs_);
  gw2.noalias() = d_out.transpose() * trunk;
  gb2 = d_out.colwise().sum().transpose();

  if (hidden_ > 0) {
    Eigen::Map<const MatrixXd> w2(p.data() + off, outputs_, width);
    const MatrixXd d_hidden = ((d_out * w2).array() * (1.0 - h.array().square())).matrix();
    Eigen::Map<MatrixXd> gw1(g.data(), hidden_, inputs_);
    Eigen::Map<VectorXd> gb1(g.data() + hidden_ * inputs_, hidden_);
    gw1.noalias() = d_hidden.transpose() * x;
    gb1 = d_hidden.colwise().sum().transpose();
  }
  return g;
}

double Mlp::weight_penalty(const VectorXd& p, double lambda, VectorXd* grad) const {
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  auto add_block = [&](Index off, Index n) {
    const auto block = p.segment(off, n);
    sum += block.squaredNorm();
    if (grad) grad->segment(off, n) += lambda * block;
  };
  Index off = 0;
  if (hidden_ > 0) {
    add_block(0, hidden_ * inputs_);
    off = hidden_ * inputs_ + hidden_;
  }
  add_block(off, outputs_ * (hidden_ > 0 ? hidden_ : inputs_));
  return 0.5 * lambda * sum;
}

MatrixXd softmax_rows(const MatrixXd& logits) {
  MatrixXd out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp();
  return out.array().colwise() / out.rowwise().sum().array();
}

double cross_entropy_objective(const Mlp& net, const HeadLayout& layout, const MatrixXd& x,
                               const Eigen::MatrixXi& labels, double weight_decay, const VectorXd& params,
                               VectorXd* grad) {
  const Index n = x.rows();
  MatrixXd hidden;
  const MatrixXd out = net.forward(params, x, &hidden);
  MatrixXd d_out = MatrixXd::Zero(n, out.cols());
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t h = 0; h < layout.sizes.size(); ++h) {
    if (!layout.active[h]) continue;
    const Index off = layout.offsets[h], k = layout.sizes[h];
    const auto logits = out.middleCols(off, k);
    const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    const MatrixXd shifted = logits.colwise() - row_max;
    const Eigen::VectorXd log_z = shifted.array().exp().rowwise().sum().log();
    for (Index i = 0; i < n; ++i) loss -= (shifted(i, labels(i, static_cast<Index>(h))) - log_z(i)) * inv_n;
    if (grad) {
      MatrixXd probs = (shifted.colwise() - log_z).array().exp();
      for (Index i = 0; i < n; ++i) probs(i, labels(i, static_cast<Index>(h))) -= 1.0;
      d_out.middleCols(off, k) = probs * inv_n;
    }
  }
  if (grad) *grad = net.backward(params, x, hidden, d_out);
  loss += net.weight_penalty(params, weight_decay, grad);
  return loss;
}

double squared_error_objective(const Mlp& net, const MatrixXd& x, const MatrixXd& y, double weight_decay,
                               const VectorXd& params, VectorXd* grad) {
  MatrixXd hidden;
  const MatrixXd out = net.forward(params, x, &hidden);
  const MatrixXd diff = out - y;
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  double loss = 0.5 * diff.squaredNorm() * inv_n;
  if (grad) *grad = net.backward(params, x, hidden, diff * inv_n);
  loss += net.weight_penalty(params, weight_decay, grad);
  return loss;
}

VectorXd gradient_descent(const Objective& objective, VectorXd params, const TrainingOptions& options,
                          TrainingTrace* trace) {
  TrainingTrace local;
  TrainingTrace& t = trace ? *trace : local;
  t = {};
  VectorXd grad;
  double loss = objective(params, &grad);
  t.losses.push_back(loss);
  double step = options.step;
  std::size_t epoch = 0;
  while (epoch < options.max_epochs) {
    const VectorXd candidate = params - step * grad;
    VectorXd candidate_grad;
    const double candidate_loss = objective(candidate, &candidate_grad);
    if (!(candidate_loss <= loss)) {
      step *= 0.5;
      ++t.halvings;
      if (step < 1e-12) break;
      continue;
    }
    ++epoch;
    const double rel = (loss - candidate_loss) / std::max(std::abs(loss), 1e-300);
    params = candidate;
    grad = std::move(candidate_grad);
    loss = candidate_loss;
    t.losses.push_back(loss);
    if (rel < options.tolerance) {
      t.converged = true;
      break;
    }
  }
  return params;
}

}  // namespace convo
