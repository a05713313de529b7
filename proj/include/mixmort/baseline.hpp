#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mixmort/core.hpp"
#include "mixmort/linalg.hpp"
#include "mixmort/mlp.hpp" // NonFiniteGradient, InvalidConfig

namespace mixmort {

// L2-regularized binary logistic regression fit by full-batch gradient
// descent; the shallow-learner stand-in for the WEKA comparators.
struct LogisticConfig {
  double l2_lambda = 1e-4;
  double learning_rate = 0.1;
  int max_iters = 5000;
  double tolerance = 1e-6;

  void check() const {
    if (learning_rate < 0) throw InvalidConfig("learning_rate must be >= 0");
    if (max_iters < 0) throw InvalidConfig("max_iters must be >= 0");
    if (l2_lambda < 0) throw InvalidConfig("l2_lambda must be >= 0");
    if (tolerance < 0) throw InvalidConfig("tolerance must be >= 0");
  }
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  LogisticConfig cfg;
  int iters_run = 0;
};

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// Minimizes mean binary cross-entropy + (lambda/2)*||w||^2 from a zero
// initialization; stops when the gradient norm drops below tolerance.
inline LogisticModel fit_logistic(const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  const LogisticConfig& cfg = {}) {
  cfg.check();
  const Eigen::Index n = features.rows();
  if (n == 0 || labels.size() != static_cast<std::size_t>(n))
    throw InvalidConfig("fit_logistic: empty dataset or label mismatch");

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  LogisticModel model;
  model.cfg = cfg;
  model.weights = Eigen::VectorXd::Zero(features.cols());
  model.bias = 0.0;

  const double inv_n = 1.0 / static_cast<double>(n);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    Eigen::VectorXd scores = sigmoid(features * model.weights +
                                     Eigen::VectorXd::Constant(n, model.bias));
    Eigen::VectorXd residual = scores - y;
    Eigen::VectorXd grad_w =
        features.transpose() * residual * inv_n + cfg.l2_lambda * model.weights;
    const double grad_b = residual.sum() * inv_n;

    if (!grad_w.allFinite() || !std::isfinite(grad_b))
      throw NonFiniteGradient("fit_logistic: non-finite gradient at iteration " +
                              std::to_string(iter));

    const double grad_norm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
    if (grad_norm < cfg.tolerance) break;

    model.weights -= cfg.learning_rate * grad_w;
    model.bias -= cfg.learning_rate * grad_b;
    model.iters_run = iter + 1;
  }
  return model;
}

inline LogisticModel fit_logistic(const LabeledDataset& dataset,
                                  const LogisticConfig& cfg = {}) {
  dataset.check();
  return fit_logistic(to_matrix(dataset.features), dataset.labels, cfg);
}

inline std::vector<double> predict_logistic(const LogisticModel& model,
                                            const Eigen::MatrixXd& rows) {
  Eigen::VectorXd scores =
      sigmoid(rows * model.weights + Eigen::VectorXd::Constant(rows.rows(), model.bias));
  return {scores.data(), scores.data() + scores.size()};
}

inline std::vector<double> predict_logistic(const LogisticModel& model,
                                            const FeatureMatrix& rows) {
  return predict_logistic(model, to_matrix(rows));
}

// Mean BCE + L2, exposed for gradient and descent tests.
inline double logistic_loss(const LogisticModel& model, const Eigen::MatrixXd& features,
                            const std::vector<int>& labels) {
  const Eigen::Index n = features.rows();
  Eigen::VectorXd scores = sigmoid(features * model.weights +
                                   Eigen::VectorXd::Constant(n, model.bias));
  double ce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = labels[static_cast<std::size_t>(i)]
                         ? scores(i)
                         : 1.0 - scores(i);
    ce -= std::log(std::max(p, 1e-12));
  }
  ce /= static_cast<double>(n);
  return ce + 0.5 * model.cfg.l2_lambda * model.weights.squaredNorm();
}

} // namespace mixmort
