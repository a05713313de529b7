#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mixmort/core.hpp"
#include "mixmort/linalg.hpp"
#include "mixmort/rng.hpp"

namespace mixmort {

struct InvalidConfig : Error {
  using Error::Error;
};
struct BatchTooSmall : Error {
  using Error::Error;
};
struct NonFiniteGradient : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// Defaults reproduce the published hyperparameters where stated; the L2
// coefficient, init range and batch-norm constants are pinned conventions.
struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 100;
  int epochs = 60;
  double dropout_rate = 0.3;
  double l2_lambda = 1e-4;
  std::uint64_t seed = 0;
  std::vector<int> hidden_sizes = {400, 400};
  double init_range = 0.05;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  void check() const {
    if (learning_rate < 0) throw InvalidConfig("learning_rate must be >= 0");
    if (batch_size < 2) throw InvalidConfig("batch_size must be >= 2");
    if (epochs < 0) throw InvalidConfig("epochs must be >= 0");
    if (dropout_rate < 0 || dropout_rate >= 1)
      throw InvalidConfig("dropout_rate must be in [0, 1)");
    if (l2_lambda < 0) throw InvalidConfig("l2_lambda must be >= 0");
    if (init_range <= 0) throw InvalidConfig("init_range must be > 0");
    for (int h : hidden_sizes)
      if (h <= 0) throw InvalidConfig("hidden layer sizes must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct DenseLayer {
  Eigen::MatrixXd weights; // out x in
  Eigen::VectorXd bias;    // out
};

struct BatchNormLayer {
  Eigen::VectorXd gamma, beta;
  Eigen::VectorXd running_mean, running_var;
  double epsilon = 1e-5;
  double momentum = 0.9;
};

enum class Mode : std::uint8_t { Train, Infer };

// Hidden blocks are Dense -> BatchNorm -> tanh -> Dropout; the classifier is
// Dense(2) -> softmax.
struct MlpModel {
  int input_dim = 0;
  TrainConfig cfg;
  std::vector<DenseLayer> hidden;
  std::vector<BatchNormLayer> norms;
  DenseLayer output;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : hidden)
      n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    for (const auto& bn : norms)
      n += static_cast<std::size_t>(bn.gamma.size() + bn.beta.size());
    n += static_cast<std::size_t>(output.weights.size() + output.bias.size());
    return n;
  }
};

inline MlpModel init_model(int input_dim, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.check();
  if (input_dim < 1) throw InvalidConfig("input_dim must be >= 1");
  Rng rng(seed);
  auto uniform_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        m(r, c) = rng.uniform(-cfg.init_range, cfg.init_range);
    return m;
  };

  MlpModel model;
  model.input_dim = input_dim;
  model.cfg = cfg;
  int in = input_dim;
  for (int h : cfg.hidden_sizes) {
    DenseLayer dense;
    dense.weights = uniform_matrix(h, in);
    dense.bias = Eigen::VectorXd::Zero(h);
    model.hidden.push_back(std::move(dense));

    BatchNormLayer bn;
    bn.gamma = Eigen::VectorXd::Ones(h);
    bn.beta = Eigen::VectorXd::Zero(h);
    bn.running_mean = Eigen::VectorXd::Zero(h);
    bn.running_var = Eigen::VectorXd::Ones(h);
    bn.epsilon = cfg.bn_epsilon;
    bn.momentum = cfg.bn_momentum;
    model.norms.push_back(std::move(bn));
    in = h;
  }
  model.output.weights = uniform_matrix(2, in);
  model.output.bias = Eigen::VectorXd::Zero(2);
  return model;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

// Per-layer caches kept alive for the backward pass.
struct ForwardTrace {
  Eigen::MatrixXd input;
  std::vector<Eigen::RowVectorXd> bn_inv_std;
  std::vector<Eigen::MatrixXd> xhat;       // normalized pre-activation
  std::vector<Eigen::MatrixXd> act;        // tanh output
  std::vector<Eigen::MatrixXd> drop_scale; // 0 or 1/(1-p) per entry; empty = off
  std::vector<Eigen::MatrixXd> block_out;  // input to the next layer
  Eigen::MatrixXd probs;
};

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd shifted = logits.colwise() - logits.rowwise().maxCoeff();
  Eigen::MatrixXd e = shifted.array().exp().matrix();
  return (e.array().colwise() / e.rowwise().sum().array()).matrix();
}

// Train mode uses batch statistics (updating the running ones) and inverted
// dropout; Infer mode uses running statistics with dropout disabled.
inline Eigen::MatrixXd forward(MlpModel& model, const Eigen::MatrixXd& batch,
                               Mode mode, Rng* rng = nullptr,
                               ForwardTrace* trace = nullptr) {
  if (batch.cols() != model.input_dim)
    throw InvalidConfig("forward: batch width " + std::to_string(batch.cols()) +
                        " != model input dim " + std::to_string(model.input_dim));
  const Eigen::Index b = batch.rows();
  if (mode == Mode::Train && b < 2)
    throw BatchTooSmall("forward: train-mode batch needs >= 2 rows, got " +
                        std::to_string(b));
  const double p = model.cfg.dropout_rate;
  if (mode == Mode::Train && p > 0 && rng == nullptr)
    throw InvalidConfig("forward: train mode with dropout needs an rng");

  if (trace) {
    trace->input = batch;
    trace->bn_inv_std.clear();
    trace->xhat.clear();
    trace->act.clear();
    trace->drop_scale.clear();
    trace->block_out.clear();
  }

  Eigen::MatrixXd x = batch;
  for (std::size_t i = 0; i < model.hidden.size(); ++i) {
    const DenseLayer& dense = model.hidden[i];
    BatchNormLayer& bn = model.norms[i];

    Eigen::MatrixXd z = x * dense.weights.transpose();
    z.rowwise() += dense.bias.transpose();

    Eigen::RowVectorXd mean, inv_std;
    Eigen::MatrixXd xhat;
    if (mode == Mode::Train) {
      mean = z.colwise().mean();
      Eigen::MatrixXd centered = z.rowwise() - mean;
      Eigen::RowVectorXd var = centered.cwiseProduct(centered).colwise().mean();
      bn.running_mean =
          bn.momentum * bn.running_mean + (1 - bn.momentum) * mean.transpose();
      bn.running_var =
          bn.momentum * bn.running_var + (1 - bn.momentum) * var.transpose();
      inv_std = (var.array() + bn.epsilon).rsqrt().matrix();
      xhat = (centered.array().rowwise() * inv_std.array()).matrix();
    } else {
      mean = bn.running_mean.transpose();
      inv_std =
          (bn.running_var.transpose().array() + bn.epsilon).rsqrt().matrix();
      xhat = ((z.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
    }
    Eigen::MatrixXd bn_out =
        (xhat.array().rowwise() * bn.gamma.transpose().array()).matrix();
    bn_out.rowwise() += bn.beta.transpose();

    Eigen::MatrixXd a = bn_out.array().tanh().matrix();

    Eigen::MatrixXd out;
    Eigen::MatrixXd scale;
    if (mode == Mode::Train && p > 0) {
      scale.resize(a.rows(), a.cols());
      const double keep_scale = 1.0 / (1.0 - p);
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c)
          scale(r, c) = rng->bernoulli(p) ? 0.0 : keep_scale;
      out = a.cwiseProduct(scale);
    } else {
      out = a;
    }

    if (trace) {
      trace->bn_inv_std.push_back(std::move(inv_std));
      trace->xhat.push_back(std::move(xhat));
      trace->act.push_back(std::move(a));
      trace->drop_scale.push_back(std::move(scale));
      trace->block_out.push_back(out);
    }
    x = std::move(out);
  }

  Eigen::MatrixXd logits = x * model.output.weights.transpose();
  logits.rowwise() += model.output.bias.transpose();
  Eigen::MatrixXd probs = softmax_rows(logits);
  if (trace) trace->probs = probs;
  return probs;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

// Mean categorical cross-entropy plus (lambda/2) * sum of squared hidden
// weights. Biases, gamma and beta carry no penalty; neither does the
// classification layer (the paper regularizes the hidden layers).
inline double loss(const Eigen::MatrixXd& probs, const std::vector<int>& labels,
                   const MlpModel& model, const TrainConfig& cfg) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size())
    throw InvalidConfig("loss: probs/labels size mismatch");
  double ce = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p_true = probs(static_cast<Eigen::Index>(i), labels[i] ? 1 : 0);
    ce -= std::log(std::max(p_true, 1e-12));
  }
  ce /= static_cast<double>(labels.size());

  double penalty = 0.0;
  for (const auto& l : model.hidden) penalty += l.weights.squaredNorm();
  return ce + 0.5 * cfg.l2_lambda * penalty;
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

struct Gradients {
  std::vector<Eigen::MatrixXd> hidden_w;
  std::vector<Eigen::VectorXd> hidden_b;
  std::vector<Eigen::VectorXd> gamma;
  std::vector<Eigen::VectorXd> beta;
  Eigen::MatrixXd out_w;
  Eigen::VectorXd out_b;
};

namespace detail {

inline void check_finite(const Gradients& g) {
  for (const auto& m : g.hidden_w)
    if (!m.allFinite()) throw NonFiniteGradient("hidden weight gradient");
  for (const auto& v : g.hidden_b)
    if (!v.allFinite()) throw NonFiniteGradient("hidden bias gradient");
  for (const auto& v : g.gamma)
    if (!v.allFinite()) throw NonFiniteGradient("batch-norm gamma gradient");
  for (const auto& v : g.beta)
    if (!v.allFinite()) throw NonFiniteGradient("batch-norm beta gradient");
  if (!g.out_w.allFinite() || !g.out_b.allFinite())
    throw NonFiniteGradient("output layer gradient");
}

} // namespace detail

// Analytic backpropagation through softmax + cross-entropy, dropout, tanh,
// batch norm (batch statistics) and the dense layers, including the L2 term.
// Runs its own train-mode forward; dropout masks are shared between the two
// passes through the trace.
inline std::pair<double, Gradients> compute_gradients(MlpModel& model,
                                                      const Eigen::MatrixXd& batch,
                                                      const std::vector<int>& labels,
                                                      const TrainConfig& cfg,
                                                      Rng& rng) {
  ForwardTrace trace;
  forward(model, batch, Mode::Train, &rng, &trace);
  const double batch_loss = loss(trace.probs, labels, model, cfg);

  const Eigen::Index b = batch.rows();
  const double inv_b = 1.0 / static_cast<double>(b);
  const std::size_t n_hidden = model.hidden.size();

  Gradients grads;
  grads.hidden_w.resize(n_hidden);
  grads.hidden_b.resize(n_hidden);
  grads.gamma.resize(n_hidden);
  grads.beta.resize(n_hidden);

  // softmax + cross-entropy
  Eigen::MatrixXd dlogits = trace.probs;
  for (Eigen::Index i = 0; i < b; ++i)
    dlogits(i, labels[static_cast<std::size_t>(i)] ? 1 : 0) -= 1.0;
  dlogits *= inv_b;

  const Eigen::MatrixXd& last = n_hidden > 0 ? trace.block_out.back() : trace.input;
  grads.out_w = dlogits.transpose() * last;
  grads.out_b = dlogits.colwise().sum().transpose();

  Eigen::MatrixXd dx = dlogits * model.output.weights;

  for (std::size_t i = n_hidden; i-- > 0;) {
    // dropout
    Eigen::MatrixXd da;
    if (trace.drop_scale[i].size() > 0)
      da = dx.cwiseProduct(trace.drop_scale[i]);
    else
      da = std::move(dx);
    // tanh
    Eigen::MatrixXd dbn =
        (da.array() * (1.0 - trace.act[i].array().square())).matrix();

    // batch norm with batch statistics
    const Eigen::MatrixXd& xhat = trace.xhat[i];
    grads.gamma[i] = dbn.cwiseProduct(xhat).colwise().sum().transpose();
    grads.beta[i] = dbn.colwise().sum().transpose();

    Eigen::MatrixXd dxhat =
        (dbn.array().rowwise() * model.norms[i].gamma.transpose().array()).matrix();
    Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
    Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(xhat).colwise().sum();

    Eigen::MatrixXd term = dxhat * static_cast<double>(b);
    term.rowwise() -= sum_dxhat;
    term -= (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
    Eigen::MatrixXd dz =
        (term.array().rowwise() * (trace.bn_inv_std[i] * inv_b).array()).matrix();

    // dense
    const Eigen::MatrixXd& x_in = i == 0 ? trace.input : trace.block_out[i - 1];
    grads.hidden_w[i] = dz.transpose() * x_in + cfg.l2_lambda * model.hidden[i].weights;
    grads.hidden_b[i] = dz.colwise().sum().transpose();
    dx = dz * model.hidden[i].weights;
  }

  detail::check_finite(grads);
  return {batch_loss, grads};
}

inline void apply_step(MlpModel& model, const Gradients& grads, double lr) {
  for (std::size_t i = 0; i < model.hidden.size(); ++i) {
    model.hidden[i].weights -= lr * grads.hidden_w[i];
    model.hidden[i].bias -= lr * grads.hidden_b[i];
    model.norms[i].gamma -= lr * grads.gamma[i];
    model.norms[i].beta -= lr * grads.beta[i];
  }
  model.output.weights -= lr * grads.out_w;
  model.output.bias -= lr * grads.out_b;
}

inline double backward_and_step(MlpModel& model, const Eigen::MatrixXd& batch,
                                const std::vector<int>& labels,
                                const TrainConfig& cfg, Rng& rng) {
  auto [batch_loss, grads] = compute_gradients(model, batch, labels, cfg, rng);
  apply_step(model, grads, cfg.learning_rate);
  return batch_loss;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

// Shuffles each epoch with the seeded generator and steps through batches of
// cfg.batch_size; a trailing batch below 2 rows is skipped (batch norm needs
// batch statistics). Returns the per-epoch mean sample loss.
inline std::vector<double> train(MlpModel& model, const Eigen::MatrixXd& features,
                                 const std::vector<int>& labels,
                                 const TrainConfig& cfg) {
  cfg.check();
  const std::size_t n = labels.size();
  if (n == 0) throw InvalidConfig("train: empty dataset");
  if (features.rows() != static_cast<Eigen::Index>(n))
    throw InvalidConfig("train: features/labels size mismatch");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t bsize =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n - start);
      if (bsize < 2) continue;
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(bsize), features.cols());
      std::vector<int> batch_labels(bsize);
      for (std::size_t i = 0; i < bsize; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) =
            features.row(static_cast<Eigen::Index>(order[start + i]));
        batch_labels[i] = labels[order[start + i]];
      }
      const double batch_loss = backward_and_step(model, batch, batch_labels, cfg, rng);
      loss_sum += batch_loss * static_cast<double>(bsize);
      seen += bsize;
    }
    trace.push_back(seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0);
  }
  return trace;
}

inline std::vector<double> train(MlpModel& model, const LabeledDataset& dataset,
                                 const TrainConfig& cfg) {
  dataset.check();
  return train(model, to_matrix(dataset.features), dataset.labels, cfg);
}

// Positive-class probability per row (inference mode).
inline std::vector<double> predict_proba(const MlpModel& model,
                                         const Eigen::MatrixXd& rows) {
  MlpModel copy = model; // Infer mode never touches running statistics
  Eigen::MatrixXd probs = forward(copy, rows, Mode::Infer);
  std::vector<double> scores(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    scores[static_cast<std::size_t>(i)] = probs(i, 1);
  return scores;
}

inline std::vector<double> predict_proba(const MlpModel& model,
                                         const FeatureMatrix& rows) {
  return predict_proba(model, to_matrix(rows));
}

} // namespace mixmort
