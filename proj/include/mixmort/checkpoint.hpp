#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "mixmort/baseline.hpp"
#include "mixmort/csv.hpp"
#include "mixmort/mlp.hpp"

namespace mixmort {

// Versioned JSON checkpoints. nlohmann serializes doubles in shortest
// round-trip form, so a load reproduces predictions bit-identically.

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from(const nlohmann::json& j) {
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j.at(r).at(c).get<double>();
  return m;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Eigen::VectorXd vector_from(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

inline nlohmann::json train_config_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"dropout_rate", cfg.dropout_rate},
          {"l2_lambda", cfg.l2_lambda},
          {"seed", cfg.seed},
          {"hidden_sizes", cfg.hidden_sizes},
          {"init_range", cfg.init_range},
          {"bn_momentum", cfg.bn_momentum},
          {"bn_epsilon", cfg.bn_epsilon}};
}

inline TrainConfig train_config_from(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.l2_lambda = j.at("l2_lambda").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
  cfg.init_range = j.at("init_range").get<double>();
  cfg.bn_momentum = j.at("bn_momentum").get<double>();
  cfg.bn_epsilon = j.at("bn_epsilon").get<double>();
  return cfg;
}

} // namespace detail

inline void save_checkpoint(const MlpModel& model, const std::string& path) {
  nlohmann::json hidden = nlohmann::json::array();
  for (const auto& l : model.hidden)
    hidden.push_back({{"weights", detail::matrix_json(l.weights)},
                      {"bias", detail::vector_json(l.bias)}});
  nlohmann::json norms = nlohmann::json::array();
  for (const auto& bn : model.norms)
    norms.push_back({{"gamma", detail::vector_json(bn.gamma)},
                     {"beta", detail::vector_json(bn.beta)},
                     {"running_mean", detail::vector_json(bn.running_mean)},
                     {"running_var", detail::vector_json(bn.running_var)},
                     {"epsilon", bn.epsilon},
                     {"momentum", bn.momentum}});
  nlohmann::json j{{"format", "mixmort-checkpoint"},
                   {"version", 1},
                   {"kind", "mlp"},
                   {"input_dim", model.input_dim},
                   {"config", detail::train_config_json(model.cfg)},
                   {"hidden", std::move(hidden)},
                   {"norms", std::move(norms)},
                   {"output",
                    {{"weights", detail::matrix_json(model.output.weights)},
                     {"bias", detail::vector_json(model.output.bias)}}}};
  csv::write_file(path, j.dump(2) + "\n");
}

inline MlpModel load_mlp_checkpoint(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(csv::read_file(path));
  if (j.at("format") != "mixmort-checkpoint" || j.at("kind") != "mlp")
    throw Error(path + ": not an mlp checkpoint");
  if (j.at("version").get<int>() != 1)
    throw Error(path + ": unsupported checkpoint version");
  MlpModel model;
  model.input_dim = j.at("input_dim").get<int>();
  model.cfg = detail::train_config_from(j.at("config"));
  for (const auto& l : j.at("hidden")) {
    DenseLayer dense;
    dense.weights = detail::matrix_from(l.at("weights"));
    dense.bias = detail::vector_from(l.at("bias"));
    model.hidden.push_back(std::move(dense));
  }
  for (const auto& n : j.at("norms")) {
    BatchNormLayer bn;
    bn.gamma = detail::vector_from(n.at("gamma"));
    bn.beta = detail::vector_from(n.at("beta"));
    bn.running_mean = detail::vector_from(n.at("running_mean"));
    bn.running_var = detail::vector_from(n.at("running_var"));
    bn.epsilon = n.at("epsilon").get<double>();
    bn.momentum = n.at("momentum").get<double>();
    model.norms.push_back(std::move(bn));
  }
  model.output.weights = detail::matrix_from(j.at("output").at("weights"));
  model.output.bias = detail::vector_from(j.at("output").at("bias"));
  return model;
}

inline void save_checkpoint(const LogisticModel& model, const std::string& path) {
  nlohmann::json j{{"format", "mixmort-checkpoint"},
                   {"version", 1},
                   {"kind", "logistic"},
                   {"weights", detail::vector_json(model.weights)},
                   {"bias", model.bias},
                   {"config",
                    {{"l2_lambda", model.cfg.l2_lambda},
                     {"learning_rate", model.cfg.learning_rate},
                     {"max_iters", model.cfg.max_iters},
                     {"tolerance", model.cfg.tolerance}}},
                   {"iters_run", model.iters_run}};
  csv::write_file(path, j.dump(2) + "\n");
}

inline LogisticModel load_logistic_checkpoint(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(csv::read_file(path));
  if (j.at("format") != "mixmort-checkpoint" || j.at("kind") != "logistic")
    throw Error(path + ": not a logistic checkpoint");
  if (j.at("version").get<int>() != 1)
    throw Error(path + ": unsupported checkpoint version");
  LogisticModel model;
  model.weights = detail::vector_from(j.at("weights"));
  model.bias = j.at("bias").get<double>();
  model.cfg.l2_lambda = j.at("config").at("l2_lambda").get<double>();
  model.cfg.learning_rate = j.at("config").at("learning_rate").get<double>();
  model.cfg.max_iters = j.at("config").at("max_iters").get<int>();
  model.cfg.tolerance = j.at("config").at("tolerance").get<double>();
  model.iters_run = j.at("iters_run").get<int>();
  return model;
}

} // namespace mixmort
