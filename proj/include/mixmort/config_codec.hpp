#pragma once

#include <string>

#include "mixmort/baseline.hpp"
#include "mixmort/config.hpp"
#include "mixmort/dataset_io.hpp"
#include "mixmort/eval.hpp"
#include "mixmort/mlp.hpp"
#include "mixmort/preprocess.hpp"
#include "mixmort/synth.hpp"

namespace mixmort {

// Builds typed configurations from the flat key-value file, starting from the
// given defaults so unset keys keep their pinned values.

inline SynthConfig synth_config_from(const KeyValueConfig& kv, SynthConfig cfg = {}) {
  cfg.n_admissions =
      static_cast<std::size_t>(kv.get_int("synth.n_admissions", static_cast<long long>(cfg.n_admissions)));
  cfg.positive_rate = kv.get_double("synth.positive_rate", cfg.positive_rate);
  cfg.duplicate_rate = kv.get_double("synth.duplicate_rate", cfg.duplicate_rate);
  cfg.masked_age_rate = kv.get_double("synth.masked_age_rate", cfg.masked_age_rate);
  cfg.zero_lab_rate = kv.get_double("synth.zero_lab_rate", cfg.zero_lab_rate);
  cfg.invalid_rate = kv.get_double("synth.invalid_rate", cfg.invalid_rate);
  cfg.source_missing_rate =
      kv.get_double("synth.source_missing_rate", cfg.source_missing_rate);
  cfg.missing_summary_rate =
      kv.get_double("synth.missing_summary_rate", cfg.missing_summary_rate);
  for (FeatureGroup g : kAllGroups)
    cfg.group_signal_strengths[g] =
        kv.get_double(std::string("synth.signal.") + to_string(g), cfg.strength(g));
  cfg.interaction_fraction =
      kv.get_double("synth.interaction_fraction", cfg.interaction_fraction);
  cfg.interaction_strength =
      kv.get_double("synth.interaction_strength", cfg.interaction_strength);
  cfg.embedding_dim =
      static_cast<int>(kv.get_int("synth.embedding_dim", cfg.embedding_dim));
  cfg.summary_tokens = static_cast<std::size_t>(
      kv.get_int("synth.summary_tokens", static_cast<long long>(cfg.summary_tokens)));
  cfg.seed = static_cast<std::uint64_t>(
      kv.get_int("synth.seed", static_cast<long long>(cfg.seed)));
  return cfg;
}

inline PreprocessConfig preprocess_config_from(const KeyValueConfig& kv,
                                               PreprocessConfig cfg = {}) {
  // reuse the text codec shared with the dataset cache
  std::string text;
  for (const auto& [k, v] : kv.entries())
    if (k.rfind("preprocess.", 0) == 0) text += k + " = " + v + "\n";
  return parse_preprocess_config(text, std::move(cfg));
}

inline TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig cfg = {}) {
  cfg.learning_rate = kv.get_double("train.learning_rate", cfg.learning_rate);
  cfg.batch_size = static_cast<int>(kv.get_int("train.batch_size", cfg.batch_size));
  cfg.epochs = static_cast<int>(kv.get_int("train.epochs", cfg.epochs));
  cfg.dropout_rate = kv.get_double("train.dropout_rate", cfg.dropout_rate);
  cfg.l2_lambda = kv.get_double("train.l2_lambda", cfg.l2_lambda);
  cfg.init_range = kv.get_double("train.init_range", cfg.init_range);
  cfg.bn_momentum = kv.get_double("train.bn_momentum", cfg.bn_momentum);
  cfg.bn_epsilon = kv.get_double("train.bn_epsilon", cfg.bn_epsilon);
  if (kv.has("train.hidden_sizes")) {
    cfg.hidden_sizes.clear();
    for (const auto& item :
         detail::split_on(kv.get_string("train.hidden_sizes", ""), ',')) {
      auto v = csv::parse_int(item);
      if (!v) throw Error("train.hidden_sizes: not an integer: " + item);
      cfg.hidden_sizes.push_back(static_cast<int>(*v));
    }
  }
  return cfg;
}

inline LogisticConfig logistic_config_from(const KeyValueConfig& kv,
                                           LogisticConfig cfg = {}) {
  cfg.l2_lambda = kv.get_double("logistic.l2_lambda", cfg.l2_lambda);
  cfg.learning_rate = kv.get_double("logistic.learning_rate", cfg.learning_rate);
  cfg.max_iters = static_cast<int>(kv.get_int("logistic.max_iters", cfg.max_iters));
  cfg.tolerance = kv.get_double("logistic.tolerance", cfg.tolerance);
  return cfg;
}

inline EvalConfig eval_config_from(const KeyValueConfig& kv, EvalConfig cfg = {}) {
  cfg.mlp = train_config_from(kv, cfg.mlp);
  cfg.logistic = logistic_config_from(kv, cfg.logistic);
  cfg.threshold = kv.get_double("eval.threshold", cfg.threshold);
  cfg.parallel_folds = kv.get_bool("eval.parallel_folds", cfg.parallel_folds);
  return cfg;
}

inline nlohmann::json eval_config_echo(const EvalConfig& cfg) {
  return {{"train",
           {{"learning_rate", cfg.mlp.learning_rate},
            {"batch_size", cfg.mlp.batch_size},
            {"epochs", cfg.mlp.epochs},
            {"dropout_rate", cfg.mlp.dropout_rate},
            {"l2_lambda", cfg.mlp.l2_lambda},
            {"hidden_sizes", cfg.mlp.hidden_sizes},
            {"init_range", cfg.mlp.init_range},
            {"bn_momentum", cfg.mlp.bn_momentum},
            {"bn_epsilon", cfg.mlp.bn_epsilon}}},
          {"logistic",
           {{"l2_lambda", cfg.logistic.l2_lambda},
            {"learning_rate", cfg.logistic.learning_rate},
            {"max_iters", cfg.logistic.max_iters},
            {"tolerance", cfg.logistic.tolerance}}},
          {"threshold", cfg.threshold}};
}

} // namespace mixmort
