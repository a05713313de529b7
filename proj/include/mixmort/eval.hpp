#pragma once

#include <algorithm>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mixmort/baseline.hpp"
#include "mixmort/core.hpp"
#include "mixmort/linalg.hpp"
#include "mixmort/mlp.hpp"
#include "mixmort/preprocess.hpp"
#include "mixmort/rng.hpp"

namespace mixmort {

struct InvalidK : Error {
  using Error::Error;
};
struct OneClassOnly : Error {
  using Error::Error;
};
struct NoPositives : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Fold partitions
// ---------------------------------------------------------------------------

// Seeded shuffle of 0..n-1 cut into k folds whose sizes differ by at most 1.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k,
                                                         std::uint64_t seed) {
  if (k < 2) throw InvalidK("kfold_split: k must be >= 2");
  if (n < static_cast<std::size_t>(k))
    throw InvalidK("kfold_split: n must be >= k");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    folds[f].assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Confusion counts and threshold metrics
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

// predict positive iff score >= threshold
inline ConfusionMatrix confusion(const std::vector<double>& scores,
                                 const std::vector<int>& labels,
                                 double threshold = 0.5) {
  if (scores.size() != labels.size())
    throw Error("confusion: scores/labels size mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (pred && actual) ++cm.tp;
    else if (pred && !actual) ++cm.fp;
    else if (!pred && actual) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::optional<double> auc;
  bool degenerate_precision = false; // tp+fp == 0, reported as 0
  bool degenerate_recall = false;    // tp+fn == 0, reported as 0
};

inline MetricSet metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("metrics: empty confusion matrix");
  MetricSet m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp == 0) {
    m.degenerate_precision = true;
  } else {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.degenerate_recall = true;
  } else {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (m.precision + m.recall > 0)
    m.f_measure = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

// ---------------------------------------------------------------------------
// Ranking metrics
// ---------------------------------------------------------------------------

// Mann-Whitney statistic P(score_pos > score_neg) + 0.5 P(tie), computed via
// tie-averaged ranks; matches the pairwise definition exactly.
inline double roc_auc(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw Error("roc_auc: scores/labels size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) (y != 0 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw OneClassOnly("roc_auc: both classes must be present");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[idx[t]] != 0) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos -
                   0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// One (recall, precision) point per distinct threshold in descending order,
// preceded by the (0, 1) anchor.
inline std::vector<std::pair<double, double>> pr_curve(
    const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw Error("pr_curve: scores/labels size mismatch");
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += y != 0;
  if (n_pos == 0) throw NoPositives("pr_curve: needs at least one positive label");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<std::pair<double, double>> points;
  points.emplace_back(0.0, 1.0);
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[idx[t]] != 0) ++tp;
      else ++fp;
    }
    points.emplace_back(static_cast<double>(tp) / static_cast<double>(n_pos),
                        static_cast<double>(tp) / static_cast<double>(tp + fp));
    i = j;
  }
  return points;
}

// (fpr, tpr) per distinct threshold descending, anchored at (0, 0).
inline std::vector<std::pair<double, double>> roc_curve(
    const std::vector<double>& scores, const std::vector<int>& labels) {
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) (y != 0 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw OneClassOnly("roc_curve: both classes must be present");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<std::pair<double, double>> points;
  points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[idx[t]] != 0) ++tp;
      else ++fp;
    }
    points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                        static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  return points;
}

// ---------------------------------------------------------------------------
// Cross-validation harness
// ---------------------------------------------------------------------------

enum class ModelKind : std::uint8_t { Mlp, Logistic };

inline const char* to_string(ModelKind k) {
  return k == ModelKind::Mlp ? "mlp" : "logistic";
}

struct EvalConfig {
  TrainConfig mlp;
  LogisticConfig logistic;
  double threshold = 0.5;
  bool parallel_folds = true;
};

// What a cross-validated experiment consumes. `fixed` columns are used as-is
// in every mode (text embeddings, or an already-prepared matrix);
// `structured_raw`, when present, is preprocessed with `pre` — over the whole
// data in replicate mode, per training fold in leakage-safe mode. Final
// feature order is [preprocessed structured | fixed].
struct CvSource {
  std::optional<FeatureMatrix> structured_raw;
  FeatureMatrix fixed;
  std::vector<int> labels;
  PreprocessConfig pre;

  static CvSource from_dataset(const LabeledDataset& ds) {
    ds.check();
    CvSource src;
    src.fixed = ds.features;
    src.labels = ds.labels;
    return src;
  }

  std::size_t size() const { return labels.size(); }
};

// Restricts a source to the given feature groups. Throws NoMatchingColumns
// when nothing at all matches.
inline CvSource select_groups(const CvSource& src,
                              const std::set<FeatureGroup>& groups) {
  if (groups.empty()) throw NoMatchingColumns("select_groups: empty group set");
  CvSource out;
  out.labels = src.labels;
  out.pre = src.pre;

  bool any = false;
  if (src.structured_raw) {
    bool matches = false;
    for (FeatureGroup g : src.structured_raw->column_groups)
      if (groups.count(g)) matches = true;
    if (matches) {
      out.structured_raw = select_columns(*src.structured_raw, groups);
      any = true;
    }
  }
  {
    bool matches = false;
    for (FeatureGroup g : src.fixed.column_groups)
      if (groups.count(g)) matches = true;
    if (matches) {
      out.fixed = select_columns(src.fixed, groups);
      any = true;
    } else {
      out.fixed = FeatureMatrix::zeros(src.labels.size(), {}, {});
    }
  }
  if (!any) throw NoMatchingColumns("select_groups: no column matches the selection");
  return out;
}

struct FoldResult {
  int fold_index = 0;
  ConfusionMatrix confusion;
  MetricSet metrics;
};

struct RunResult {
  std::uint64_t run_seed = 0;
  std::vector<FoldResult> folds;
  MetricSet averaged;
};

// Arithmetic mean of per-fold metrics; AUC averaged over folds where defined.
inline MetricSet mean_metrics(const std::vector<MetricSet>& sets) {
  MetricSet out;
  if (sets.empty()) return out;
  double auc_sum = 0.0;
  std::size_t auc_n = 0;
  for (const auto& m : sets) {
    out.accuracy += m.accuracy;
    out.precision += m.precision;
    out.recall += m.recall;
    out.f_measure += m.f_measure;
    if (m.auc) {
      auc_sum += *m.auc;
      ++auc_n;
    }
    out.degenerate_precision |= m.degenerate_precision;
    out.degenerate_recall |= m.degenerate_recall;
  }
  const double inv = 1.0 / static_cast<double>(sets.size());
  out.accuracy *= inv;
  out.precision *= inv;
  out.recall *= inv;
  out.f_measure *= inv;
  if (auc_n > 0) out.auc = auc_sum / static_cast<double>(auc_n);
  return out;
}

struct EvalReport {
  std::string model_kind;
  std::uint64_t seed = 0;
  int runs = 0;
  int k = 0;
  FitScope mode = FitScope::ReplicatePaper;
  std::vector<FeatureGroup> groups_used;
  std::size_t feature_count = 0;
  std::vector<RunResult> run_results;
  // Mean over every fold of every run. f_measure here is the mean of
  // per-fold F values; the harmonic mean of the averaged precision/recall is
  // stored separately so the two conventions stay labeled.
  MetricSet averaged;
  double f_of_averaged_pr = 0.0;
  ConfusionMatrix pooled_confusion;
  MetricSet pooled;
  std::vector<std::pair<double, double>> pr_points;
  std::vector<std::pair<double, double>> roc_points;
  std::vector<std::string> flags;
  nlohmann::json config_echo;
};

namespace detail {

inline nlohmann::json confusion_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

inline nlohmann::json metrics_json(const MetricSet& m) {
  nlohmann::json j{{"accuracy", m.accuracy},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f_measure", m.f_measure}};
  if (m.auc) j["auc"] = *m.auc;
  if (m.degenerate_precision) j["degenerate_precision"] = true;
  if (m.degenerate_recall) j["degenerate_recall"] = true;
  return j;
}

} // namespace detail

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  nlohmann::json run_seeds = nlohmann::json::array();
  for (const auto& run : r.run_results) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : run.folds)
      folds.push_back({{"fold", f.fold_index},
                       {"confusion", detail::confusion_json(f.confusion)},
                       {"metrics", detail::metrics_json(f.metrics)}});
    runs.push_back({{"folds", std::move(folds)},
                    {"averaged", detail::metrics_json(run.averaged)}});
    run_seeds.push_back(run.run_seed);
  }
  nlohmann::json groups = nlohmann::json::array();
  for (FeatureGroup g : r.groups_used) groups.push_back(to_string(g));

  nlohmann::json pr = nlohmann::json::array();
  for (const auto& [rec, prec] : r.pr_points) pr.push_back({rec, prec});
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& [fpr, tpr] : r.roc_points) roc.push_back({fpr, tpr});

  nlohmann::json averaged = detail::metrics_json(r.averaged);
  averaged["f_measure_note"] = "mean of per-fold F values";
  averaged["f_of_averaged_pr"] = r.f_of_averaged_pr;

  return nlohmann::json{
      {"config", r.config_echo},
      {"model", r.model_kind},
      {"preprocess_mode", to_string(r.mode)},
      {"feature_groups", std::move(groups)},
      {"feature_count", r.feature_count},
      {"seeds", {{"master", r.seed}, {"runs", std::move(run_seeds)}}},
      {"runs", std::move(runs)},
      {"averaged", std::move(averaged)},
      {"pooled",
       {{"confusion", detail::confusion_json(r.pooled_confusion)},
        {"metrics", detail::metrics_json(r.pooled)}}},
      {"curves", {{"pr", std::move(pr)}, {"roc", std::move(roc)}}},
      {"flags", r.flags}};
}

namespace detail {

struct FoldOutcome {
  FoldResult result;
  std::vector<double> scores; // test scores, fold row order
  std::vector<int> labels;
};

// Train on the training rows and score the test rows.
inline std::vector<double> train_and_score(const Eigen::MatrixXd& train_x,
                                           const std::vector<int>& train_y,
                                           const Eigen::MatrixXd& test_x,
                                           ModelKind kind, const EvalConfig& cfg,
                                           std::uint64_t fold_seed) {
  if (kind == ModelKind::Logistic) {
    LogisticModel model = fit_logistic(train_x, train_y, cfg.logistic);
    return predict_logistic(model, test_x);
  }
  TrainConfig tc = cfg.mlp;
  tc.seed = mix_seed(fold_seed, 2);
  MlpModel model =
      init_model(static_cast<int>(train_x.cols()), tc, mix_seed(fold_seed, 1));
  train(model, train_x, train_y, tc);
  return predict_proba(model, test_x);
}

} // namespace detail

// The paper's protocol: `runs` shuffled repetitions of k-fold
// cross-validation; per-fold metrics averaged arithmetically, test scores
// pooled across all runs for the PR/ROC curves. Fold partitions depend only
// on (seed, run, n, k), so model kinds and feature combinations evaluated
// under the same seed share identical folds.
inline EvalReport run_cv(const CvSource& source, ModelKind kind, int runs, int k,
                         const EvalConfig& cfg, std::uint64_t seed) {
  if (runs < 1) throw Error("run_cv: runs must be >= 1");
  const std::size_t n = source.size();
  if (source.fixed.rows() != n)
    throw Error("run_cv: fixed feature rows != label count");
  if (source.structured_raw && source.structured_raw->rows() != n)
    throw Error("run_cv: structured rows != label count");

  EvalReport report;
  report.model_kind = to_string(kind);
  report.seed = seed;
  report.runs = runs;
  report.k = k;
  report.mode = source.pre.fit_scope;

  // Feature layout metadata (and, in replicate mode, the single whole-data
  // preprocessing pass reused by every fold).
  Eigen::MatrixXd prepared_all;
  bool have_prepared_all = false;
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);

  FeatureMatrix layout_probe = source.fixed;
  if (source.structured_raw) {
    if (source.pre.fit_scope == FitScope::ReplicatePaper) {
      PipelineModel pm = fit_pipeline(*source.structured_raw, all_rows, source.pre);
      FeatureMatrix prepared = apply_pipeline(*source.structured_raw, pm);
      layout_probe = source.fixed.cols() > 0 ? hcat(prepared, source.fixed) : prepared;
      prepared_all = to_matrix(layout_probe);
      have_prepared_all = true;
    } else {
      layout_probe = source.fixed.cols() > 0
                         ? hcat(*source.structured_raw, source.fixed)
                         : *source.structured_raw;
    }
  } else {
    prepared_all = to_matrix(source.fixed);
    have_prepared_all = true;
  }
  report.feature_count = layout_probe.cols();
  {
    std::set<FeatureGroup> seen(layout_probe.column_groups.begin(),
                                layout_probe.column_groups.end());
    report.groups_used.assign(seen.begin(), seen.end());
  }

  std::vector<MetricSet> all_fold_metrics;
  std::vector<double> pooled_scores;
  std::vector<int> pooled_labels;

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned wave =
      cfg.parallel_folds ? std::min<unsigned>(hw, static_cast<unsigned>(k)) : 1u;

  for (int run = 0; run < runs; ++run) {
    const std::uint64_t run_seed = mix_seed(seed, static_cast<std::uint64_t>(run));
    const auto folds = kfold_split(n, k, run_seed);

    auto eval_fold = [&](int f) -> detail::FoldOutcome {
      const std::uint64_t fold_seed = mix_seed(run_seed, static_cast<std::uint64_t>(f));
      const auto& test_rows = folds[static_cast<std::size_t>(f)];
      std::vector<std::size_t> train_rows;
      train_rows.reserve(n - test_rows.size());
      for (int other = 0; other < k; ++other)
        if (other != f)
          train_rows.insert(train_rows.end(), folds[static_cast<std::size_t>(other)].begin(),
                            folds[static_cast<std::size_t>(other)].end());

      Eigen::MatrixXd train_x, test_x;
      if (have_prepared_all) {
        train_x = rows_subset(prepared_all, train_rows);
        test_x = rows_subset(prepared_all, test_rows);
      } else {
        // leakage-safe: fit preprocessing statistics on the training rows only
        PipelineModel pm = fit_pipeline(*source.structured_raw, train_rows, source.pre);
        FeatureMatrix prepared = apply_pipeline(*source.structured_raw, pm);
        FeatureMatrix full =
            source.fixed.cols() > 0 ? hcat(prepared, source.fixed) : prepared;
        Eigen::MatrixXd x = to_matrix(full);
        train_x = rows_subset(x, train_rows);
        test_x = rows_subset(x, test_rows);
      }
      std::vector<int> train_y = subset(source.labels, train_rows);
      std::vector<int> test_y = subset(source.labels, test_rows);

      detail::FoldOutcome outcome;
      outcome.scores =
          detail::train_and_score(train_x, train_y, test_x, kind, cfg, fold_seed);
      outcome.labels = test_y;
      outcome.result.fold_index = f;
      outcome.result.confusion = confusion(outcome.scores, test_y, cfg.threshold);
      outcome.result.metrics = metrics(outcome.result.confusion);
      bool has_pos = false, has_neg = false;
      for (int y : test_y) (y != 0 ? has_pos : has_neg) = true;
      if (has_pos && has_neg) outcome.result.metrics.auc = roc_auc(outcome.scores, test_y);
      return outcome;
    };

    std::vector<detail::FoldOutcome> outcomes(static_cast<std::size_t>(k));
    for (int start = 0; start < k; start += static_cast<int>(wave)) {
      const int end = std::min(k, start + static_cast<int>(wave));
      std::vector<std::future<detail::FoldOutcome>> futures;
      for (int f = start; f < end; ++f)
        futures.push_back(std::async(std::launch::async, eval_fold, f));
      for (int f = start; f < end; ++f)
        outcomes[static_cast<std::size_t>(f)] = futures[static_cast<std::size_t>(f - start)].get();
    }

    RunResult run_result;
    run_result.run_seed = run_seed;
    std::vector<MetricSet> run_fold_metrics;
    for (auto& outcome : outcomes) {
      run_result.folds.push_back(outcome.result);
      run_fold_metrics.push_back(outcome.result.metrics);
      all_fold_metrics.push_back(outcome.result.metrics);
      pooled_scores.insert(pooled_scores.end(), outcome.scores.begin(),
                           outcome.scores.end());
      pooled_labels.insert(pooled_labels.end(), outcome.labels.begin(),
                           outcome.labels.end());
    }
    run_result.averaged = mean_metrics(run_fold_metrics);
    report.run_results.push_back(std::move(run_result));
  }

  report.averaged = mean_metrics(all_fold_metrics);
  report.f_of_averaged_pr =
      report.averaged.precision + report.averaged.recall > 0
          ? 2.0 * report.averaged.precision * report.averaged.recall /
                (report.averaged.precision + report.averaged.recall)
          : 0.0;
  report.pooled_confusion = confusion(pooled_scores, pooled_labels, cfg.threshold);
  report.pooled = metrics(report.pooled_confusion);
  {
    bool has_pos = false, has_neg = false;
    for (int y : pooled_labels) (y != 0 ? has_pos : has_neg) = true;
    if (has_pos && has_neg) {
      report.pooled.auc = roc_auc(pooled_scores, pooled_labels);
      report.pr_points = pr_curve(pooled_scores, pooled_labels);
      report.roc_points = roc_curve(pooled_scores, pooled_labels);
    }
  }

  report.flags.push_back(
      "shallow baseline is an L2 logistic regression standing in for WEKA "
      "SimpleLogistic/LMT");
  report.flags.push_back(std::string("preprocessing statistics fit scope: ") +
                         to_string(report.mode));
  report.flags.push_back("curves pooled over all runs' test scores");
  report.flags.push_back(
      "pinned defaults not stated by the reference protocol: l2_lambda, "
      "init_range, bn_momentum, bn_epsilon, threshold 0.5");
  if (report.averaged.degenerate_precision)
    report.flags.push_back("some fold had no positive predictions (precision 0)");
  if (report.averaged.degenerate_recall)
    report.flags.push_back("some fold had no positive labels (recall 0)");
  return report;
}

inline EvalReport run_cv(const LabeledDataset& dataset, ModelKind kind, int runs,
                         int k, const EvalConfig& cfg, std::uint64_t seed) {
  return run_cv(CvSource::from_dataset(dataset), kind, runs, k, cfg, seed);
}

// ---------------------------------------------------------------------------
// Feature-group ablations
// ---------------------------------------------------------------------------

// Free text alone, free text plus each structured group, and the full mix.
inline std::vector<std::set<FeatureGroup>> default_ablation_combos() {
  const FeatureGroup t = FeatureGroup::TextEmbedding;
  return {
      {t},
      {t, FeatureGroup::LabChart},
      {t, FeatureGroup::Treatment},
      {t, FeatureGroup::Comorbidity},
      {t, FeatureGroup::Demographics},
      {t, FeatureGroup::Admission},
      {FeatureGroup::Admission, FeatureGroup::Demographics, FeatureGroup::Treatment,
       FeatureGroup::Comorbidity, FeatureGroup::LabChart, t},
  };
}

inline std::string combo_name(const std::set<FeatureGroup>& combo) {
  if (combo.size() == kAllGroups.size()) return "all_groups";
  std::string name;
  // text first to match the reference table's row naming
  if (combo.count(FeatureGroup::TextEmbedding)) name = "free_text";
  for (FeatureGroup g : kAllGroups) {
    if (g == FeatureGroup::TextEmbedding || !combo.count(g)) continue;
    if (!name.empty()) name += "+";
    name += to_string(g);
  }
  return name;
}

// One report per combination over identical fold partitions (same seed), so
// score differences are attributable to the features alone.
inline std::vector<EvalReport> run_ablation(const CvSource& source,
                                            const std::vector<std::set<FeatureGroup>>& combos,
                                            int runs, int k, const EvalConfig& cfg,
                                            std::uint64_t seed,
                                            ModelKind kind = ModelKind::Mlp) {
  std::vector<EvalReport> reports;
  reports.reserve(combos.size());
  for (const auto& combo : combos) {
    CvSource restricted = select_groups(source, combo);
    EvalReport report = run_cv(restricted, kind, runs, k, cfg, seed);
    report.config_echo["combo"] = combo_name(combo);
    reports.push_back(std::move(report));
  }
  return reports;
}

} // namespace mixmort
