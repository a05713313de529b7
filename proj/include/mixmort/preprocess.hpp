#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mixmort/core.hpp"
#include "mixmort/ingest.hpp"

namespace mixmort {

struct UnknownFeature : Error {
  using Error::Error;
};
struct AllMissingColumn : Error {
  using Error::Error;
};

enum class FitScope : std::uint8_t { ReplicatePaper, LeakageSafe };

inline const char* to_string(FitScope s) {
  return s == FitScope::ReplicatePaper ? "replicate" : "leakage-safe";
}

enum class Stage : std::uint8_t {
  UnmaskAge = 0,
  ScrubInvalid,
  RemoveOutliersIqr,
  ImputeMean,
  NormalizeMinmax,
};

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::UnmaskAge: return "unmask_age";
    case Stage::ScrubInvalid: return "scrub_invalid";
    case Stage::RemoveOutliersIqr: return "remove_outliers_iqr";
    case Stage::ImputeMean: return "impute_mean";
    case Stage::NormalizeMinmax: return "normalize_minmax";
  }
  return "?";
}

struct PreprocessConfig {
  double mask_threshold = 300.0; // values >= threshold are treated as masked ages
  double mask_offset = 211.0;
  double iqr_multiplier = 1.5;
  std::map<std::string, std::pair<double, double>> validity_ranges; // inclusive
  std::set<std::string> zero_is_missing;
  std::set<std::string> age_columns = {"age"};
  // A 0/1 indicator column has a degenerate IQR: either the fences are
  // [0,0] and the rule deletes every positive flag, or they cover
  // everything. Fence fitting skips such columns unless this is disabled.
  bool iqr_skip_binary = true;
  FitScope fit_scope = FitScope::ReplicatePaper;
  std::vector<Stage> stage_order = {Stage::UnmaskAge, Stage::ScrubInvalid,
                                    Stage::RemoveOutliersIqr, Stage::ImputeMean,
                                    Stage::NormalizeMinmax};

  void check() const {
    if (mask_offset <= 0) throw Error("PreprocessConfig: mask_offset must be > 0");
    if (iqr_multiplier <= 0)
      throw Error("PreprocessConfig: iqr_multiplier must be > 0");
    for (const auto& [name, range] : validity_ranges)
      if (!(range.first < range.second))
        throw Error("PreprocessConfig: empty validity range for " + name);
  }
};

// Per-stage audit: how many cells each stage changed in each column.
struct StageAudit {
  Stage stage;
  std::map<std::string, std::size_t> cells_changed;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : cells_changed) n += c;
    return n;
  }
};

struct PipelineAudit {
  FitScope scope = FitScope::ReplicatePaper;
  std::vector<StageAudit> stages;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Per-value operations
// ---------------------------------------------------------------------------

// Inverts the +211 masking applied to ages over 89.
inline double unmask_age(double value, const PreprocessConfig& cfg) {
  if (value < 0) throw Error("unmask_age: negative age");
  return value >= cfg.mask_threshold ? value - cfg.mask_offset : value;
}

// Linear interpolation between closest ranks (the common "type 7"
// convention). `sorted` must be ascending and non-empty.
inline double quantile_type7(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

// ---------------------------------------------------------------------------
// Fitted pipeline statistics
// ---------------------------------------------------------------------------

// Column statistics captured while replaying the configured stage order on
// the fit rows. Applying the model replays the same order with these frozen
// statistics, which is what makes leakage-safe per-fold refits possible.
struct PipelineModel {
  PreprocessConfig cfg;
  std::vector<std::string> column_names;
  std::vector<double> q1, q3;      // NaN = no fence (fewer than 4 observed)
  std::vector<double> mean;        // imputation means
  std::vector<double> minv, maxv;  // normalization bounds

  std::vector<ColumnStats> column_stats() const {
    std::vector<ColumnStats> out(column_names.size());
    for (std::size_t c = 0; c < column_names.size(); ++c)
      out[c] = {mean[c], minv[c], maxv[c], q1[c], q3[c]};
    return out;
  }
};

namespace detail {

inline void apply_unmask(FeatureMatrix& m, const PreprocessConfig& cfg,
                         StageAudit* audit) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (!cfg.age_columns.count(m.column_names[c])) continue;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (m.is_missing(r, c)) continue;
      const double v = m.at(r, c);
      if (v >= cfg.mask_threshold) {
        m.at(r, c) = v - cfg.mask_offset;
        if (audit) ++audit->cells_changed[m.column_names[c]];
      }
    }
  }
}

inline void apply_scrub(FeatureMatrix& m, const PreprocessConfig& cfg,
                        StageAudit* audit, std::vector<std::string>* warnings) {
  for (const auto& [name, range] : cfg.validity_ranges)
    if (!m.column_index(name))
      throw UnknownFeature("scrub_invalid: validity range names unknown column '" +
                           name + "'");
  for (const auto& name : cfg.zero_is_missing)
    if (!m.column_index(name) && warnings)
      warnings->push_back("zero_is_missing names unknown column '" + name + "'");

  for (std::size_t c = 0; c < m.cols(); ++c) {
    const std::string& name = m.column_names[c];
    const bool zero_missing = cfg.zero_is_missing.count(name) != 0;
    auto range_it = cfg.validity_ranges.find(name);
    const bool has_range = range_it != cfg.validity_ranges.end();
    if (!zero_missing && !has_range) continue;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (m.is_missing(r, c)) continue;
      const double v = m.at(r, c);
      const bool zero_hit = zero_missing && v == 0.0;
      const bool range_hit =
          has_range && (v < range_it->second.first || v > range_it->second.second);
      if (zero_hit || range_hit) {
        m.set_missing(r, c);
        if (audit) ++audit->cells_changed[name];
      }
    }
  }
}

inline std::vector<double> observed_column(const FeatureMatrix& m, std::size_t c,
                                           const std::vector<std::size_t>& rows) {
  std::vector<double> vals;
  vals.reserve(rows.size());
  for (std::size_t r : rows)
    if (!m.is_missing(r, c)) vals.push_back(m.at(r, c));
  return vals;
}

inline void fit_fences(const FeatureMatrix& m, const std::vector<std::size_t>& rows,
                       PipelineModel& model, std::vector<std::string>* warnings) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  model.q1.assign(m.cols(), nan);
  model.q3.assign(m.cols(), nan);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    auto vals = observed_column(m, c, rows);
    if (vals.size() < 4) {
      if (warnings)
        warnings->push_back("remove_outliers_iqr: column '" + m.column_names[c] +
                            "' has fewer than 4 observed values; skipped");
      continue;
    }
    if (model.cfg.iqr_skip_binary) {
      bool binary = true;
      for (double v : vals)
        if (v != 0.0 && v != 1.0) binary = false;
      if (binary) continue;
    }
    std::sort(vals.begin(), vals.end());
    model.q1[c] = quantile_type7(vals, 0.25);
    model.q3[c] = quantile_type7(vals, 0.75);
  }
}

inline void apply_fences(FeatureMatrix& m, const PipelineModel& model,
                         StageAudit* audit) {
  const double k = model.cfg.iqr_multiplier;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (std::isnan(model.q1[c])) continue;
    const double iqr = model.q3[c] - model.q1[c];
    const double lo = model.q1[c] - k * iqr;
    const double hi = model.q3[c] + k * iqr;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (m.is_missing(r, c)) continue;
      const double v = m.at(r, c);
      if (v < lo || v > hi) {
        m.set_missing(r, c);
        if (audit) ++audit->cells_changed[m.column_names[c]];
      }
    }
  }
}

inline void fit_means(const FeatureMatrix& m, const std::vector<std::size_t>& rows,
                      PipelineModel& model) {
  model.mean.assign(m.cols(), 0.0);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    auto vals = observed_column(m, c, rows);
    if (vals.empty())
      throw AllMissingColumn("impute_mean: column '" + m.column_names[c] +
                             "' has no observed values in the fit scope");
    model.mean[c] =
        std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
  }
}

inline void apply_impute(FeatureMatrix& m, const PipelineModel& model,
                         StageAudit* audit) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (!m.is_missing(r, c)) continue;
      m.set(r, c, model.mean[c]);
      if (audit) ++audit->cells_changed[m.column_names[c]];
    }
  }
}

inline void fit_minmax(const FeatureMatrix& m, const std::vector<std::size_t>& rows,
                       PipelineModel& model) {
  model.minv.assign(m.cols(), 0.0);
  model.maxv.assign(m.cols(), 0.0);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    auto vals = observed_column(m, c, rows);
    if (vals.empty())
      throw AllMissingColumn("normalize_minmax: column '" + m.column_names[c] +
                             "' has no observed values in the fit scope");
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    model.minv[c] = *lo;
    model.maxv[c] = *hi;
  }
}

inline void apply_minmax(FeatureMatrix& m, const PipelineModel& model,
                         StageAudit* audit) {
  const bool clamp = model.cfg.fit_scope == FitScope::LeakageSafe;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const double lo = model.minv[c];
    const double span = model.maxv[c] - lo;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double v = m.at(r, c);
      double scaled = span > 0.0 ? (v - lo) / span : 0.0;
      if (clamp) scaled = std::clamp(scaled, 0.0, 1.0);
      if (scaled != v) {
        if (audit) ++audit->cells_changed[m.column_names[c]];
      }
      m.at(r, c) = scaled;
    }
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Whole-matrix operations (fit scope = the input matrix itself)
// ---------------------------------------------------------------------------

inline FeatureMatrix scrub_invalid(const FeatureMatrix& m, const PreprocessConfig& cfg,
                                   StageAudit* audit = nullptr,
                                   std::vector<std::string>* warnings = nullptr) {
  cfg.check();
  FeatureMatrix out = m;
  if (audit) audit->stage = Stage::ScrubInvalid;
  detail::apply_scrub(out, cfg, audit, warnings);
  return out;
}

inline FeatureMatrix remove_outliers_iqr(const FeatureMatrix& m,
                                         const PreprocessConfig& cfg,
                                         StageAudit* audit = nullptr,
                                         std::vector<std::string>* warnings = nullptr) {
  cfg.check();
  FeatureMatrix out = m;
  if (audit) audit->stage = Stage::RemoveOutliersIqr;
  std::vector<std::size_t> all(m.rows());
  std::iota(all.begin(), all.end(), 0);
  PipelineModel model;
  model.cfg = cfg;
  model.column_names = m.column_names;
  detail::fit_fences(out, all, model, warnings);
  detail::apply_fences(out, model, audit);
  return out;
}

inline FeatureMatrix impute_mean(const FeatureMatrix& m, const PreprocessConfig& cfg,
                                 StageAudit* audit = nullptr) {
  cfg.check();
  FeatureMatrix out = m;
  if (audit) audit->stage = Stage::ImputeMean;
  std::vector<std::size_t> all(m.rows());
  std::iota(all.begin(), all.end(), 0);
  PipelineModel model;
  model.cfg = cfg;
  model.column_names = m.column_names;
  detail::fit_means(out, all, model);
  detail::apply_impute(out, model, audit);
  return out;
}

inline FeatureMatrix normalize_minmax(const FeatureMatrix& m,
                                      const PreprocessConfig& cfg,
                                      StageAudit* audit = nullptr) {
  cfg.check();
  if (m.missing_count() != 0)
    throw Error("normalize_minmax: matrix still has missing cells");
  FeatureMatrix out = m;
  if (audit) audit->stage = Stage::NormalizeMinmax;
  std::vector<std::size_t> all(m.rows());
  std::iota(all.begin(), all.end(), 0);
  PipelineModel model;
  model.cfg = cfg;
  model.column_names = m.column_names;
  detail::fit_minmax(out, all, model);
  detail::apply_minmax(out, model, audit);
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline: fit on a row subset, apply anywhere
// ---------------------------------------------------------------------------

// Fits every stage's statistics over `fit_rows` by replaying the configured
// stage order on those rows.
inline PipelineModel fit_pipeline(const FeatureMatrix& m,
                                  const std::vector<std::size_t>& fit_rows,
                                  const PreprocessConfig& cfg,
                                  std::vector<std::string>* warnings = nullptr) {
  cfg.check();
  if (fit_rows.empty()) throw Error("fit_pipeline: empty fit scope");

  // working copy restricted to the fit rows
  FeatureMatrix work;
  work.n_rows = fit_rows.size();
  work.column_names = m.column_names;
  work.column_groups = m.column_groups;
  const std::size_t d = m.cols();
  work.values.resize(fit_rows.size() * d);
  work.missing.resize(fit_rows.size() * d);
  for (std::size_t i = 0; i < fit_rows.size(); ++i)
    for (std::size_t c = 0; c < d; ++c) {
      work.values[i * d + c] = m.at(fit_rows[i], c);
      work.missing[i * d + c] = m.missing[fit_rows[i] * d + c];
    }

  PipelineModel model;
  model.cfg = cfg;
  model.column_names = m.column_names;
  std::vector<std::size_t> all(work.rows());
  std::iota(all.begin(), all.end(), 0);

  for (Stage stage : cfg.stage_order) {
    switch (stage) {
      case Stage::UnmaskAge:
        detail::apply_unmask(work, cfg, nullptr);
        break;
      case Stage::ScrubInvalid:
        detail::apply_scrub(work, cfg, nullptr, warnings);
        break;
      case Stage::RemoveOutliersIqr:
        detail::fit_fences(work, all, model, warnings);
        detail::apply_fences(work, model, nullptr);
        break;
      case Stage::ImputeMean:
        detail::fit_means(work, all, model);
        detail::apply_impute(work, model, nullptr);
        break;
      case Stage::NormalizeMinmax:
        detail::fit_minmax(work, all, model);
        detail::apply_minmax(work, model, nullptr);
        break;
    }
  }
  return model;
}

// Replays the fitted stage order over the whole matrix with frozen
// statistics. Output carries fit_stats and, after the full default order,
// no missing cells and all values in [0, 1].
inline FeatureMatrix apply_pipeline(const FeatureMatrix& m, const PipelineModel& model,
                                    PipelineAudit* audit = nullptr) {
  FeatureMatrix out = m;
  if (audit) audit->scope = model.cfg.fit_scope;
  for (Stage stage : model.cfg.stage_order) {
    StageAudit stage_audit;
    stage_audit.stage = stage;
    StageAudit* sa = audit ? &stage_audit : nullptr;
    switch (stage) {
      case Stage::UnmaskAge:
        detail::apply_unmask(out, model.cfg, sa);
        break;
      case Stage::ScrubInvalid:
        detail::apply_scrub(out, model.cfg, sa,
                            audit ? &audit->warnings : nullptr);
        break;
      case Stage::RemoveOutliersIqr:
        detail::apply_fences(out, model, sa);
        break;
      case Stage::ImputeMean:
        detail::apply_impute(out, model, sa);
        break;
      case Stage::NormalizeMinmax:
        detail::apply_minmax(out, model, sa);
        break;
    }
    if (audit) audit->stages.push_back(std::move(stage_audit));
  }
  out.fit_stats = model.column_stats();
  return out;
}

struct PreprocessResult {
  LabeledDataset dataset;
  PipelineAudit audit;
  PipelineModel model;
};

// records -> cleaned structured LabeledDataset; all records must be labeled.
inline PreprocessResult run_pipeline(const std::vector<AdmissionRecord>& records,
                                     const CohortSchema& schema,
                                     const PreprocessConfig& cfg) {
  FeatureMatrix raw = structured_matrix(records, schema);
  std::vector<std::size_t> all(raw.rows());
  std::iota(all.begin(), all.end(), 0);

  PreprocessResult result;
  PipelineModel model = fit_pipeline(raw, all, cfg, &result.audit.warnings);
  result.dataset.features = apply_pipeline(raw, model, &result.audit);
  result.dataset.labels = labels_of(records);
  result.dataset.check();
  result.model = std::move(model);
  return result;
}

} // namespace mixmort
