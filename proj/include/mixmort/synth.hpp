#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mixmort/core.hpp"
#include "mixmort/csv.hpp"
#include "mixmort/embed.hpp"
#include "mixmort/ingest.hpp"
#include "mixmort/preprocess.hpp"
#include "mixmort/rng.hpp"

namespace mixmort {

struct IoError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct VocabToken {
  std::string token;
  double weight_pos = 1.0;
  double weight_neg = 1.0;
};

// Desk-scale stand-in for the access-restricted source database. Signal is
// planted per feature group; a configurable fraction of admissions carries a
// text-by-structured interaction a linear model cannot represent.
struct SynthConfig {
  std::size_t n_admissions = 5436;
  double positive_rate = 0.30;
  double duplicate_rate = 0.05;
  double masked_age_rate = 0.08; // ages > 89 stored with +211 applied
  double zero_lab_rate = 0.02;   // lab cells entered as literal 0
  double invalid_rate = 0.01;    // lab cells outside biological validity
  double source_missing_rate = 0.02; // lab cells empty at the source
  double missing_summary_rate = 0.01;
  std::map<FeatureGroup, double> group_signal_strengths = {
      {FeatureGroup::Admission, 1.0},   {FeatureGroup::Demographics, 1.0},
      {FeatureGroup::Treatment, 1.0},   {FeatureGroup::Comorbidity, 1.0},
      {FeatureGroup::LabChart, 1.0},    {FeatureGroup::TextEmbedding, 1.0},
  };
  double interaction_fraction = 0.5; // admissions carrying the XOR term
  double interaction_strength = 1.0;
  int embedding_dim = 200;
  std::size_t summary_tokens = 60;
  std::vector<VocabToken> vocab; // empty = built-in default
  // Positive admissions split into a text-loud and a structured-loud subtype;
  // the spread moves signal mass between the two channels so the positive
  // class is bimodal along the signal directions (a single hyperplane
  // underfits it, a detector per mode does not).
  double subtype_spread = 0.8;
  std::uint64_t seed = 1;

  void check() const {
    if (positive_rate <= 0 || positive_rate >= 1)
      throw Error("SynthConfig: positive_rate must be in (0,1)");
    for (double r : {duplicate_rate, masked_age_rate, zero_lab_rate, invalid_rate,
                     source_missing_rate, missing_summary_rate})
      if (r < 0 || r > 1) throw Error("SynthConfig: rates must be in [0,1]");
    if (interaction_fraction < 0 || interaction_fraction > 1)
      throw Error("SynthConfig: interaction_fraction must be in [0,1]");
    if (subtype_spread < 0 || subtype_spread > 1)
      throw Error("SynthConfig: subtype_spread must be in [0,1]");
    if (embedding_dim <= 0) throw Error("SynthConfig: embedding_dim must be > 0");
    for (const auto& [g, s] : group_signal_strengths)
      if (s < 0) throw Error("SynthConfig: signal strengths must be >= 0");
  }

  double strength(FeatureGroup g) const {
    auto it = group_signal_strengths.find(g);
    return it == group_signal_strengths.end() ? 0.0 : it->second;
  }
};

inline std::vector<VocabToken> default_vocab() {
  std::vector<VocabToken> v;
  static const char* common[] = {
      "patient", "admitted", "hospital", "history", "chest", "cardiac", "left",
      "right",   "artery",   "coronary", "daily",   "dose",  "noted",  "exam",
      "normal",  "mild",     "moderate", "followup", "plan",  "course", "unit",
      "given",   "started",  "continued", "home",    "care",  "status", "report",
      "review",  "ecg"};
  for (const char* w : common) v.push_back({w, 1.0, 1.0});
  for (int i = 0; i < 30; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "filler%02d", i);
    v.push_back({buf, 1.0, 1.0});
  }
  static const char* risk[] = {"arrest", "shock", "sepsis", "intubated", "failure",
                               "hypotension", "pressors", "unresponsive",
                               "comfort", "hospice", "arrhythmia", "edema",
                               "ischemia", "critical", "deteriorated", "dnr"};
  for (const char* w : risk) v.push_back({w, 3.0, 0.6});
  static const char* protective[] = {"stable", "improved", "recovered", "ambulating",
                                     "discharged", "tolerating", "resolved",
                                     "asymptomatic", "wellcontrolled", "routine",
                                     "uneventful", "baseline", "independent",
                                     "rehabilitation", "cleared", "excellent"};
  for (const char* w : protective) v.push_back({w, 0.6, 3.0});
  return v;
}

// ---------------------------------------------------------------------------
// Generated cohort
// ---------------------------------------------------------------------------

struct SynthCohort {
  SynthConfig cfg;
  CohortSchema schema;
  std::vector<RawAdmissionRow> rows; // includes duplicates and corruption
  std::map<std::string, std::string> summaries;
  std::vector<std::pair<std::string, std::vector<double>>> embedding_rows;
  EmbeddingTable embeddings;
  std::vector<std::string> admission_ids; // unique, generation order
  std::vector<int> ground_truth;          // aligned with admission_ids
};

namespace synth_detail {

inline double lab_base(std::size_t lab_index) {
  return 20.0 + 7.0 * static_cast<double>(lab_index);
}

// deterministic per-feature weight in [0.6, 1.0] and alternating sign
inline double feature_weight(std::size_t j) {
  const double frac = std::fmod(0.37 * static_cast<double>(j + 1), 1.0);
  return 0.6 + 0.4 * frac;
}
inline double feature_sign(std::size_t j) { return (j % 2 == 0) ? 1.0 : -1.0; }

inline constexpr int kLinearComponents = 8;      // embedding dims 0..7
inline constexpr int kInteractionComponents = 8; // embedding dims 8..15
inline constexpr double kLinearAmplitude = 0.4;
inline constexpr double kInteractionAmplitude = 2.0;
inline constexpr double kEmbeddingNoise = 1.4;
// Word-vector spaces are not centered: components share a large common mean
// direction and per-dimension scales vary. Documents inherit these offsets,
// which batch normalization absorbs but a plain gradient-descent logistic
// regression has to fight through.
inline constexpr double kEmbeddingOffsetScale = 2.0;

} // namespace synth_detail

// Preprocessing defaults consistent with the generator: every lab column is
// zero-scrubbed and range-checked against the validity window its values are
// drawn from.
inline PreprocessConfig default_preprocess_config(const CohortSchema& schema) {
  PreprocessConfig cfg;
  cfg.age_columns = {"age"};
  std::size_t lab_index = 0;
  for (const auto& f : schema.features) {
    if (f.group != FeatureGroup::LabChart) continue;
    cfg.zero_is_missing.insert(f.name);
    const double base = synth_detail::lab_base(lab_index);
    cfg.validity_ranges[f.name] = {base * 0.2, base * 3.0};
    ++lab_index;
  }
  return cfg;
}

inline SynthCohort generate_cohort(const SynthConfig& user_cfg) {
  SynthConfig cfg = user_cfg;
  cfg.check();
  if (cfg.vocab.empty()) cfg.vocab = default_vocab();

  SynthCohort cohort;
  cohort.cfg = cfg;
  cohort.schema = CohortSchema::default_schema();
  const auto& features = cohort.schema.features;

  Rng rng_labels(mix_seed(cfg.seed, 1));
  Rng rng_feat(mix_seed(cfg.seed, 2));
  Rng rng_text(mix_seed(cfg.seed, 3));
  Rng rng_corrupt(mix_seed(cfg.seed, 4));
  Rng rng_embed(mix_seed(cfg.seed, 5));
  Rng rng_dup(mix_seed(cfg.seed, 6));

  // --- embedding table -----------------------------------------------------
  const int dim = cfg.embedding_dim;
  std::vector<double> dim_offset(static_cast<std::size_t>(dim));
  for (auto& o : dim_offset)
    o = rng_embed.normal(0.0, synth_detail::kEmbeddingOffsetScale);
  auto make_vector = [&](double linear_dir, double interaction_dir) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (int c = 0; c < dim; ++c)
      v[static_cast<std::size_t>(c)] =
          dim_offset[static_cast<std::size_t>(c)] +
          rng_embed.normal(0.0, synth_detail::kEmbeddingNoise);
    for (int c = 0; c < std::min(dim, synth_detail::kLinearComponents); ++c)
      v[static_cast<std::size_t>(c)] += linear_dir * synth_detail::kLinearAmplitude;
    for (int c = synth_detail::kLinearComponents;
         c < std::min(dim, synth_detail::kLinearComponents +
                               synth_detail::kInteractionComponents);
         ++c)
      v[static_cast<std::size_t>(c)] += interaction_dir * synth_detail::kInteractionAmplitude;
    return v;
  };

  std::vector<std::string> interaction_a, interaction_b;
  for (int i = 0; i < 8; ++i) {
    char a[16], b[16];
    std::snprintf(a, sizeof a, "alpha%02d", i);
    std::snprintf(b, sizeof b, "beta%02d", i);
    interaction_a.push_back(a);
    interaction_b.push_back(b);
  }

  for (const auto& tok : cfg.vocab) {
    double linear_dir = 0.0;
    if (tok.weight_pos > tok.weight_neg) linear_dir = 1.0;
    else if (tok.weight_neg > tok.weight_pos) linear_dir = -1.0;
    cohort.embedding_rows.emplace_back(tok.token, make_vector(linear_dir, 0.0));
  }
  for (const auto& t : interaction_a)
    cohort.embedding_rows.emplace_back(t, make_vector(0.0, 1.0));
  for (const auto& t : interaction_b)
    cohort.embedding_rows.emplace_back(t, make_vector(0.0, -1.0));

  cohort.embeddings.dimension = static_cast<std::size_t>(dim);
  for (const auto& [token, vec] : cohort.embedding_rows)
    cohort.embeddings.vectors.emplace(token, vec);

  // Class-conditional sampling weights over the vocabulary. The contrast
  // between the two emission distributions interpolates from neutral (text
  // strength 0) toward the configured weights; the 0.45 factor calibrates
  // strength 1.0 to the reference free-text-only operating point (~82%
  // cross-validated accuracy on the default cohort). Positive admissions
  // scale this contrast by their subtype multiplier.
  const double s_text = cfg.strength(FeatureGroup::TextEmbedding);
  const double base_contrast = std::min(s_text * 0.45, 1.0);
  std::vector<double> cum_scratch(cfg.vocab.size());
  auto draw_vocab = [&](int label, double contrast_mult) {
    const double contrast = std::clamp(base_contrast * contrast_mult, 0.0, 1.0);
    double total = 0;
    for (std::size_t t = 0; t < cfg.vocab.size(); ++t) {
      const double w = label ? cfg.vocab[t].weight_pos : cfg.vocab[t].weight_neg;
      total += 1.0 + (w - 1.0) * contrast;
      cum_scratch[t] = total;
    }
    const double x = rng_text.uniform() * total;
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(cum_scratch.begin(), cum_scratch.end(), x) -
        cum_scratch.begin());
    return cfg.vocab[std::min(idx, cfg.vocab.size() - 1)].token;
  };

  // --- admissions ------------------------------------------------------------
  const double p_interaction = std::min(0.25 * cfg.interaction_strength, 0.6);
  const double p_signal = s_text > 0 ? 0.25 : 0.0;

  static const char* icd9_codes[] = {"410.0", "410.1", "410.2", "410.3",
                                     "410.4", "410.5", "410.6", "410.7",
                                     "410.8", "410.9", "411.0"};

  for (std::size_t i = 0; i < cfg.n_admissions; ++i) {
    char adm[16], subj[16];
    std::snprintf(adm, sizeof adm, "A%06zu", i);
    std::snprintf(subj, sizeof subj, "S%06zu", i);

    const int y = rng_labels.bernoulli(cfg.positive_rate) ? 1 : 0;
    const int z = rng_labels.bernoulli(0.5) ? 1 : 0;
    const bool carrier = rng_labels.bernoulli(cfg.interaction_fraction);
    // positive subtype: 0 = text-loud, 1 = structured-loud
    const int subtype = rng_labels.bernoulli(0.5) ? 1 : 0;
    const double spread = cfg.subtype_spread;
    const double text_mult =
        y ? (subtype == 0 ? 1.0 + spread : std::max(0.0, 1.0 - 0.9 * spread)) : 1.0;
    const double struct_mult =
        y ? (subtype == 1 ? 1.0 + spread : std::max(0.0, 1.0 - 0.9 * spread)) : 1.0;
    cohort.admission_ids.emplace_back(adm);
    cohort.ground_truth.push_back(y);

    RawAdmissionRow row;
    row.admission_id = adm;
    row.subject_id = subj;
    row.icd9_code = icd9_codes[rng_labels.uniform_below(11)];

    // admit 2001-2008; death inside the horizon iff positive
    {
      const int year = 2001 + static_cast<int>(rng_labels.uniform_below(8));
      const unsigned month = 1 + static_cast<unsigned>(rng_labels.uniform_below(12));
      const unsigned day = 1 + static_cast<unsigned>(rng_labels.uniform_below(28));
      row.admit_date = CalendarDate{year, month, day};
      const long admit_day = row.admit_date.day_number();
      if (y == 1) {
        const long offset = static_cast<long>(rng_labels.uniform_below(366)); // 0..365
        const auto dn = std::chrono::sys_days(std::chrono::days(admit_day + offset));
        const std::chrono::year_month_day ymd(dn);
        row.death_date = CalendarDate{static_cast<int>(ymd.year()),
                                      static_cast<unsigned>(ymd.month()),
                                      static_cast<unsigned>(ymd.day())};
      } else if (rng_labels.bernoulli(0.25)) {
        const long offset = 366 + static_cast<long>(rng_labels.uniform_below(1200));
        const auto dn = std::chrono::sys_days(std::chrono::days(admit_day + offset));
        const std::chrono::year_month_day ymd(dn);
        row.death_date = CalendarDate{static_cast<int>(ymd.year()),
                                      static_cast<unsigned>(ymd.month()),
                                      static_cast<unsigned>(ymd.day())};
      }
    }

    // --- structured features ---
    row.features.resize(features.size());
    std::size_t lab_index = 0;
    for (std::size_t j = 0; j < features.size(); ++j) {
      const auto& col = features[j];
      const double s = cfg.strength(col.group);
      const double w = synth_detail::feature_weight(j);
      const double sign = synth_detail::feature_sign(j);
      double value = 0.0;

      if (col.name == "age") {
        double age = 40.0 + rng_feat.uniform() * 49.0 + y * s * 4.0 * w;
        age = std::min(age, 89.0);
        if (rng_corrupt.bernoulli(cfg.masked_age_rate)) {
          const double true_age = 90.0 + rng_corrupt.uniform() * 15.0;
          value = true_age + 211.0; // as the source database stores it
        } else {
          value = age;
        }
        row.features[j] = value;
        continue;
      }
      if (col.name == "admission_type") {
        // interaction carrier: structured side of the XOR term
        value = static_cast<double>(z) + rng_feat.normal(0.0, 0.25);
        row.features[j] = value;
        continue;
      }

      const double shift = y ? sign * w * s * struct_mult : 0.0;
      switch (col.group) {
        case FeatureGroup::Admission:
          value = 5.0 + static_cast<double>(j) + rng_feat.normal(0.0, 1.5) +
                  shift * 0.9;
          break;
        case FeatureGroup::Demographics:
          value = 2.0 + rng_feat.normal(0.0, 1.0) + shift * 0.55;
          break;
        case FeatureGroup::Treatment:
        case FeatureGroup::Comorbidity: {
          const double p0 = 0.12 + 0.02 * static_cast<double>(j % 5);
          const double p1 = std::clamp(p0 + shift * 0.11, 0.02, 0.95);
          value = rng_feat.bernoulli(p1) ? 1.0 : 0.0;
          break;
        }
        case FeatureGroup::LabChart: {
          const double base = synth_detail::lab_base(lab_index);
          value = base * (1.0 + shift * 0.035) +
                  rng_feat.normal(0.0, base * 0.12);
          value = std::max(value, base * 0.25);
          break;
        }
        case FeatureGroup::TextEmbedding:
          break;
      }

      if (col.group == FeatureGroup::LabChart) {
        const double base = synth_detail::lab_base(lab_index);
        const double r = rng_corrupt.uniform();
        if (r < cfg.source_missing_rate) {
          row.features[j] = std::nullopt;
          ++lab_index;
          continue;
        } else if (r < cfg.source_missing_rate + cfg.zero_lab_rate) {
          value = 0.0; // "see comment" entries
        } else if (r < cfg.source_missing_rate + cfg.zero_lab_rate + cfg.invalid_rate) {
          // half biologically invalid, half extreme-but-valid outliers
          value = rng_corrupt.bernoulli(0.5) ? base * 5.0 : base * 2.5;
        }
        ++lab_index;
      }
      row.features[j] = value;
    }

    // --- discharge summary ---
    if (!rng_corrupt.bernoulli(cfg.missing_summary_rate)) {
      // Product interaction: an admission-context token channel whose class
      // direction is gated by the structured z carrier. With z = 1 the
      // channel reads normally; with z = 0 it partially reverses, so its
      // product with z carries signal no linear model can represent.
      const double p_alpha =
          z == 1 ? (y ? 0.9 : 0.1) : (y ? 0.28 : 0.72);
      std::string text;
      for (std::size_t t = 0; t < cfg.summary_tokens; ++t) {
        const double r = rng_text.uniform();
        std::string token;
        if (carrier && r < p_interaction) {
          const auto& cluster =
              rng_text.bernoulli(p_alpha) ? interaction_a : interaction_b;
          token = cluster[rng_text.uniform_below(cluster.size())];
        } else if (r < p_interaction + p_signal) {
          token = draw_vocab(y, text_mult);
        } else {
          token = cfg.vocab[rng_text.uniform_below(cfg.vocab.size())].token;
        }
        if (t) text += ' ';
        text += token;
      }
      cohort.summaries[row.admission_id] = std::move(text);
    }

    char note[24];
    std::snprintf(note, sizeof note, "N%06zu", i);
    row.note_id = note;

    const bool duplicate = rng_dup.bernoulli(cfg.duplicate_rate);
    cohort.rows.push_back(row);
    if (duplicate) {
      // second source row for the same admission: an extra treatment and
      // comorbidity indicator, possibly another diagnosis code
      RawAdmissionRow dup = row;
      dup.icd9_code = icd9_codes[rng_dup.uniform_below(11)];
      std::vector<std::size_t> treatment_cols, comorbidity_cols;
      for (std::size_t j = 0; j < features.size(); ++j) {
        if (features[j].group == FeatureGroup::Treatment) treatment_cols.push_back(j);
        if (features[j].group == FeatureGroup::Comorbidity) comorbidity_cols.push_back(j);
      }
      dup.features[treatment_cols[rng_dup.uniform_below(treatment_cols.size())]] = 1.0;
      dup.features[comorbidity_cols[rng_dup.uniform_below(comorbidity_cols.size())]] = 1.0;
      cohort.rows.push_back(std::move(dup));
    }
  }

  return cohort;
}

// ---------------------------------------------------------------------------
// Fixture files
// ---------------------------------------------------------------------------

struct FixturePaths {
  std::string cohort_csv;
  std::string summaries_tsv;
  std::string embeddings_vec;
  std::string labels_csv;
  std::string schema_csv;
  std::string config_echo;

  static FixturePaths in(const std::string& dir) {
    return {dir + "/cohort.csv",   dir + "/summaries.tsv", dir + "/embeddings.vec",
            dir + "/labels.csv",   dir + "/schema.csv",    dir + "/synth_config.txt"};
  }
};

inline std::string serialize_synth_config(const SynthConfig& cfg) {
  std::ostringstream out;
  out << "synth.n_admissions = " << cfg.n_admissions << "\n";
  out << "synth.positive_rate = " << csv::format_double(cfg.positive_rate) << "\n";
  out << "synth.duplicate_rate = " << csv::format_double(cfg.duplicate_rate) << "\n";
  out << "synth.masked_age_rate = " << csv::format_double(cfg.masked_age_rate) << "\n";
  out << "synth.zero_lab_rate = " << csv::format_double(cfg.zero_lab_rate) << "\n";
  out << "synth.invalid_rate = " << csv::format_double(cfg.invalid_rate) << "\n";
  out << "synth.source_missing_rate = " << csv::format_double(cfg.source_missing_rate)
      << "\n";
  out << "synth.missing_summary_rate = "
      << csv::format_double(cfg.missing_summary_rate) << "\n";
  for (FeatureGroup g : kAllGroups)
    out << "synth.signal." << to_string(g) << " = "
        << csv::format_double(cfg.strength(g)) << "\n";
  out << "synth.interaction_fraction = "
      << csv::format_double(cfg.interaction_fraction) << "\n";
  out << "synth.interaction_strength = "
      << csv::format_double(cfg.interaction_strength) << "\n";
  out << "synth.embedding_dim = " << cfg.embedding_dim << "\n";
  out << "synth.summary_tokens = " << cfg.summary_tokens << "\n";
  out << "synth.seed = " << cfg.seed << "\n";
  return out.str();
}

// Writes cohort.csv, summaries.tsv, embeddings.vec, labels.csv, schema.csv
// and the configuration echo. Deterministic byte-for-byte per seed.
inline FixturePaths write_fixture(const SynthCohort& cohort, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create fixture directory " + dir + ": " + ec.message());
  const FixturePaths paths = FixturePaths::in(dir);

  try {
    // cohort CSV
    {
      std::ostringstream out;
      const auto header = cohort.schema.header();
      out << csv::join_row(header) << "\n";
      for (const auto& row : cohort.rows) {
        std::vector<std::string> fields;
        fields.reserve(header.size());
        fields.push_back(row.admission_id);
        fields.push_back(row.subject_id);
        fields.push_back(row.icd9_code);
        fields.push_back(row.admit_date.to_string());
        fields.push_back(row.death_date ? row.death_date->to_string() : "");
        for (const auto& v : row.features)
          fields.push_back(v ? csv::format_double(*v) : "");
        fields.push_back(row.note_id.value_or(""));
        out << csv::join_row(fields) << "\n";
      }
      csv::write_file(paths.cohort_csv, out.str());
    }
    // summaries
    {
      std::ostringstream out;
      for (const auto& [id, text] : cohort.summaries) out << id << '\t' << text << "\n";
      csv::write_file(paths.summaries_tsv, out.str());
    }
    // embeddings
    {
      std::ostringstream out;
      out << cohort.embedding_rows.size() << ' ' << cohort.embeddings.dimension << "\n";
      for (const auto& [token, vec] : cohort.embedding_rows) {
        out << token;
        for (double v : vec) out << ' ' << csv::format_double(v);
        out << "\n";
      }
      csv::write_file(paths.embeddings_vec, out.str());
    }
    // ground-truth labels
    {
      std::ostringstream out;
      out << "admission_id,label\n";
      for (std::size_t i = 0; i < cohort.admission_ids.size(); ++i)
        out << cohort.admission_ids[i] << ',' << cohort.ground_truth[i] << "\n";
      csv::write_file(paths.labels_csv, out.str());
    }
    cohort.schema.save(paths.schema_csv);
    csv::write_file(paths.config_echo, serialize_synth_config(cohort.cfg));
  } catch (const Error& e) {
    throw IoError(e.what());
  }
  return paths;
}

} // namespace mixmort
