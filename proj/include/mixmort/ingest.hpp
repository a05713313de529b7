#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mixmort/core.hpp"
#include "mixmort/csv.hpp"

namespace mixmort {

struct SchemaMismatch : Error {
  using Error::Error;
};
struct MalformedRow : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Cohort schema
// ---------------------------------------------------------------------------

// How duplicate rows for one admission merge a feature.
enum class MergeKind : std::uint8_t {
  Scalar,    // first non-missing wins; later conflicting values are logged
  Indicator, // 1 if any duplicate sets a nonzero value
  Count,     // non-missing values summed
};

inline const char* to_string(MergeKind k) {
  switch (k) {
    case MergeKind::Scalar: return "scalar";
    case MergeKind::Indicator: return "indicator";
    case MergeKind::Count: return "count";
  }
  return "?";
}

inline std::optional<MergeKind> merge_kind_from_string(std::string_view s) {
  if (s == "scalar") return MergeKind::Scalar;
  if (s == "indicator") return MergeKind::Indicator;
  if (s == "count") return MergeKind::Count;
  return std::nullopt;
}

struct CohortColumn {
  std::string name;
  FeatureGroup group;
  MergeKind kind = MergeKind::Scalar;
};

// Column layout of a cohort CSV: five fixed leading columns, the structured
// feature columns, and a trailing note_id reference.
struct CohortSchema {
  std::vector<CohortColumn> features;

  std::vector<std::string> header() const {
    std::vector<std::string> h = {"admission_id", "subject_id", "icd9_code",
                                  "admit_date", "death_date"};
    for (const auto& f : features) h.push_back(f.name);
    h.push_back("note_id");
    return h;
  }

  std::optional<std::size_t> feature_index(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
      if (features[i].name == name) return i;
    return std::nullopt;
  }

  // The paper never enumerates its 79 structured features; this default
  // allocates 79 columns across the five structured groups
  // (admission 5, demographics 6, treatment 10, comorbidity 18, lab/chart 40)
  // and is overridable via a schema file.
  static CohortSchema default_schema() {
    CohortSchema s;
    auto add = [&](const std::string& name, FeatureGroup g, MergeKind k) {
      s.features.push_back({name, g, k});
    };
    // admission information
    add("days_of_admission", FeatureGroup::Admission, MergeKind::Scalar);
    add("er_diagnosis_ami", FeatureGroup::Admission, MergeKind::Scalar);
    add("er_diagnosis_rule_out_ami", FeatureGroup::Admission, MergeKind::Scalar);
    add("discharge_location", FeatureGroup::Admission, MergeKind::Scalar);
    add("admission_type", FeatureGroup::Admission, MergeKind::Scalar);
    // demographics
    add("age", FeatureGroup::Demographics, MergeKind::Scalar);
    add("gender", FeatureGroup::Demographics, MergeKind::Scalar);
    add("ethnicity", FeatureGroup::Demographics, MergeKind::Scalar);
    add("religion", FeatureGroup::Demographics, MergeKind::Scalar);
    add("marital_status", FeatureGroup::Demographics, MergeKind::Scalar);
    add("insurance", FeatureGroup::Demographics, MergeKind::Scalar);
    // treatments
    for (const char* t :
         {"catheterization", "defibrillator", "heart_assist", "cabg", "ptca",
          "stent", "thrombolysis", "pacemaker", "balloon_pump", "dialysis"})
      add(std::string("treat_") + t, FeatureGroup::Treatment, MergeKind::Indicator);
    // comorbidities
    for (const char* c :
         {"cancer", "endocrine", "diabetes", "hypertension", "renal_failure",
          "liver_disease", "copd", "stroke", "heart_failure", "arrhythmia",
          "anemia", "obesity", "depression", "dementia", "pvd", "valvular",
          "coagulopathy", "alcohol_abuse"})
      add(std::string("comorb_") + c, FeatureGroup::Comorbidity, MergeKind::Indicator);
    // lab and chart values
    for (int i = 0; i < 40; ++i) {
      char name[16];
      std::snprintf(name, sizeof name, "lab_%02d", i);
      add(name, FeatureGroup::LabChart, MergeKind::Scalar);
    }
    return s;
  }

  // schema file: one `name,group,kind` per line, `#` comments
  static CohortSchema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open schema file: " + path);
    CohortSchema s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
        line.pop_back();
      if (line.empty()) continue;
      auto fields = csv::split_line(line);
      if (fields.size() != 3)
        throw Error(path + ":" + std::to_string(lineno) +
                    ": expected name,group,kind");
      auto group = feature_group_from_string(fields[1]);
      auto kind = merge_kind_from_string(fields[2]);
      if (!group || *group == FeatureGroup::TextEmbedding)
        throw Error(path + ":" + std::to_string(lineno) +
                    ": bad structured group: " + fields[1]);
      if (!kind)
        throw Error(path + ":" + std::to_string(lineno) + ": bad kind: " + fields[2]);
      s.features.push_back({fields[0], *group, *kind});
    }
    if (s.features.empty()) throw Error(path + ": empty schema");
    return s;
  }

  void save(const std::string& path) const {
    std::ostringstream out;
    out << "# structured feature schema: name,group,kind\n";
    for (const auto& f : features)
      out << f.name << "," << to_string(f.group) << "," << to_string(f.kind) << "\n";
    csv::write_file(path, out.str());
  }
};

// ---------------------------------------------------------------------------
// Raw rows
// ---------------------------------------------------------------------------

struct RawAdmissionRow {
  std::string admission_id;
  std::string subject_id;
  std::string icd9_code;
  CalendarDate admit_date;
  std::optional<CalendarDate> death_date;
  std::vector<std::optional<double>> features; // aligned with schema.features
  std::optional<std::string> note_id;
};

struct IngestLog {
  std::size_t unparseable_codes = 0;
  std::size_t scalar_conflicts = 0;
  std::size_t negative_intervals = 0;
  std::vector<std::string> messages;

  void warn(std::string msg) { messages.push_back(std::move(msg)); }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

inline std::vector<RawAdmissionRow> parse_cohort_stream(std::istream& in,
                                                        const CohortSchema& schema,
                                                        const std::string& name) {
  std::string line;
  if (!std::getline(in, line))
    throw SchemaMismatch(name + ": empty file, expected header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto expected = schema.header();
  const auto got = csv::split_line(line);
  if (got != expected) {
    std::string msg = name + ": header mismatch; expected ";
    for (std::size_t i = 0; i < expected.size(); ++i)
      msg += (i ? "," : "") + expected[i];
    throw SchemaMismatch(msg);
  }

  std::vector<RawAdmissionRow> rows;
  std::size_t lineno = 1;
  const std::size_t arity = expected.size();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv::split_line(line);
    auto fail = [&](const std::string& what) -> MalformedRow {
      return MalformedRow(name + ":" + std::to_string(lineno) + ": " + what);
    };
    if (fields.size() != arity)
      throw fail("expected " + std::to_string(arity) + " fields, got " +
                 std::to_string(fields.size()));

    RawAdmissionRow row;
    row.admission_id = fields[0];
    row.subject_id = fields[1];
    row.icd9_code = fields[2];
    if (row.admission_id.empty()) throw fail("empty admission_id");
    if (row.subject_id.empty()) throw fail("empty subject_id");

    auto admit = CalendarDate::parse(fields[3]);
    if (!admit) throw fail("bad admit_date: " + fields[3]);
    row.admit_date = *admit;
    if (!fields[4].empty()) {
      auto death = CalendarDate::parse(fields[4]);
      if (!death) throw fail("bad death_date: " + fields[4]);
      row.death_date = *death;
    }

    row.features.resize(schema.features.size());
    for (std::size_t i = 0; i < schema.features.size(); ++i) {
      const std::string& cell = fields[5 + i];
      if (cell.empty()) continue;
      auto v = csv::parse_double(cell);
      if (!v)
        throw fail("bad number in column " + schema.features[i].name + ": " + cell);
      row.features[i] = *v;
    }
    if (!fields[arity - 1].empty()) row.note_id = fields[arity - 1];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<RawAdmissionRow> parse_cohort(const std::string& path,
                                                 const CohortSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open cohort file: " + path);
  return parse_cohort_stream(in, schema, path);
}

// ---------------------------------------------------------------------------
// Cohort selection
// ---------------------------------------------------------------------------

// "XXX.Y[Z]" read as a decimal number; non-numeric codes are unparseable.
inline std::optional<double> parse_icd9(std::string_view code) {
  return csv::parse_double(code);
}

inline std::vector<RawAdmissionRow> select_by_icd9(
    const std::vector<RawAdmissionRow>& rows, double lo = 410.0,
    double hi = 411.0, IngestLog* log = nullptr) {
  if (lo > hi) throw Error("select_by_icd9: lo > hi");
  std::vector<RawAdmissionRow> kept;
  for (const auto& row : rows) {
    auto code = parse_icd9(row.icd9_code);
    if (!code) {
      if (log) {
        ++log->unparseable_codes;
        log->warn("unparseable ICD-9 code '" + row.icd9_code +
                  "' on admission " + row.admission_id + "; row skipped");
      }
      continue;
    }
    if (*code >= lo && *code <= hi) kept.push_back(row);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Deduplication
// ---------------------------------------------------------------------------

// One AdmissionRecord per distinct admission_id, first-occurrence order.
// Indicators are unioned and counts summed across duplicates; scalars keep
// the first non-missing value, logging later disagreements.
inline std::vector<AdmissionRecord> deduplicate(
    const std::vector<RawAdmissionRow>& rows, const CohortSchema& schema,
    IngestLog* log = nullptr) {
  std::vector<AdmissionRecord> records;
  std::unordered_map<std::string, std::size_t> index;
  // Raw per-record feature slots, merged in schema order.
  std::vector<std::vector<std::optional<double>>> merged;

  for (const auto& row : rows) {
    auto [it, inserted] = index.emplace(row.admission_id, records.size());
    if (inserted) {
      AdmissionRecord rec;
      rec.admission_id = row.admission_id;
      rec.subject_id = row.subject_id;
      rec.icd9_codes.insert(row.icd9_code);
      rec.admit_date = row.admit_date;
      rec.death_date = row.death_date;
      if (row.note_id) rec.discharge_summary = std::nullopt; // joined later
      records.push_back(std::move(rec));
      merged.push_back(row.features);
      continue;
    }
    AdmissionRecord& rec = records[it->second];
    auto& slot = merged[it->second];
    rec.icd9_codes.insert(row.icd9_code);
    if (!rec.death_date && row.death_date) rec.death_date = row.death_date;
    for (std::size_t i = 0; i < schema.features.size(); ++i) {
      const auto& incoming = row.features[i];
      if (!incoming) continue;
      switch (schema.features[i].kind) {
        case MergeKind::Indicator:
          if (*incoming != 0.0) slot[i] = 1.0;
          else if (!slot[i]) slot[i] = 0.0;
          break;
        case MergeKind::Count:
          slot[i] = (slot[i] ? *slot[i] : 0.0) + *incoming;
          break;
        case MergeKind::Scalar:
          if (!slot[i]) {
            slot[i] = incoming;
          } else if (*slot[i] != *incoming && log) {
            ++log->scalar_conflicts;
            log->warn("admission " + rec.admission_id + ": conflicting '" +
                      schema.features[i].name + "' (" +
                      csv::format_double(*slot[i]) + " vs " +
                      csv::format_double(*incoming) + "); first value kept");
          }
          break;
      }
    }
  }

  for (std::size_t r = 0; r < records.size(); ++r) {
    for (std::size_t i = 0; i < schema.features.size(); ++i) {
      records[r].structured[schema.features[i].group][schema.features[i].name] =
          merged[r][i];
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

// label = 1 iff death_date is present and within horizon_days of admission
// (inclusive boundary). Death before admission flags the record and leaves
// the label missing so downstream stages drop it.
inline std::vector<AdmissionRecord> assign_labels(std::vector<AdmissionRecord> records,
                                                  long horizon_days = 365,
                                                  IngestLog* log = nullptr) {
  if (horizon_days <= 0) throw Error("assign_labels: horizon_days must be > 0");
  for (auto& rec : records) {
    rec.negative_interval = false;
    if (!rec.death_date) {
      rec.label = 0;
      continue;
    }
    const long interval = days_between(rec.admit_date, *rec.death_date);
    if (interval < 0) {
      rec.negative_interval = true;
      rec.label = std::nullopt;
      if (log) {
        ++log->negative_intervals;
        log->warn("admission " + rec.admission_id +
                  ": death date precedes admit date; record excluded");
      }
      continue;
    }
    rec.label = interval <= horizon_days ? 1 : 0;
  }
  return records;
}

inline std::vector<AdmissionRecord> drop_unlabeled(std::vector<AdmissionRecord> records) {
  std::vector<AdmissionRecord> kept;
  kept.reserve(records.size());
  for (auto& r : records)
    if (r.label) kept.push_back(std::move(r));
  return kept;
}

// ---------------------------------------------------------------------------
// Discharge summaries
// ---------------------------------------------------------------------------

// summaries file: admission_id TAB text, one admission per line
inline std::map<std::string, std::string> load_summaries(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open summaries file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw MalformedRow(path + ":" + std::to_string(lineno) +
                         ": expected `admission_id TAB text`");
    out.emplace(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

inline void attach_summaries(std::vector<AdmissionRecord>& records,
                             const std::map<std::string, std::string>& summaries) {
  for (auto& rec : records) {
    auto it = summaries.find(rec.admission_id);
    if (it != summaries.end()) rec.discharge_summary = it->second;
  }
}

// ---------------------------------------------------------------------------
// Record list -> structured FeatureMatrix
// ---------------------------------------------------------------------------

inline FeatureMatrix structured_matrix(const std::vector<AdmissionRecord>& records,
                                       const CohortSchema& schema) {
  std::vector<std::string> names;
  std::vector<FeatureGroup> groups;
  for (const auto& f : schema.features) {
    names.push_back(f.name);
    groups.push_back(f.group);
  }
  FeatureMatrix m = FeatureMatrix::zeros(records.size(), names, groups);
  for (std::size_t r = 0; r < records.size(); ++r) {
    for (std::size_t c = 0; c < schema.features.size(); ++c) {
      const auto& f = schema.features[c];
      std::optional<double> v;
      auto git = records[r].structured.find(f.group);
      if (git != records[r].structured.end()) {
        auto fit = git->second.find(f.name);
        if (fit != git->second.end()) v = fit->second;
      }
      if (v) m.set(r, c, *v);
      else m.set_missing(r, c);
    }
  }
  return m;
}

inline std::vector<int> labels_of(const std::vector<AdmissionRecord>& records) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) {
    if (!r.label) throw Error("labels_of: unlabeled record " + r.admission_id);
    labels.push_back(*r.label);
  }
  return labels;
}

} // namespace mixmort
