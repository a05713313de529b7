#pragma once

#include <array>
#include <chrono>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mixmort {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Feature groups
// ---------------------------------------------------------------------------

enum class FeatureGroup : std::uint8_t {
  Admission = 0,
  Demographics,
  Treatment,
  Comorbidity,
  LabChart,
  TextEmbedding,
};

inline constexpr std::array<FeatureGroup, 6> kAllGroups = {
    FeatureGroup::Admission,   FeatureGroup::Demographics,
    FeatureGroup::Treatment,   FeatureGroup::Comorbidity,
    FeatureGroup::LabChart,    FeatureGroup::TextEmbedding,
};

inline const char* to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::Admission: return "admission";
    case FeatureGroup::Demographics: return "demographics";
    case FeatureGroup::Treatment: return "treatment";
    case FeatureGroup::Comorbidity: return "comorbidity";
    case FeatureGroup::LabChart: return "lab_chart";
    case FeatureGroup::TextEmbedding: return "text_embedding";
  }
  return "?";
}

inline std::optional<FeatureGroup> feature_group_from_string(std::string_view s) {
  for (FeatureGroup g : kAllGroups) {
    if (s == to_string(g)) return g;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Calendar dates
// ---------------------------------------------------------------------------

// Validated proleptic Gregorian date. Stored flat so records stay trivially
// copyable; arithmetic goes through std::chrono.
struct CalendarDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;

  static std::optional<CalendarDate> parse(std::string_view s) {
    // strict ISO-8601: YYYY-MM-DD
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto num = [](std::string_view t) -> std::optional<int> {
      int v = 0;
      auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || p != t.data() + t.size()) return std::nullopt;
      return v;
    };
    auto y = num(s.substr(0, 4));
    auto m = num(s.substr(5, 2));
    auto d = num(s.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    const std::chrono::year_month_day ymd{
        std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
        std::chrono::day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    return CalendarDate{*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d)};
  }

  std::string to_string() const {
    char buf[11];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
    return buf;
  }

  long day_number() const {
    const std::chrono::year_month_day ymd{std::chrono::year{year},
                                          std::chrono::month{month},
                                          std::chrono::day{day}};
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
  }

  friend auto operator<=>(const CalendarDate&, const CalendarDate&) = default;
};

inline long days_between(const CalendarDate& from, const CalendarDate& to) {
  return to.day_number() - from.day_number();
}

// ---------------------------------------------------------------------------
// Admission records
// ---------------------------------------------------------------------------

// One deduplicated hospital admission. `label` is missing until assigned,
// or when the record was flagged (death before admission) and must be
// excluded downstream.
struct AdmissionRecord {
  std::string admission_id;
  std::string subject_id;
  std::set<std::string> icd9_codes;
  CalendarDate admit_date;
  std::optional<CalendarDate> death_date;
  std::map<FeatureGroup, std::map<std::string, std::optional<double>>> structured;
  std::optional<std::string> discharge_summary;
  std::optional<int> label;
  bool negative_interval = false;
};

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

struct ColumnStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct NoMatchingColumns : Error {
  using Error::Error;
};

// Dense n x d matrix with per-column group tags and an explicit missing mask
// (so 0.0 stays a legal value). Row-major storage.
struct FeatureMatrix {
  std::size_t n_rows = 0;
  std::vector<std::string> column_names;
  std::vector<FeatureGroup> column_groups;
  std::vector<double> values;        // n_rows * cols(), row-major
  std::vector<std::uint8_t> missing; // same layout; 1 = missing
  std::optional<std::vector<ColumnStats>> fit_stats;

  std::size_t cols() const { return column_names.size(); }
  std::size_t rows() const { return n_rows; }

  static FeatureMatrix zeros(std::size_t rows, std::vector<std::string> names,
                             std::vector<FeatureGroup> groups) {
    if (names.size() != groups.size())
      throw Error("FeatureMatrix: names/groups size mismatch");
    FeatureMatrix m;
    m.n_rows = rows;
    m.column_names = std::move(names);
    m.column_groups = std::move(groups);
    m.values.assign(rows * m.column_names.size(), 0.0);
    m.missing.assign(rows * m.column_names.size(), 0);
    return m;
  }

  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  bool is_missing(std::size_t r, std::size_t c) const {
    return missing[r * cols() + c] != 0;
  }
  void set(std::size_t r, std::size_t c, double v) {
    values[r * cols() + c] = v;
    missing[r * cols() + c] = 0;
  }
  void set_missing(std::size_t r, std::size_t c) {
    values[r * cols() + c] = 0.0;
    missing[r * cols() + c] = 1;
  }

  std::size_t missing_count() const {
    std::size_t n = 0;
    for (auto m : missing) n += m;
    return n;
  }

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t c = 0; c < column_names.size(); ++c)
      if (column_names[c] == name) return c;
    return std::nullopt;
  }
};

struct LabeledDataset {
  FeatureMatrix features;
  std::vector<int> labels;

  void check() const {
    if (features.rows() != labels.size())
      throw Error("LabeledDataset: row count != label count");
  }
};

// Keeps exactly the columns whose group is in `groups`, order preserved;
// fit_stats sliced consistently.
inline FeatureMatrix select_columns(const FeatureMatrix& m,
                                    const std::set<FeatureGroup>& groups) {
  if (groups.empty()) throw NoMatchingColumns("select_columns: empty group set");
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < m.cols(); ++c)
    if (groups.count(m.column_groups[c])) keep.push_back(c);
  if (keep.empty())
    throw NoMatchingColumns("select_columns: no column matches the selection");

  FeatureMatrix out;
  out.n_rows = m.n_rows;
  out.column_names.reserve(keep.size());
  out.column_groups.reserve(keep.size());
  for (std::size_t c : keep) {
    out.column_names.push_back(m.column_names[c]);
    out.column_groups.push_back(m.column_groups[c]);
  }
  out.values.resize(m.n_rows * keep.size());
  out.missing.resize(m.n_rows * keep.size());
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    for (std::size_t k = 0; k < keep.size(); ++k) {
      out.values[r * keep.size() + k] = m.at(r, keep[k]);
      out.missing[r * keep.size() + k] = m.missing[r * m.cols() + keep[k]];
    }
  }
  if (m.fit_stats) {
    std::vector<ColumnStats> stats;
    stats.reserve(keep.size());
    for (std::size_t c : keep) stats.push_back((*m.fit_stats)[c]);
    out.fit_stats = std::move(stats);
  }
  return out;
}

// Concatenates columns of two matrices over the same rows.
inline FeatureMatrix hcat(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() != b.rows()) throw Error("hcat: row count mismatch");
  FeatureMatrix out;
  out.n_rows = a.rows();
  out.column_names = a.column_names;
  out.column_names.insert(out.column_names.end(), b.column_names.begin(),
                          b.column_names.end());
  out.column_groups = a.column_groups;
  out.column_groups.insert(out.column_groups.end(), b.column_groups.begin(),
                           b.column_groups.end());
  const std::size_t d = out.column_names.size();
  out.values.resize(out.n_rows * d);
  out.missing.resize(out.n_rows * d);
  for (std::size_t r = 0; r < out.n_rows; ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      out.values[r * d + c] = a.at(r, c);
      out.missing[r * d + c] = a.missing[r * a.cols() + c];
    }
    for (std::size_t c = 0; c < b.cols(); ++c) {
      out.values[r * d + a.cols() + c] = b.at(r, c);
      out.missing[r * d + a.cols() + c] = b.missing[r * b.cols() + c];
    }
  }
  if (a.fit_stats && b.fit_stats) {
    std::vector<ColumnStats> stats = *a.fit_stats;
    stats.insert(stats.end(), b.fit_stats->begin(), b.fit_stats->end());
    out.fit_stats = std::move(stats);
  }
  return out;
}

} // namespace mixmort
