#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mixmort/core.hpp"
#include "mixmort/csv.hpp"
#include "mixmort/eval.hpp"
#include "mixmort/preprocess.hpp"

namespace mixmort {

// ---------------------------------------------------------------------------
// PreprocessConfig <-> key-value text
// ---------------------------------------------------------------------------

inline std::string serialize_preprocess_config(const PreprocessConfig& cfg) {
  std::ostringstream out;
  out << "preprocess.mask_threshold = " << csv::format_double(cfg.mask_threshold) << "\n";
  out << "preprocess.mask_offset = " << csv::format_double(cfg.mask_offset) << "\n";
  out << "preprocess.iqr_multiplier = " << csv::format_double(cfg.iqr_multiplier) << "\n";
  out << "preprocess.iqr_skip_binary = " << (cfg.iqr_skip_binary ? "true" : "false")
      << "\n";
  out << "preprocess.fit_scope = " << to_string(cfg.fit_scope) << "\n";
  auto join = [](const std::set<std::string>& items) {
    std::string s;
    for (const auto& item : items) {
      if (!s.empty()) s += ',';
      s += item;
    }
    return s;
  };
  out << "preprocess.age_columns = " << join(cfg.age_columns) << "\n";
  out << "preprocess.zero_is_missing = " << join(cfg.zero_is_missing) << "\n";
  {
    std::string s;
    for (const auto& [name, range] : cfg.validity_ranges) {
      if (!s.empty()) s += ';';
      s += name + ":" + csv::format_double(range.first) + ":" +
           csv::format_double(range.second);
    }
    out << "preprocess.validity_ranges = " << s << "\n";
  }
  {
    std::string s;
    for (Stage st : cfg.stage_order) {
      if (!s.empty()) s += ',';
      s += to_string(st);
    }
    out << "preprocess.stage_order = " << s << "\n";
  }
  return out.str();
}

namespace detail {

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t next = s.find(sep, start);
    const std::size_t end = next == std::string::npos ? s.size() : next;
    if (end > start) out.push_back(s.substr(start, end - start));
    if (next == std::string::npos) break;
    start = next + 1;
  }
  return out;
}

} // namespace detail

inline PreprocessConfig parse_preprocess_config(const std::string& text,
                                                PreprocessConfig base = {}) {
  PreprocessConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  auto value_of = [](const std::string& l) {
    const auto eq = l.find('=');
    std::string v = eq == std::string::npos ? "" : l.substr(eq + 1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.erase(v.begin());
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.pop_back();
    return v;
  };
  while (std::getline(in, line)) {
    if (line.rfind("preprocess.mask_threshold", 0) == 0)
      cfg.mask_threshold = *csv::parse_double(value_of(line));
    else if (line.rfind("preprocess.mask_offset", 0) == 0)
      cfg.mask_offset = *csv::parse_double(value_of(line));
    else if (line.rfind("preprocess.iqr_multiplier", 0) == 0)
      cfg.iqr_multiplier = *csv::parse_double(value_of(line));
    else if (line.rfind("preprocess.iqr_skip_binary", 0) == 0)
      cfg.iqr_skip_binary = value_of(line) == "true";
    else if (line.rfind("preprocess.fit_scope", 0) == 0)
      cfg.fit_scope = value_of(line) == "leakage-safe" ? FitScope::LeakageSafe
                                                       : FitScope::ReplicatePaper;
    else if (line.rfind("preprocess.age_columns", 0) == 0) {
      cfg.age_columns.clear();
      for (auto& item : detail::split_on(value_of(line), ','))
        cfg.age_columns.insert(item);
    } else if (line.rfind("preprocess.zero_is_missing", 0) == 0) {
      cfg.zero_is_missing.clear();
      for (auto& item : detail::split_on(value_of(line), ','))
        cfg.zero_is_missing.insert(item);
    } else if (line.rfind("preprocess.validity_ranges", 0) == 0) {
      cfg.validity_ranges.clear();
      for (auto& item : detail::split_on(value_of(line), ';')) {
        auto parts = detail::split_on(item, ':');
        if (parts.size() != 3)
          throw Error("bad validity range entry: " + item);
        cfg.validity_ranges[parts[0]] = {*csv::parse_double(parts[1]),
                                         *csv::parse_double(parts[2])};
      }
    } else if (line.rfind("preprocess.stage_order", 0) == 0) {
      cfg.stage_order.clear();
      for (auto& item : detail::split_on(value_of(line), ',')) {
        bool found = false;
        for (Stage st : {Stage::UnmaskAge, Stage::ScrubInvalid,
                         Stage::RemoveOutliersIqr, Stage::ImputeMean,
                         Stage::NormalizeMinmax})
          if (item == to_string(st)) {
            cfg.stage_order.push_back(st);
            found = true;
          }
        if (!found) throw Error("unknown pipeline stage: " + item);
      }
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Prepared dataset: versioned binary + CSV companion
// ---------------------------------------------------------------------------

// Everything evaluate/ablate needs: the raw structured matrix (so
// leakage-safe mode can refit per fold), the embedding block, and the
// replicate-mode prepared structured matrix with its fitted statistics.
struct PreparedDataset {
  std::vector<int> labels;
  FeatureMatrix structured_raw;
  FeatureMatrix embedding;
  FeatureMatrix structured_prepared; // [0,1] values, carries fit_stats
  PreprocessConfig pre;

  // full prepared matrix: structured columns then embedding columns
  FeatureMatrix full() const {
    if (structured_prepared.cols() == 0) return embedding;
    if (embedding.cols() == 0) return structured_prepared;
    return hcat(structured_prepared, embedding);
  }

  CvSource to_source(FitScope mode) const {
    CvSource src;
    src.labels = labels;
    src.pre = pre;
    src.pre.fit_scope = mode;
    src.structured_raw = structured_raw;
    src.fixed = embedding;
    return src;
  }
};

namespace detail {

constexpr char kDatasetMagic[4] = {'M', 'X', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}
inline void put_f64(std::ostream& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}
inline void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t get_u32(std::istream& in) {
  char buf[4];
  in.read(buf, 4);
  std::uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}
inline std::uint64_t get_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}
inline double get_f64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}
inline std::string get_string(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

inline void put_matrix(std::ostream& out, const FeatureMatrix& m) {
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    put_string(out, m.column_names[c]);
    out.put(static_cast<char>(m.column_groups[c]));
  }
  for (double v : m.values) put_f64(out, v);
  out.write(reinterpret_cast<const char*>(m.missing.data()),
            static_cast<std::streamsize>(m.missing.size()));
  out.put(m.fit_stats ? 1 : 0);
  if (m.fit_stats)
    for (const auto& s : *m.fit_stats) {
      put_f64(out, s.mean);
      put_f64(out, s.min);
      put_f64(out, s.max);
      put_f64(out, s.q1);
      put_f64(out, s.q3);
    }
}

inline FeatureMatrix get_matrix(std::istream& in) {
  FeatureMatrix m;
  m.n_rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  m.column_names.resize(cols);
  m.column_groups.resize(cols);
  for (std::uint64_t c = 0; c < cols; ++c) {
    m.column_names[c] = get_string(in);
    m.column_groups[c] = static_cast<FeatureGroup>(in.get());
  }
  m.values.resize(m.n_rows * cols);
  for (auto& v : m.values) v = get_f64(in);
  m.missing.resize(m.n_rows * cols);
  in.read(reinterpret_cast<char*>(m.missing.data()),
          static_cast<std::streamsize>(m.missing.size()));
  if (in.get() == 1) {
    std::vector<ColumnStats> stats(cols);
    for (auto& s : stats) {
      s.mean = get_f64(in);
      s.min = get_f64(in);
      s.max = get_f64(in);
      s.q1 = get_f64(in);
      s.q3 = get_f64(in);
    }
    m.fit_stats = std::move(stats);
  }
  return m;
}

} // namespace detail

inline void save_dataset(const PreparedDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file: " + path);
  out.write(detail::kDatasetMagic, 4);
  detail::put_u32(out, detail::kDatasetVersion);
  detail::put_u64(out, ds.labels.size());
  for (int y : ds.labels) out.put(static_cast<char>(y));
  detail::put_string(out, serialize_preprocess_config(ds.pre));
  detail::put_matrix(out, ds.structured_raw);
  detail::put_matrix(out, ds.embedding);
  detail::put_matrix(out, ds.structured_prepared);
  if (!out) throw Error("short write: " + path);
}

inline PreparedDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, detail::kDatasetMagic, 4) != 0)
    throw Error(path + ": not a dataset file");
  const std::uint32_t version = detail::get_u32(in);
  if (version != detail::kDatasetVersion)
    throw Error(path + ": unsupported dataset version " + std::to_string(version));
  PreparedDataset ds;
  const std::uint64_t n = detail::get_u64(in);
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = in.get();
  ds.pre = parse_preprocess_config(detail::get_string(in));
  ds.structured_raw = detail::get_matrix(in);
  ds.embedding = detail::get_matrix(in);
  ds.structured_prepared = detail::get_matrix(in);
  if (!in) throw Error(path + ": truncated dataset file");
  return ds;
}

// Human-readable companion: label column then the prepared feature columns.
inline void write_dataset_csv(const PreparedDataset& ds, const std::string& path) {
  const FeatureMatrix full = ds.full();
  std::ostringstream out;
  out << "label";
  for (const auto& name : full.column_names) out << ',' << name;
  out << "\n";
  for (std::size_t r = 0; r < full.rows(); ++r) {
    out << ds.labels[r];
    for (std::size_t c = 0; c < full.cols(); ++c)
      out << ',' << csv::format_double(full.at(r, c));
    out << "\n";
  }
  csv::write_file(path, out.str());
}

} // namespace mixmort
