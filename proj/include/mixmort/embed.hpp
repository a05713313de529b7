#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mixmort/core.hpp"
#include "mixmort/csv.hpp"

namespace mixmort {

struct BadHeader : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct EmptyVocabulary : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Embedding table
// ---------------------------------------------------------------------------

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  std::size_t vocab_size() const { return vectors.size(); }
};

// word-vector text format: header "<vocab_size> <dimension>", then one
// "<token> <v1> ... <vD>" line per token. Duplicate tokens keep the first
// occurrence.
inline EmbeddingTable load_embeddings_stream(std::istream& in,
                                             const std::string& name,
                                             std::size_t* duplicate_warnings = nullptr) {
  std::string line;
  if (!std::getline(in, line))
    throw BadHeader(name + ": empty file, expected `vocab_size dimension` header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream header(line);
  long long vocab = -1, dim = -1;
  std::string extra;
  if (!(header >> vocab >> dim) || (header >> extra) || vocab < 0 || dim <= 0)
    throw BadHeader(name + ": bad header line '" + line + "'");

  EmbeddingTable table;
  table.dimension = static_cast<std::size_t>(dim);
  table.vectors.reserve(static_cast<std::size_t>(vocab));

  std::size_t lineno = 1;
  std::size_t parsed = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::size_t pos = line.find(' ');
    if (pos == std::string::npos || pos == 0)
      throw DimensionMismatch(name + ":" + std::to_string(lineno) +
                              ": expected `token v1 ... vD`");
    std::string token = line.substr(0, pos);
    std::vector<double> vec;
    vec.reserve(table.dimension);
    std::size_t start = pos + 1;
    while (start <= line.size()) {
      std::size_t next = line.find(' ', start);
      const std::size_t end = next == std::string::npos ? line.size() : next;
      auto v = csv::parse_double(std::string_view(line).substr(start, end - start));
      if (!v)
        throw DimensionMismatch(name + ":" + std::to_string(lineno) +
                                ": bad component '" + line.substr(start, end - start) +
                                "'");
      vec.push_back(*v);
      if (next == std::string::npos) break;
      start = next + 1;
    }
    if (vec.size() != table.dimension)
      throw DimensionMismatch(name + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(table.dimension) + " components, got " +
                              std::to_string(vec.size()));
    ++parsed;
    auto [it, inserted] = table.vectors.emplace(std::move(token), std::move(vec));
    if (!inserted && duplicate_warnings) ++*duplicate_warnings;
    (void)it;
  }

  if (table.vectors.empty()) throw EmptyVocabulary(name + ": no vectors loaded");
  if (parsed != static_cast<std::size_t>(vocab))
    throw BadHeader(name + ": header declares " + std::to_string(vocab) +
                    " tokens but " + std::to_string(parsed) + " lines were parsed");
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path,
                                      std::size_t* duplicate_warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file: " + path);
  return load_embeddings_stream(in, path, duplicate_warnings);
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

// Lowercase, split on runs of non-alphanumeric characters, drop empty tokens
// and tokens longer than 64 characters.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && current.size() <= 64) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      current += static_cast<char>(std::tolower(u));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Document embedding
// ---------------------------------------------------------------------------

struct DocumentEmbedding {
  std::vector<double> vector;
  std::size_t tokens_seen = 0;
  std::size_t tokens_matched = 0;
};

// Mean of the table vectors for in-vocabulary tokens; all-OOV or empty
// documents map to the zero vector.
inline DocumentEmbedding document_embedding(const std::vector<std::string>& tokens,
                                            const EmbeddingTable& table) {
  DocumentEmbedding doc;
  doc.vector.assign(table.dimension, 0.0);
  doc.tokens_seen = tokens.size();
  for (const auto& token : tokens) {
    auto it = table.vectors.find(token);
    if (it == table.vectors.end()) continue;
    ++doc.tokens_matched;
    for (std::size_t i = 0; i < table.dimension; ++i) doc.vector[i] += it->second[i];
  }
  if (doc.tokens_matched > 0) {
    const double inv = 1.0 / static_cast<double>(doc.tokens_matched);
    for (auto& v : doc.vector) v *= inv;
  }
  return doc;
}

inline std::string embedding_column_name(std::size_t index, std::size_t dimension) {
  std::size_t width = 1;
  for (std::size_t v = dimension > 0 ? dimension - 1 : 0; v >= 10; v /= 10) ++width;
  if (width < 3) width = 3;
  char buf[32];
  std::snprintf(buf, sizeof buf, "emb_%0*zu", static_cast<int>(width), index);
  return buf;
}

// One embedding row per record; absent summaries become zero rows.
inline FeatureMatrix embed_cohort(const std::vector<AdmissionRecord>& records,
                                  const EmbeddingTable& table) {
  if (table.dimension == 0) throw Error("embed_cohort: zero-dimensional table");
  std::vector<std::string> names;
  std::vector<FeatureGroup> groups(table.dimension, FeatureGroup::TextEmbedding);
  names.reserve(table.dimension);
  for (std::size_t i = 0; i < table.dimension; ++i)
    names.push_back(embedding_column_name(i, table.dimension));

  FeatureMatrix m = FeatureMatrix::zeros(records.size(), std::move(names),
                                         std::move(groups));
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (!records[r].discharge_summary) continue; // zero row
    const auto doc =
        document_embedding(tokenize(*records[r].discharge_summary), table);
    for (std::size_t c = 0; c < table.dimension; ++c) m.at(r, c) = doc.vector[c];
  }
  return m;
}

} // namespace mixmort
