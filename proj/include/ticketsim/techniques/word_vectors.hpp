#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ticketsim/error.hpp"
#include "ticketsim/techniques/representation.hpp"
#include "ticketsim/textprep.hpp"

namespace ticketsim {

class WordVectorTable {
 public:
  explicit WordVectorTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  /// Lines whose term had already been seen; the later line wins.
  std::size_t duplicates() const noexcept { return duplicates_; }

  void insert(std::string term, std::vector<double> values) {
    if (values.size() != dim_) throw data_error("word vector for '" + term + "' has wrong dimension");
    auto [it, inserted] = vectors_.insert_or_assign(std::move(term), std::move(values));
    if (!inserted) ++duplicates_;
  }

  const std::vector<double>* find(const std::string& term) const {
    const auto it = vectors_.find(term);
    return it == vectors_.end() ? nullptr : &it->second;
  }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::size_t duplicates_ = 0;
};

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace detail

/// Word2vec text format: a "count dim" header line, then one
/// "term v1 ... vdim" line per word.
inline WordVectorTable parse_word_vectors(std::istream& in, const std::string& source = "<input>") {
  std::string line;
  if (!std::getline(in, line)) return WordVectorTable(0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_spaces(line);
  std::size_t count = 0, dim = 0;
  if (header.size() != 2 || !detail::parse_number(header[0], count) || !detail::parse_number(header[1], dim) ||
      dim == 0) {
    throw data_error(source + ":1: expected header 'count dim'");
  }
  WordVectorTable table(dim);
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = detail::split_spaces(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1) {
      throw data_error(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                       " values, found " + std::to_string(fields.size() - 1));
    }
    std::vector<double> values(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!detail::parse_number(fields[i + 1], values[i]) || !std::isfinite(values[i])) {
        throw data_error(source + ":" + std::to_string(line_no) + ": bad number '" +
                         std::string(fields[i + 1]) + "'");
      }
    }
    table.insert(std::string(fields[0]), std::move(values));
    ++rows;
  }
  if (rows != count) {
    throw data_error(source + ": header declares " + std::to_string(count) + " vectors, file has " +
                     std::to_string(rows));
  }
  return table;
}

inline WordVectorTable load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open word-vector file '" + path + "'");
  return parse_word_vectors(in, path);
}

/// Mean of the vectors of in-vocabulary tokens; the zero vector when none is known.
inline DocumentVector embed_average(const WordVectorTable& table, const TokenSequence& tokens) {
  std::vector<double> sum(table.dim(), 0.0);
  std::size_t known = 0;
  for (const auto& t : tokens) {
    const auto* v = table.find(t);
    if (v == nullptr) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
    ++known;
  }
  if (known > 1) {
    for (double& x : sum) x /= static_cast<double>(known);
  }
  return DocumentVector(std::move(sum));
}

}  // namespace ticketsim
