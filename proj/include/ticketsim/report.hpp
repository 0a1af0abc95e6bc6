#pragma once

// Comparison report: one row per technique with at-least-one accuracy,
// precision and time per 100 recommendations, as JSON and as an aligned
// text table. Published reference values can be attached per row.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ticketsim/eval.hpp"

namespace ticketsim {

struct ReferenceValues {
  double accuracy_alo;
  double precision;
  double time_ms_per_100;
};

/// Published results of the original comparison, keyed by technique name.
inline const std::map<std::string, ReferenceValues>& published_reference() {
  static const std::map<std::string, ReferenceValues> table = {
      {"BM25", {0.590, 0.237, 258}},
      {"BERT multi-language", {0.500, 0.172, 12781}},
      {"Doc2vec", {0.273, 0.058, 933}},
      {"LDA", {0.663, 0.209, 833}},
      {"Random selection", {0.260, 0.055, 199}},
      {"Sentence-BERT English", {0.743, 0.301, 10601}},
      {"Sentence-BERT multi-language", {0.787, 0.351, 6411}},
      {"Sentence-BERT retrained", {0.787, 0.327, 6450}},
      {"Expert system", {0.427, 0.172, 1101}},
      {"TF-IDF", {0.690, 0.297, 672}},
      {"Word2vec English", {0.583, 0.234, 49298}},
      {"Word2vec retrained", {0.687, 0.262, 49590}},
  };
  return table;
}

namespace detail {

inline std::string fold_name(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace detail

/// Matches ignoring case and punctuation; the registry kinds of the
/// built-in techniques are accepted as aliases.
inline std::optional<ReferenceValues> find_reference(const std::string& technique) {
  static const std::map<std::string, std::string> aliases = {
      {"bm25", "BM25"}, {"tfidf", "TF-IDF"}, {"lda", "LDA"}, {"expert", "Expert system"},
      {"random", "Random selection"}};
  const auto key = detail::fold_name(technique);
  for (const auto& [name, values] : published_reference()) {
    if (detail::fold_name(name) == key) return values;
  }
  for (const auto& [alias, name] : aliases) {
    if (alias == key) return published_reference().at(name);
  }
  return std::nullopt;
}

struct ComparisonReport {
  nlohmann::ordered_json json;
  std::string text;
};

inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", fraction * 100.0);
  return buf;
}

inline std::string format_ms(double ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f", ms);
  return buf;
}

/// Rows sorted by technique name. The text table shows percentages with one
/// decimal and whole milliseconds; the JSON keeps full precision.
inline ComparisonReport compare_report(std::vector<EvalReportRow> rows, bool with_reference = false) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.technique < b.technique; });

  ComparisonReport report;
  auto& jrows = report.json["rows"] = nlohmann::ordered_json::array();
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"Name", "Accuracy_alo", "Precision", "Time(ms)"};
  if (with_reference) {
    header.insert(header.end(), {"Paper Accuracy_alo", "Paper Precision", "Paper Time(ms)"});
  }
  cells.push_back(header);

  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["technique"] = r.technique;
    std::vector<std::string> line = {r.technique};
    if (r.error) {
      j["error"] = *r.error;
      line.insert(line.end(), {"error", "error", "error"});
    } else {
      j["accuracy_alo"] = r.accuracy_alo;
      j["precision"] = r.precision;
      j["time_ms_per_100"] = r.time_ms_per_100;
      line.insert(line.end(), {format_percent(r.accuracy_alo), format_percent(r.precision), format_ms(r.time_ms_per_100)});
    }
    if (with_reference) {
      if (const auto ref = find_reference(r.technique)) {
        j["paper_reference"] = {{"accuracy_alo", ref->accuracy_alo},
                                {"precision", ref->precision},
                                {"time_ms_per_100", ref->time_ms_per_100}};
        line.insert(line.end(), {format_percent(ref->accuracy_alo), format_percent(ref->precision),
                                 format_ms(ref->time_ms_per_100)});
      } else {
        line.insert(line.end(), {"-", "-", "-"});
      }
    }
    jrows.push_back(std::move(j));
    cells.push_back(std::move(line));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::string text;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string out;
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      const auto& cell = cells[i][c];
      const auto pad = std::string(width[c] - cell.size(), ' ');
      if (c > 0) out += "  ";
      out += c == 0 ? cell + pad : pad + cell;  // names left, numbers right
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    text += out + '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      text += std::string(total + 2 * (width.size() - 1), '-') + '\n';
    }
  }
  report.text = std::move(text);
  return report;
}

}  // namespace ticketsim
