#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ticketsim/error.hpp"
#include "ticketsim/textprep.hpp"

namespace ticketsim {

/// Dense document embedding. Entries are always finite.
class DocumentVector {
 public:
  DocumentVector() = default;

  explicit DocumentVector(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      if (!std::isfinite(v)) throw contract_error("document vector entries must be finite");
    }
  }

  static DocumentVector zeros(std::size_t dim) { return DocumentVector(std::vector<double>(dim, 0.0)); }

  std::size_t dim() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const {
    double sum = 0.0;
    for (double v : values_) sum += v * v;
    return std::sqrt(sum);
  }

  friend bool operator==(const DocumentVector&, const DocumentVector&) = default;

 private:
  std::vector<double> values_;
};

/// Canonical lexicon labels found in a document.
using LabelSet = std::set<std::string>;

/// Term counts of one document, the input BM25 scores against.
struct TermBag {
  std::map<std::string, std::uint32_t> counts;
  std::uint32_t length = 0;

  static TermBag from_tokens(const TokenSequence& tokens) {
    TermBag bag;
    for (const auto& t : tokens) ++bag.counts[t];
    bag.length = static_cast<std::uint32_t>(tokens.size());
    return bag;
  }

  std::uint32_t count(const std::string& term) const {
    const auto it = counts.find(term);
    return it == counts.end() ? 0 : it->second;
  }

  friend bool operator==(const TermBag&, const TermBag&) = default;
};

using Representation = std::variant<DocumentVector, LabelSet, TermBag>;

inline const char* representation_kind(const Representation& r) {
  switch (r.index()) {
    case 0: return "vector";
    case 1: return "labels";
    default: return "terms";
  }
}

/// |A ∩ B| / |A ∪ B|, and 0 when both sets are empty.
inline double jaccard(const LabelSet& a, const LabelSet& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) ++ia;
    else if (*ib < *ia) ++ib;
    else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const std::size_t united = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(united);
}

// --- Snapshot encoding -----------------------------------------------------

inline nlohmann::ordered_json representation_to_json(const std::string& id, const Representation& r) {
  nlohmann::ordered_json j;
  j["external_id"] = id;
  std::visit(
      [&](const auto& value) {
        using T = std::decay_t<decltype(value)>;
        if constexpr (std::is_same_v<T, DocumentVector>) {
          j["values"] = value.values();
        } else if constexpr (std::is_same_v<T, LabelSet>) {
          j["labels"] = value;
        } else {
          j["terms"] = value.counts;
          j["length"] = value.length;
        }
      },
      r);
  return j;
}

inline std::pair<std::string, Representation> representation_from_json(const nlohmann::json& j) {
  auto id = j.at("external_id").get<std::string>();
  if (j.contains("values")) return {std::move(id), DocumentVector(j["values"].get<std::vector<double>>())};
  if (j.contains("labels")) return {std::move(id), j["labels"].get<LabelSet>()};
  if (j.contains("terms")) {
    TermBag bag;
    bag.counts = j["terms"].get<std::map<std::string, std::uint32_t>>();
    bag.length = j.at("length").get<std::uint32_t>();
    return {std::move(id), std::move(bag)};
  }
  throw data_error("representation record for '" + id + "' has no values, labels or terms");
}

}  // namespace ticketsim
