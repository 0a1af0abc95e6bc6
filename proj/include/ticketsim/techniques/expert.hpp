#pragma once

// Rule-based labeling: a document carries a canonical label when the label's
// term, or one of its synonyms, occurs in the preprocessed text.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ticketsim/error.hpp"
#include "ticketsim/techniques/representation.hpp"
#include "ticketsim/textprep.hpp"

namespace ticketsim {

class Lexicon {
 public:
  Lexicon() = default;

  explicit Lexicon(std::map<std::string, std::set<std::string>> entries) : entries_(std::move(entries)) {
    std::map<std::string, std::string> owner;
    for (const auto& [canonical, synonyms] : entries_) {
      if (canonical.empty()) throw usage_error("lexicon has an empty canonical term");
      for (const auto& syn : synonyms) {
        if (syn.empty()) throw usage_error("lexicon term '" + canonical + "' has an empty synonym");
        const auto [it, inserted] = owner.emplace(syn, canonical);
        if (!inserted && it->second != canonical) {
          throw usage_error("synonym '" + syn + "' maps to both '" + it->second + "' and '" +
                            canonical + "'");
        }
      }
    }
  }

  const std::map<std::string, std::set<std::string>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, std::set<std::string>> entries_;
};

/// Lexicon file: JSON object mapping canonical term to a list of synonyms.
inline Lexicon lexicon_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw usage_error("lexicon must be a JSON object");
  std::map<std::string, std::set<std::string>> entries;
  for (const auto& [canonical, synonyms] : j.items()) {
    if (!synonyms.is_array()) throw usage_error("lexicon entry '" + canonical + "' must be an array");
    entries[canonical] = synonyms.get<std::set<std::string>>();
  }
  return Lexicon(std::move(entries));
}

inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open lexicon '" + path + "'");
  try {
    return lexicon_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("lexicon '" + path + "': " + e.what());
  }
}

/// A lexicon with every phrase already run through the text pipeline.
class LabelMatcher {
 public:
  LabelMatcher(const Lexicon& lexicon, NormalizationConfig cfg) : cfg_(std::move(cfg)) {
    for (const auto& [canonical, synonyms] : lexicon.entries()) {
      add(canonical, canonical);
      for (const auto& syn : synonyms) add(syn, canonical);
    }
  }

  LabelSet labels(std::string_view text) const {
    const auto tokens = preprocess(text, cfg_).tokens;
    LabelSet out;
    for (const auto& phrase : phrases_) {
      if (out.count(phrase.label)) continue;
      if (contains_run(tokens, phrase.tokens)) out.insert(phrase.label);
    }
    return out;
  }

  const NormalizationConfig& config() const noexcept { return cfg_; }

 private:
  struct Phrase {
    std::vector<std::string> tokens;
    std::string label;
  };

  void add(const std::string& phrase, const std::string& label) {
    auto tokens = tokenize(normalize(phrase, cfg_)).tokens;
    if (!tokens.empty()) phrases_.push_back({std::move(tokens), label});
  }

  static bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.size() > hay.size()) return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
  }

  NormalizationConfig cfg_;
  std::vector<Phrase> phrases_;
};

/// Stopword removal is never applied to lexicon matching.
inline LabelSet expert_labels(std::string_view text, const Lexicon& lexicon, NormalizationConfig cfg) {
  cfg.remove_stopwords = false;
  return LabelMatcher(lexicon, std::move(cfg)).labels(text);
}

}  // namespace ticketsim
