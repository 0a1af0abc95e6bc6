#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "ticketsim/corpus.hpp"
#include "ticketsim/error.hpp"
#include "ticketsim/techniques/representation.hpp"
#include "ticketsim/textprep.hpp"

namespace ticketsim {

inline constexpr std::size_t kTfidfMaxFeatures = 500;

/// Vocabulary in lexicographic order with its smoothed idf weights.
struct TfidfModel {
  std::vector<std::string> vocabulary;
  std::vector<double> idf;
  NormalizationConfig normalization;

  std::size_t dim() const noexcept { return vocabulary.size(); }
};

/// Keeps the `max_features` terms with the highest document frequency (ties
/// lexicographic) and weighs them with idf(t) = ln((1 + N) / (1 + df(t))) + 1.
inline TfidfModel tfidf_fit(const Corpus& train, const NormalizationConfig& cfg,
                            std::size_t max_features = kTfidfMaxFeatures) {
  if (train.empty()) throw data_error("TF-IDF needs a non-empty training corpus");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& ticket : train) {
    auto tokens = preprocess(query_text(ticket), cfg).tokens;
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[std::move(t)];
  }
  if (df.empty()) throw data_error("TF-IDF training corpus has no terms after preprocessing");

  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_features) ranked.resize(max_features);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  TfidfModel model;
  model.normalization = cfg;
  const auto n = static_cast<double>(train.size());
  for (const auto& [term, freq] : ranked) {
    model.vocabulary.push_back(term);
    model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(freq))) + 1.0);
  }
  return model;
}

/// Raw term counts times idf, L2-normalized. No vocabulary hits gives the zero vector.
inline DocumentVector tfidf_represent(const TfidfModel& model, std::string_view text) {
  std::vector<double> v(model.dim(), 0.0);
  for (const auto& token : preprocess(text, model.normalization)) {
    const auto it = std::lower_bound(model.vocabulary.begin(), model.vocabulary.end(), token);
    if (it != model.vocabulary.end() && *it == token) v[it - model.vocabulary.begin()] += 1.0;
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] *= model.idf[i];
    sq += v[i] * v[i];
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
  }
  return DocumentVector(std::move(v));
}

}  // namespace ticketsim
