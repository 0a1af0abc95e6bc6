#pragma once

// Okapi BM25 with the idf floor used by the rank_bm25 family of
// implementations: terms whose idf comes out negative are raised to
// epsilon times the mean positive idf.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ticketsim/corpus.hpp"
#include "ticketsim/error.hpp"
#include "ticketsim/techniques/representation.hpp"
#include "ticketsim/textprep.hpp"

namespace ticketsim {

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
  double epsilon = 0.25;

  void validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) throw usage_error("BM25 k1 must be a non-negative number");
    if (!(b >= 0.0 && b <= 1.0)) throw usage_error("BM25 b must lie in [0, 1]");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw usage_error("BM25 epsilon must be >= 0");
  }

  friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

class Bm25Index {
 public:
  Bm25Index() = default;

  /// Builds corpus statistics from already tokenized documents.
  Bm25Index(std::vector<std::pair<std::string, TermBag>> docs, Bm25Params params, NormalizationConfig cfg)
      : params_(params), normalization_(std::move(cfg)) {
    params_.validate();
    std::uint64_t total_length = 0;
    for (auto& [id, bag] : docs) {
      for (const auto& [term, _] : bag.counts) ++df_[term];
      total_length += bag.length;
      if (!doc_index_.emplace(id, docs_.size()).second) {
        throw data_error("duplicate document id '" + id + "' in BM25 index");
      }
      docs_.emplace_back(std::move(id), std::move(bag));
    }
    avgdl_ = docs_.empty() ? 0.0 : static_cast<double>(total_length) / static_cast<double>(docs_.size());
    compute_idf();
  }

  /// Restores a serialized index; idf values are recomputed from the stored statistics.
  static Bm25Index from_statistics(Bm25Params params, NormalizationConfig cfg, std::size_t n_docs,
                                   double avgdl, std::map<std::string, std::uint32_t> df) {
    Bm25Index index;
    index.params_ = params;
    index.params_.validate();
    index.normalization_ = std::move(cfg);
    index.n_override_ = n_docs;
    index.avgdl_ = avgdl;
    index.df_ = std::move(df);
    index.compute_idf();
    return index;
  }

  const Bm25Params& params() const noexcept { return params_; }
  const NormalizationConfig& normalization() const noexcept { return normalization_; }
  std::size_t document_count() const noexcept { return n_override_ ? n_override_ : docs_.size(); }
  double average_length() const noexcept { return avgdl_; }
  const std::map<std::string, std::uint32_t>& document_frequencies() const noexcept { return df_; }
  double idf_floor() const noexcept { return floor_; }

  /// Floored idf of a term; 0 for terms never seen in the indexed corpus.
  double idf(const std::string& term) const {
    const auto it = idf_.find(term);
    return it == idf_.end() ? 0.0 : it->second;
  }

  TermBag bag(std::string_view text) const { return TermBag::from_tokens(preprocess(text, normalization_)); }

  /// Sum over query tokens (repeats included) of idf * tf(k1+1) / (tf + k1(1 - b + b|d|/avgdl)).
  double score(const TermBag& query, const TermBag& doc) const {
    if (query.length == 0 || doc.length == 0) return 0.0;
    const double norm = avgdl_ > 0.0 ? static_cast<double>(doc.length) / avgdl_ : 1.0;
    const double length_factor = params_.k1 * (1.0 - params_.b + params_.b * norm);
    double total = 0.0;
    for (const auto& [term, qcount] : query.counts) {
      const double tf = doc.count(term);
      if (tf == 0.0) continue;
      total += qcount * idf(term) * tf * (params_.k1 + 1.0) / (tf + length_factor);
    }
    return total;
  }

  double score(std::string_view query_text, const std::string& doc_id) const {
    const auto it = doc_index_.find(doc_id);
    if (it == doc_index_.end()) throw not_found_error("document '" + doc_id + "' is not in the BM25 index");
    return score(bag(query_text), docs_[it->second].second);
  }

 private:
  void compute_idf() {
    idf_.clear();
    const double n = static_cast<double>(document_count());
    double positive_sum = 0.0;
    std::size_t positive_count = 0;
    std::vector<std::string> negative;
    for (const auto& [term, freq] : df_) {
      const double value = std::log((n - freq + 0.5) / (freq + 0.5));
      idf_[term] = value;
      if (value > 0.0) {
        positive_sum += value;
        ++positive_count;
      } else if (value < 0.0) {
        negative.push_back(term);
      }
    }
    // With no positive idf at all (e.g. a one-document corpus) the mean is taken as 1.
    const double mean_positive = positive_count ? positive_sum / positive_count : 1.0;
    floor_ = params_.epsilon * mean_positive;
    for (const auto& term : negative) idf_[term] = floor_;
  }

  Bm25Params params_;
  NormalizationConfig normalization_;
  std::vector<std::pair<std::string, TermBag>> docs_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  std::map<std::string, std::uint32_t> df_;
  std::unordered_map<std::string, double> idf_;
  std::size_t n_override_ = 0;
  double avgdl_ = 0.0;
  double floor_ = 0.0;
};

inline Bm25Index bm25_fit(const Corpus& train, const Bm25Params& params, const NormalizationConfig& cfg) {
  if (train.empty()) throw data_error("BM25 needs a non-empty training corpus");
  std::vector<std::pair<std::string, TermBag>> docs;
  docs.reserve(train.size());
  for (const auto& t : train) {
    docs.emplace_back(t.external_id, TermBag::from_tokens(preprocess(query_text(t), cfg)));
  }
  return Bm25Index(std::move(docs), params, cfg);
}

inline double bm25_score(const Bm25Index& index, std::string_view query_text, const std::string& doc_id) {
  return index.score(query_text, doc_id);
}

}  // namespace ticketsim
