#pragma once

// Latent Dirichlet Allocation fitted by collapsed Gibbs sampling. Documents
// are represented by their smoothed topic proportions, inferred by Gibbs
// fold-in against the frozen topic-word counts.

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ticketsim/corpus.hpp"
#include "ticketsim/error.hpp"
#include "ticketsim/hash.hpp"
#include "ticketsim/rng.hpp"
#include "ticketsim/techniques/representation.hpp"
#include "ticketsim/textprep.hpp"

namespace ticketsim {

struct LdaConfig {
  std::size_t topics = 300;
  double alpha = 0.0;  // 0 selects 50 / topics
  double beta = 0.01;
  std::size_t iterations = 200;
  std::size_t fold_in_iterations = 50;
  std::uint64_t seed = 13;

  double effective_alpha() const { return alpha > 0.0 ? alpha : 50.0 / static_cast<double>(topics); }

  void validate() const {
    if (topics == 0) throw usage_error("LDA needs at least one topic");
    if (iterations == 0) throw usage_error("LDA needs at least one training iteration");
    if (fold_in_iterations == 0) throw usage_error("LDA needs at least one fold-in iteration");
    if (!(beta > 0.0)) throw usage_error("LDA beta must be positive");
    if (alpha < 0.0) throw usage_error("LDA alpha must be positive");
  }
};

class LdaModel {
 public:
  LdaModel() = default;

  LdaModel(LdaConfig cfg, NormalizationConfig normalization, std::vector<std::string> vocabulary,
           std::vector<std::uint32_t> topic_word_counts)
      : cfg_(cfg), normalization_(std::move(normalization)), vocabulary_(std::move(vocabulary)),
        counts_(std::move(topic_word_counts)) {
    cfg_.alpha = cfg_.effective_alpha();
    cfg_.validate();
    if (counts_.size() != cfg_.topics * vocabulary_.size()) {
      throw data_error("LDA topic-word table does not match topics x vocabulary");
    }
    for (std::size_t w = 0; w < vocabulary_.size(); ++w) word_ids_.emplace(vocabulary_[w], w);
    topic_totals_.assign(cfg_.topics, 0);
    for (std::size_t k = 0; k < cfg_.topics; ++k) {
      for (std::size_t w = 0; w < vocabulary_.size(); ++w) topic_totals_[k] += counts_[k * vocabulary_.size() + w];
    }
  }

  const LdaConfig& config() const noexcept { return cfg_; }
  const NormalizationConfig& normalization() const noexcept { return normalization_; }
  std::size_t topics() const noexcept { return cfg_.topics; }
  double alpha() const noexcept { return cfg_.alpha; }
  double beta() const noexcept { return cfg_.beta; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  /// Row-major topics x vocabulary.
  const std::vector<std::uint32_t>& topic_word_counts() const noexcept { return counts_; }

  std::uint32_t count(std::size_t topic, std::size_t word) const { return counts_[topic * vocabulary_.size() + word]; }

  /// Smoothed p(word | topic).
  double word_probability(std::size_t topic, std::size_t word) const {
    const double v = static_cast<double>(vocabulary_.size());
    return (count(topic, word) + cfg_.beta) / (topic_totals_[topic] + v * cfg_.beta);
  }

  std::vector<std::size_t> word_ids(const TokenSequence& tokens) const {
    std::vector<std::size_t> ids;
    for (const auto& t : tokens) {
      if (const auto it = word_ids_.find(t); it != word_ids_.end()) ids.push_back(it->second);
    }
    return ids;
  }

 private:
  LdaConfig cfg_;
  NormalizationConfig normalization_;
  std::vector<std::string> vocabulary_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint64_t> topic_totals_;
  std::unordered_map<std::string, std::size_t> word_ids_;
};

namespace detail {

inline std::size_t sample_discrete(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
}

}  // namespace detail

inline LdaModel lda_fit(const Corpus& train, const NormalizationConfig& normalization, const LdaConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw data_error("LDA needs a non-empty training corpus");

  std::vector<TokenSequence> docs;
  docs.reserve(train.size());
  std::vector<std::string> vocabulary;
  for (const auto& t : train) {
    docs.push_back(preprocess(query_text(t), normalization));
    vocabulary.insert(vocabulary.end(), docs.back().begin(), docs.back().end());
  }
  std::sort(vocabulary.begin(), vocabulary.end());
  vocabulary.erase(std::unique(vocabulary.begin(), vocabulary.end()), vocabulary.end());
  if (vocabulary.empty()) throw data_error("LDA vocabulary is empty after preprocessing");

  std::unordered_map<std::string, std::size_t> word_index;
  for (std::size_t w = 0; w < vocabulary.size(); ++w) word_index.emplace(vocabulary[w], w);

  const std::size_t k_topics = cfg.topics;
  const std::size_t v_size = vocabulary.size();
  const double alpha = cfg.effective_alpha();
  const double beta = cfg.beta;
  const double v_beta = static_cast<double>(v_size) * beta;

  std::vector<std::vector<std::uint32_t>> words(docs.size());
  std::vector<std::vector<std::uint32_t>> assignment(docs.size());
  std::vector<std::uint32_t> doc_topic(docs.size() * k_topics, 0);
  std::vector<std::uint32_t> topic_word(k_topics * v_size, 0);
  std::vector<std::uint64_t> topic_total(k_topics, 0);

  Rng rng(cfg.seed);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& token : docs[d]) {
      const auto w = static_cast<std::uint32_t>(word_index.at(token));
      const auto z = static_cast<std::uint32_t>(rng.below(k_topics));
      words[d].push_back(w);
      assignment[d].push_back(z);
      ++doc_topic[d * k_topics + z];
      ++topic_word[z * v_size + w];
      ++topic_total[z];
    }
  }

  std::vector<double> cumulative(k_topics);
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      std::uint32_t* nd = &doc_topic[d * k_topics];
      for (std::size_t i = 0; i < words[d].size(); ++i) {
        const std::uint32_t w = words[d][i];
        const std::uint32_t old = assignment[d][i];
        --nd[old];
        --topic_word[old * v_size + w];
        --topic_total[old];

        double acc = 0.0;
        for (std::size_t k = 0; k < k_topics; ++k) {
          acc += (nd[k] + alpha) * (topic_word[k * v_size + w] + beta) / (topic_total[k] + v_beta);
          cumulative[k] = acc;
        }
        const auto z = static_cast<std::uint32_t>(detail::sample_discrete(cumulative, rng));

        assignment[d][i] = z;
        ++nd[z];
        ++topic_word[z * v_size + w];
        ++topic_total[z];
      }
    }
  }

  LdaConfig stored = cfg;
  stored.alpha = alpha;
  return LdaModel(stored, normalization, std::move(vocabulary), std::move(topic_word));
}

/// Topic proportions of an unseen text. The topic-word counts stay frozen;
/// the returned vector averages the smoothed proportions over the second half
/// of the sweeps and sums to 1. The RNG stream is derived from the seed and
/// the text, so a text always maps to the same vector.
inline DocumentVector lda_represent(const LdaModel& model, std::string_view text, std::size_t fold_in_iterations,
                                    std::uint64_t seed) {
  const std::size_t k_topics = model.topics();
  const double alpha = model.alpha();
  const auto words = model.word_ids(preprocess(text, model.normalization()));
  if (words.empty()) return DocumentVector(std::vector<double>(k_topics, 1.0 / static_cast<double>(k_topics)));

  const std::size_t sweeps = std::max<std::size_t>(fold_in_iterations, 1);
  Rng rng(mix_seed(seed, text));
  std::vector<std::uint32_t> nd(k_topics, 0);
  std::vector<std::uint32_t> z(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    z[i] = static_cast<std::uint32_t>(rng.below(k_topics));
    ++nd[z[i]];
  }

  // p(w | k) is fixed during fold-in, so cache it per distinct word.
  std::unordered_map<std::size_t, std::vector<double>> phi;
  for (auto w : words) {
    auto& column = phi[w];
    if (!column.empty()) continue;
    column.resize(k_topics);
    for (std::size_t k = 0; k < k_topics; ++k) column[k] = model.word_probability(k, w);
  }

  const double n = static_cast<double>(words.size());
  const double denom = n + k_topics * alpha;
  std::vector<double> theta(k_topics, 0.0);
  std::size_t samples = 0;
  std::vector<double> cumulative(k_topics);
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      --nd[z[i]];
      const auto& column = phi[words[i]];
      double acc = 0.0;
      for (std::size_t k = 0; k < k_topics; ++k) {
        acc += (nd[k] + alpha) * column[k];
        cumulative[k] = acc;
      }
      z[i] = static_cast<std::uint32_t>(detail::sample_discrete(cumulative, rng));
      ++nd[z[i]];
    }
    if (sweep >= sweeps / 2) {
      for (std::size_t k = 0; k < k_topics; ++k) theta[k] += (nd[k] + alpha) / denom;
      ++samples;
    }
  }
  double total = 0.0;
  for (double& t : theta) {
    t /= static_cast<double>(samples);
    total += t;
  }
  for (double& t : theta) t /= total;
  return DocumentVector(std::move(theta));
}

}  // namespace ticketsim
