#pragma once

// One interface over every retrieval technique, plus the on-disk model
// artifact format. An artifact carries a fingerprint of its preprocessing
// and hyperparameters so that runs with drifting configs are caught.

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ticketsim/corpus.hpp"
#include "ticketsim/error.hpp"
#include "ticketsim/hash.hpp"
#include "ticketsim/index.hpp"
#include "ticketsim/techniques/bm25.hpp"
#include "ticketsim/techniques/expert.hpp"
#include "ticketsim/techniques/external.hpp"
#include "ticketsim/techniques/lda.hpp"
#include "ticketsim/techniques/random.hpp"
#include "ticketsim/techniques/representation.hpp"
#include "ticketsim/techniques/tfidf.hpp"
#include "ticketsim/techniques/word_vectors.hpp"
#include "ticketsim/textprep.hpp"

namespace ticketsim {

inline constexpr const char* kModelFormat = "ticketsim-model";
inline constexpr int kModelVersion = 1;

/// What a technique sees of a ticket. Some external providers are keyed by id.
struct Document {
  std::string id;
  std::string text;
};

inline Document document_of(const Ticket& t) { return {t.external_id, query_text(t)}; }

class Technique {
 public:
  explicit Technique(std::string name) : name_(std::move(name)) {}
  virtual ~Technique() = default;

  /// Registry key: expert, tfidf, bm25, lda, wordvec-avg, external-embed, random.
  virtual std::string kind() const = 0;
  const std::string& name() const noexcept { return name_; }

  virtual Representation represent(const Document& doc) const = 0;
  virtual Scorer scorer() const = 0;

  virtual RetrievalResult rank(const Document& /*query*/, const Representation& query_repr,
                               std::span<const Candidate> candidates, std::size_t k) const {
    return top_k(query_repr, candidates, k, scorer());
  }

  /// Absent for techniques that consume raw text.
  virtual std::optional<NormalizationConfig> normalization() const { return std::nullopt; }
  virtual nlohmann::ordered_json hyperparameters() const = 0;
  virtual nlohmann::ordered_json model_state() const { return nlohmann::ordered_json::object(); }

  nlohmann::ordered_json preprocessing_json() const {
    const auto cfg = normalization();
    if (!cfg) return nullptr;
    auto j = to_json(*cfg);
    j["base_fingerprint"] = base_fingerprint(*cfg);
    j["stopword_fingerprint"] = stopword_fingerprint(*cfg);
    return j;
  }

  std::string config_fingerprint() const {
    nlohmann::ordered_json j;
    j["technique"] = kind();
    j["preprocessing"] = preprocessing_json();
    j["hyperparameters"] = hyperparameters();
    return sha256_hex(j.dump()).substr(0, 16);
  }

  nlohmann::ordered_json to_artifact() const {
    nlohmann::ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["technique"] = kind();
    j["name"] = name();
    j["config_fingerprint"] = config_fingerprint();
    j["preprocessing"] = preprocessing_json();
    j["hyperparameters"] = hyperparameters();
    j["model"] = model_state();
    return j;
  }

 private:
  std::string name_;
};

// --- Concrete techniques ---------------------------------------------------

class ExpertTechnique final : public Technique {
 public:
  ExpertTechnique(std::string name, Lexicon lexicon, NormalizationConfig cfg)
      : Technique(std::move(name)), lexicon_(std::move(lexicon)), matcher_(lexicon_, without_stopwords(cfg)) {}

  std::string kind() const override { return "expert"; }
  Representation represent(const Document& doc) const override { return matcher_.labels(doc.text); }
  Scorer scorer() const override { return Scorer::jaccard(); }
  std::optional<NormalizationConfig> normalization() const override { return matcher_.config(); }
  nlohmann::ordered_json hyperparameters() const override {
    nlohmann::ordered_json j;
    j["lexicon"] = lexicon_json();
    return j;
  }
  const Lexicon& lexicon() const noexcept { return lexicon_; }

 private:
  static NormalizationConfig without_stopwords(NormalizationConfig cfg) {
    cfg.remove_stopwords = false;
    cfg.stopword_list.clear();
    return cfg;
  }
  nlohmann::ordered_json lexicon_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [canonical, synonyms] : lexicon_.entries()) j[canonical] = synonyms;
    return j;
  }

  Lexicon lexicon_;
  LabelMatcher matcher_;
};

class TfidfTechnique final : public Technique {
 public:
  TfidfTechnique(std::string name, TfidfModel model, std::size_t max_features = kTfidfMaxFeatures)
      : Technique(std::move(name)), model_(std::move(model)), max_features_(max_features) {}

  std::string kind() const override { return "tfidf"; }
  Representation represent(const Document& doc) const override { return tfidf_represent(model_, doc.text); }
  Scorer scorer() const override { return Scorer::cosine(); }
  std::optional<NormalizationConfig> normalization() const override { return model_.normalization; }
  nlohmann::ordered_json hyperparameters() const override { return {{"max_features", max_features_}}; }
  nlohmann::ordered_json model_state() const override {
    nlohmann::ordered_json j;
    j["vocabulary"] = model_.vocabulary;
    j["idf"] = model_.idf;
    return j;
  }
  const TfidfModel& model() const noexcept { return model_; }

 private:
  TfidfModel model_;
  std::size_t max_features_;
};

class Bm25Technique final : public Technique {
 public:
  Bm25Technique(std::string name, Bm25Index index)
      : Technique(std::move(name)), index_(std::make_shared<const Bm25Index>(std::move(index))) {}

  std::string kind() const override { return "bm25"; }
  Representation represent(const Document& doc) const override { return index_->bag(doc.text); }
  Scorer scorer() const override { return Scorer::bm25(index_); }
  std::optional<NormalizationConfig> normalization() const override { return index_->normalization(); }
  nlohmann::ordered_json hyperparameters() const override {
    const auto& p = index_->params();
    return {{"k1", p.k1}, {"b", p.b}, {"epsilon", p.epsilon}};
  }
  nlohmann::ordered_json model_state() const override {
    nlohmann::ordered_json j;
    j["documents"] = index_->document_count();
    j["average_length"] = index_->average_length();
    j["document_frequencies"] = index_->document_frequencies();
    return j;
  }
  const Bm25Index& index() const noexcept { return *index_; }

 private:
  std::shared_ptr<const Bm25Index> index_;
};

class LdaTechnique final : public Technique {
 public:
  LdaTechnique(std::string name, LdaModel model) : Technique(std::move(name)), model_(std::move(model)) {}

  std::string kind() const override { return "lda"; }
  Representation represent(const Document& doc) const override {
    return lda_represent(model_, doc.text, model_.config().fold_in_iterations, model_.config().seed);
  }
  Scorer scorer() const override { return Scorer::cosine(); }
  std::optional<NormalizationConfig> normalization() const override { return model_.normalization(); }
  nlohmann::ordered_json hyperparameters() const override {
    const auto& c = model_.config();
    nlohmann::ordered_json j;
    j["topics"] = c.topics;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["iterations"] = c.iterations;
    j["fold_in_iterations"] = c.fold_in_iterations;
    j["seed"] = c.seed;
    return j;
  }
  /// Topic-word counts stored sparsely: per topic, a flat [word, count, ...] list.
  nlohmann::ordered_json model_state() const override {
    nlohmann::ordered_json j;
    j["vocabulary"] = model_.vocabulary();
    auto& topics = j["topic_word_counts"] = nlohmann::ordered_json::array();
    const std::size_t v = model_.vocabulary().size();
    for (std::size_t k = 0; k < model_.topics(); ++k) {
      auto row = nlohmann::ordered_json::array();
      for (std::size_t w = 0; w < v; ++w) {
        if (const auto c = model_.count(k, w); c != 0) {
          row.push_back(w);
          row.push_back(c);
        }
      }
      topics.push_back(std::move(row));
    }
    return j;
  }
  const LdaModel& model() const noexcept { return model_; }

 private:
  LdaModel model_;
};

class WordVectorTechnique final : public Technique {
 public:
  WordVectorTechnique(std::string name, std::string vectors_path, NormalizationConfig cfg)
      : Technique(std::move(name)), path_(std::move(vectors_path)), cfg_(std::move(cfg)),
        table_(std::make_shared<const WordVectorTable>(load_word_vectors(path_))) {}

  std::string kind() const override { return "wordvec-avg"; }
  Representation represent(const Document& doc) const override {
    return embed_average(*table_, preprocess(doc.text, cfg_));
  }
  Scorer scorer() const override { return Scorer::cosine(); }
  std::optional<NormalizationConfig> normalization() const override { return cfg_; }
  nlohmann::ordered_json hyperparameters() const override {
    return {{"vectors", path_}, {"dim", table_->dim()}};
  }
  const WordVectorTable& table() const noexcept { return *table_; }

 private:
  std::string path_;
  NormalizationConfig cfg_;
  std::shared_ptr<const WordVectorTable> table_;
};

class ExternalEmbeddingTechnique final : public Technique {
 public:
  ExternalEmbeddingTechnique(std::string name, EmbeddingProviderSpec spec)
      : Technique(std::move(name)), embedder_(std::move(spec)) {}

  std::string kind() const override { return "external-embed"; }
  Representation represent(const Document& doc) const override { return embedder_.embed(doc.id, doc.text); }
  Scorer scorer() const override { return Scorer::cosine(); }
  nlohmann::ordered_json hyperparameters() const override {
    const auto& s = embedder_.spec();
    nlohmann::ordered_json j;
    j["provider"] = s.name;
    j["dim"] = s.dim;
    if (const auto* file = std::get_if<VectorFileSource>(&s.source)) {
      j["source"] = {{"type", "vector-file"}, {"path", file->path}};
    } else {
      const auto& r = std::get<RemoteSource>(s.source);
      j["source"] = {{"type", "remote"},
                     {"url", r.url},
                     {"timeout_ms", r.timeout_ms},
                     {"retries", r.retries},
                     {"cache_dir", r.cache_dir}};
    }
    return j;
  }
  const ExternalEmbedder& embedder() const noexcept { return embedder_; }

 private:
  ExternalEmbedder embedder_;
};

/// Ignores content and samples k candidates uniformly. The stream for each
/// query is derived from the seed and the query id.
class RandomTechnique final : public Technique {
 public:
  RandomTechnique(std::string name, std::uint64_t seed) : Technique(std::move(name)), seed_(seed) {}

  std::string kind() const override { return "random"; }
  Representation represent(const Document&) const override { return LabelSet{}; }
  Scorer scorer() const override { return Scorer::jaccard(); }
  RetrievalResult rank(const Document& query, const Representation&, std::span<const Candidate> candidates,
                       std::size_t k) const override {
    if (k == 0) throw usage_error("top_k needs k >= 1");
    std::vector<std::string> ids;
    ids.reserve(candidates.size());
    for (const auto& c : candidates) ids.push_back(c.external_id);
    RetrievalResult result;
    for (auto& id : random_select(std::move(ids), k, mix_seed(seed_, query.id))) {
      result.items.push_back({std::move(id), 0.0});
    }
    return result;
  }
  nlohmann::ordered_json hyperparameters() const override { return {{"seed", seed_}}; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

// --- Artifacts -------------------------------------------------------------

inline void save_technique(const std::filesystem::path& path, const Technique& technique) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw runtime_error("cannot write model artifact '" + path.string() + "'");
  out << technique.to_artifact().dump() << '\n';
  if (!out) throw runtime_error("write failed for '" + path.string() + "'");
}

namespace detail {

inline NormalizationConfig artifact_normalization(const nlohmann::json& j) {
  if (j.at("preprocessing").is_null()) throw data_error("artifact lacks its preprocessing config");
  return normalization_from_json(j.at("preprocessing"));
}

inline std::unique_ptr<Technique> technique_from_artifact(const nlohmann::json& j) {
  if (j.value("format", "") != kModelFormat) throw data_error("not a model artifact");
  if (j.value("version", 0) != kModelVersion) throw data_error("unsupported model artifact version");
  const auto kind = j.at("technique").get<std::string>();
  const auto name = j.at("name").get<std::string>();
  const auto& hyper = j.at("hyperparameters");
  const auto& model = j.at("model");

  if (kind == "expert") {
    return std::make_unique<ExpertTechnique>(name, lexicon_from_json(hyper.at("lexicon")), artifact_normalization(j));
  }
  if (kind == "tfidf") {
    TfidfModel m;
    m.normalization = artifact_normalization(j);
    m.vocabulary = model.at("vocabulary").get<std::vector<std::string>>();
    m.idf = model.at("idf").get<std::vector<double>>();
    if (m.vocabulary.size() != m.idf.size()) throw data_error("TF-IDF vocabulary and idf sizes differ");
    return std::make_unique<TfidfTechnique>(name, std::move(m), hyper.at("max_features").get<std::size_t>());
  }
  if (kind == "bm25") {
    Bm25Params p{hyper.at("k1").get<double>(), hyper.at("b").get<double>(), hyper.at("epsilon").get<double>()};
    auto index = Bm25Index::from_statistics(p, artifact_normalization(j), model.at("documents").get<std::size_t>(),
                                            model.at("average_length").get<double>(),
                                            model.at("document_frequencies").get<std::map<std::string, std::uint32_t>>());
    return std::make_unique<Bm25Technique>(name, std::move(index));
  }
  if (kind == "lda") {
    LdaConfig c;
    c.topics = hyper.at("topics").get<std::size_t>();
    c.alpha = hyper.at("alpha").get<double>();
    c.beta = hyper.at("beta").get<double>();
    c.iterations = hyper.at("iterations").get<std::size_t>();
    c.fold_in_iterations = hyper.at("fold_in_iterations").get<std::size_t>();
    c.seed = hyper.at("seed").get<std::uint64_t>();
    auto vocabulary = model.at("vocabulary").get<std::vector<std::string>>();
    std::vector<std::uint32_t> counts(c.topics * vocabulary.size(), 0);
    const auto& rows = model.at("topic_word_counts");
    if (rows.size() != c.topics) throw data_error("LDA artifact has the wrong number of topic rows");
    for (std::size_t k = 0; k < c.topics; ++k) {
      const auto& row = rows[k];
      for (std::size_t i = 0; i + 1 < row.size(); i += 2) {
        const auto w = row[i].get<std::size_t>();
        if (w >= vocabulary.size()) throw data_error("LDA artifact word index out of range");
        counts[k * vocabulary.size() + w] = row[i + 1].get<std::uint32_t>();
      }
    }
    return std::make_unique<LdaTechnique>(
        name, LdaModel(c, artifact_normalization(j), std::move(vocabulary), std::move(counts)));
  }
  if (kind == "wordvec-avg") {
    return std::make_unique<WordVectorTechnique>(name, hyper.at("vectors").get<std::string>(),
                                                 artifact_normalization(j));
  }
  if (kind == "external-embed") {
    EmbeddingProviderSpec spec;
    spec.name = hyper.at("provider").get<std::string>();
    spec.dim = hyper.at("dim").get<std::size_t>();
    const auto& src = hyper.at("source");
    if (src.at("type") == "vector-file") {
      spec.source = VectorFileSource{src.at("path").get<std::string>()};
    } else {
      spec.source = RemoteSource{src.at("url").get<std::string>(), src.at("timeout_ms").get<int>(),
                                 src.at("retries").get<int>(), src.at("cache_dir").get<std::string>()};
    }
    return std::make_unique<ExternalEmbeddingTechnique>(name, std::move(spec));
  }
  if (kind == "random") return std::make_unique<RandomTechnique>(name, hyper.at("seed").get<std::uint64_t>());
  throw data_error("unknown technique '" + kind + "' in artifact");
}

}  // namespace detail

inline std::unique_ptr<Technique> technique_from_artifact(const nlohmann::json& j) {
  std::unique_ptr<Technique> t;
  try {
    t = detail::technique_from_artifact(j);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed model artifact: ") + e.what());
  }
  const auto stored = j.at("config_fingerprint").get<std::string>();
  if (stored != t->config_fingerprint()) {
    throw data_error("model artifact '" + t->name() + "' fingerprint mismatch (stored " + stored + ", computed " +
                     t->config_fingerprint() + ")");
  }
  return t;
}

inline std::unique_ptr<Technique> load_technique(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open model artifact '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("model artifact '" + path.string() + "': " + e.what());
  }
  return technique_from_artifact(j);
}

/// Techniques that preprocess text must agree on the character-level steps,
/// and those that drop stopwords must use the same list.
inline void check_preprocessing_compatible(const std::vector<const Technique*>& techniques) {
  std::optional<std::pair<std::string, std::string>> base;
  std::optional<std::pair<std::string, std::string>> stop;
  for (const auto* t : techniques) {
    const auto cfg = t->normalization();
    if (!cfg) continue;
    const auto b = base_fingerprint(*cfg);
    if (!base) base.emplace(b, t->name());
    else if (base->first != b) {
      throw data_error("preprocessing mismatch: '" + t->name() + "' and '" + base->second +
                        "' normalize text differently");
    }
    if (!cfg->remove_stopwords) continue;
    const auto s = stopword_fingerprint(*cfg);
    if (!stop) stop.emplace(s, t->name());
    else if (stop->first != s) {
      throw data_error("preprocessing mismatch: '" + t->name() + "' and '" + stop->second +
                        "' use different stopword lists");
    }
  }
}

}  // namespace ticketsim
