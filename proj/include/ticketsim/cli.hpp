#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage, 2 data error,
// 3 runtime error.

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <httplib.h>

#include "ticketsim/corpus.hpp"
#include "ticketsim/error.hpp"
#include "ticketsim/eval.hpp"
#include "ticketsim/report.hpp"
#include "ticketsim/service.hpp"
#include "ticketsim/technique.hpp"
#include "ticketsim/textprep.hpp"

#ifndef TICKETSIM_DEFAULT_DATA_DIR
#define TICKETSIM_DEFAULT_DATA_DIR "data"
#endif

namespace ticketsim::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kUsage;
    case ErrorKind::data:
    case ErrorKind::not_found:
    case ErrorKind::validation:
    case ErrorKind::contract: return kData;
    case ErrorKind::runtime:
    case ErrorKind::retryable: return kRuntime;
  }
  return kRuntime;
}

inline const std::vector<std::string>& technique_kinds() {
  static const std::vector<std::string> kinds = {"expert",      "tfidf",          "bm25",  "lda",
                                                 "wordvec-avg", "external-embed", "random"};
  return kinds;
}

struct GlobalOptions {
  std::uint64_t seed = 13;
  bool verbose = false;
  std::string config;
};

struct IngestOptions {
  std::string input;
  std::string output;
  std::string redact_rules;
};

struct FitOptions {
  std::string technique;
  std::string train;
  std::string model_out;
  std::string name;
  std::string lexicon = std::string(TICKETSIM_DEFAULT_DATA_DIR) + "/lexicon_sample.json";
  std::string stopwords = std::string(TICKETSIM_DEFAULT_DATA_DIR) + "/stopwords_en.txt";
  bool remove_stopwords = false;
  bool keep_stopwords = false;
  bool no_fold = false;
  std::size_t max_features = kTfidfMaxFeatures;
  double k1 = 1.5;
  double b = 0.75;
  double epsilon = 0.25;
  std::size_t topics = 300;
  double alpha = 0.0;
  double beta = 0.01;
  std::size_t iterations = 200;
  std::size_t fold_in = 50;
  std::string vectors;
  std::string embeddings;
  std::string provider_url;
  std::string provider_name;
  std::size_t dim = 0;
  std::string cache_dir;
  int timeout_ms = 10000;
  int retries = 2;
};

struct CompareOptions {
  std::string positions_dir;
  std::string eval_corpus;
  std::vector<std::string> techniques;
  std::string report_out;
  bool with_paper_refs = false;
};

struct EmbedCacheOptions {
  std::string corpus;
  std::string output;
  std::string provider_url;
  std::string provider_name;
  std::size_t dim = 0;
  std::string cache_dir;
  int timeout_ms = 10000;
  int retries = 2;
};

namespace detail {

inline void log(const GlobalOptions& g, std::ostream& err, const std::string& msg) {
  if (g.verbose) err << "ticketsim: " << msg << '\n';
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw runtime_error("write failed for '" + path.string() + "'");
}

inline std::string default_name(const std::string& kind) {
  if (kind == "expert") return "Expert system";
  if (kind == "tfidf") return "TF-IDF";
  if (kind == "bm25") return "BM25";
  if (kind == "lda") return "LDA";
  if (kind == "random") return "Random selection";
  return kind;
}

/// Expert, TF-IDF, BM25, LDA and word-vector techniques share the same
/// character-level steps; only TF-IDF drops stopwords unless told otherwise.
inline NormalizationConfig fit_normalization(const FitOptions& o) {
  NormalizationConfig cfg;
  cfg.unicode_fold = !o.no_fold;
  cfg.remove_stopwords = o.technique == "tfidf";
  if (o.remove_stopwords) cfg.remove_stopwords = true;
  if (o.keep_stopwords) cfg.remove_stopwords = false;
  if (cfg.remove_stopwords) cfg.stopword_list = load_stopwords(o.stopwords);
  cfg.validate();
  return cfg;
}

inline Corpus require_train(const FitOptions& o) {
  if (o.train.empty()) throw usage_error("--train is required for technique '" + o.technique + "'");
  auto corpus = load_tickets(o.train);
  if (corpus.empty()) throw data_error("training corpus '" + o.train + "' is empty");
  return corpus;
}

}  // namespace detail

inline int cmd_ingest(const GlobalOptions& g, const IngestOptions& o, std::ostream& out, std::ostream& err) {
  if (!std::filesystem::exists(o.input)) throw data_error("input '" + o.input + "' does not exist");
  auto corpus = load_tickets(o.input);
  std::optional<Redactor> redactor;
  if (!o.redact_rules.empty()) redactor.emplace(load_redaction_rules(o.redact_rules));
  Corpus cleaned;
  std::size_t changed = 0;
  for (const auto& t : corpus) {
    if (!redactor) {
      cleaned.add(t);
      continue;
    }
    auto r = redactor->apply(t);
    if (!(r == t)) ++changed;
    cleaned.add(std::move(r));
  }
  save_tickets(o.output, cleaned);
  out << "ingested " << cleaned.size() << " tickets into " << o.output;
  if (redactor) out << " (" << changed << " redacted)";
  out << '\n';
  detail::log(g, err, "ingest read " + o.input);
  return kOk;
}

inline int cmd_fit(const GlobalOptions& g, const FitOptions& o, std::ostream& out, std::ostream& err) {
  const auto name = o.name.empty() ? detail::default_name(o.technique) : o.name;
  std::unique_ptr<Technique> technique;
  if (o.technique == "expert") {
    technique = std::make_unique<ExpertTechnique>(name, load_lexicon(o.lexicon), detail::fit_normalization(o));
  } else if (o.technique == "tfidf") {
    const auto cfg = detail::fit_normalization(o);
    technique = std::make_unique<TfidfTechnique>(name, tfidf_fit(detail::require_train(o), cfg, o.max_features),
                                                 o.max_features);
  } else if (o.technique == "bm25") {
    const auto cfg = detail::fit_normalization(o);
    technique = std::make_unique<Bm25Technique>(name, bm25_fit(detail::require_train(o), {o.k1, o.b, o.epsilon}, cfg));
  } else if (o.technique == "lda") {
    const auto cfg = detail::fit_normalization(o);
    LdaConfig lc;
    lc.topics = o.topics;
    lc.alpha = o.alpha;
    lc.beta = o.beta;
    lc.iterations = o.iterations;
    lc.fold_in_iterations = o.fold_in;
    lc.seed = g.seed;
    technique = std::make_unique<LdaTechnique>(name, lda_fit(detail::require_train(o), cfg, lc));
  } else if (o.technique == "wordvec-avg") {
    if (o.vectors.empty()) throw usage_error("--vectors is required for wordvec-avg");
    technique = std::make_unique<WordVectorTechnique>(name, std::filesystem::absolute(o.vectors).string(),
                                                      detail::fit_normalization(o));
  } else if (o.technique == "external-embed") {
    EmbeddingProviderSpec spec;
    spec.name = o.provider_name.empty() ? name : o.provider_name;
    spec.dim = o.dim;
    if (!o.embeddings.empty()) {
      spec.source = VectorFileSource{std::filesystem::absolute(o.embeddings).string()};
    } else if (!o.provider_url.empty()) {
      spec.source = RemoteSource{o.provider_url, o.timeout_ms, o.retries,
                                 o.cache_dir.empty() ? std::string{} : std::filesystem::absolute(o.cache_dir).string()};
    } else {
      throw usage_error("external-embed needs --embeddings or --provider-url");
    }
    technique = std::make_unique<ExternalEmbeddingTechnique>(name, std::move(spec));
  } else if (o.technique == "random") {
    technique = std::make_unique<RandomTechnique>(name, g.seed);
  } else {
    throw usage_error("unknown technique '" + o.technique + "'");
  }
  save_technique(o.model_out, *technique);
  out << "wrote " << technique->kind() << " model '" << technique->name() << "' to " << o.model_out
      << " (fingerprint " << technique->config_fingerprint() << ")\n";
  if (const auto* tfidf = dynamic_cast<const TfidfTechnique*>(technique.get())) {
    detail::log(g, err, "vocabulary size " + std::to_string(tfidf->model().dim()));
  }
  return kOk;
}

inline int cmd_compare(const GlobalOptions& g, const CompareOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const auto subgroups = load_positions_dir(o.positions_dir, &warnings);
  for (const auto& w : warnings) err << "ticketsim: warning: " << w << '\n';
  if (subgroups.empty()) throw data_error("no positions CSV files in '" + o.positions_dir + "'");
  const auto corpus = load_tickets(o.eval_corpus);

  // Artifacts must exist and agree on preprocessing before any timing run.
  std::vector<std::unique_ptr<Technique>> probes;
  for (const auto& path : o.techniques) probes.push_back(load_technique(path));
  std::vector<const Technique*> views;
  for (const auto& p : probes) views.push_back(p.get());
  check_preprocessing_compatible(views);

  std::vector<EvalReportRow> rows;
  bool failed = false;
  for (std::size_t i = 0; i < o.techniques.size(); ++i) {
    const auto& path = o.techniques[i];
    try {
      rows.push_back(evaluate_technique_row(artifact_loader(path), corpus, subgroups));
      detail::log(g, err, "evaluated " + rows.back().technique);
    } catch (const std::exception& e) {
      failed = true;
      EvalReportRow row;
      row.technique = probes[i]->name();
      row.error = e.what();
      rows.push_back(std::move(row));
      err << "ticketsim: technique '" << probes[i]->name() << "' failed: " << e.what() << '\n';
    }
  }
  const auto report = compare_report(rows, o.with_paper_refs);
  if (!o.report_out.empty()) {
    detail::write_file(o.report_out + ".json", report.json.dump(2) + "\n");
    detail::write_file(o.report_out + ".txt", report.text);
  }
  out << report.text;
  return failed ? kRuntime : kOk;
}

inline int cmd_embed_cache(const GlobalOptions& g, const EmbedCacheOptions& o, std::ostream& out, std::ostream& err) {
  const auto corpus = load_tickets(o.corpus);
  EmbeddingProviderSpec spec{o.provider_name, o.dim, RemoteSource{o.provider_url, o.timeout_ms, o.retries, o.cache_dir}};
  const ExternalEmbedder embedder(spec);
  PrecomputedEmbeddings file;
  file.provider = o.provider_name;
  file.dim = o.dim;
  for (const auto& t : corpus) {
    file.add(t.external_id, embedder.embed(t.external_id, query_text(t)).values());
    detail::log(g, err, "embedded " + t.external_id);
  }
  std::ostringstream buffer;
  write_precomputed_embeddings(buffer, file);
  detail::write_file(o.output, buffer.str());
  out << "wrote " << file.order.size() << " embeddings (dim " << o.dim << ") to " << o.output << '\n';
  return kOk;
}

/// Binds, bootstraps, then serves until SIGINT or SIGTERM.
inline int cmd_serve(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto cfg = load_service_config(g.config);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGUSR1);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  httplib::Server server;
  int port = cfg.port;
  if (port == 0) {
    port = server.bind_to_any_port(cfg.host);
    if (port < 0) {
      pthread_sigmask(SIG_SETMASK, &previous, nullptr);
      throw runtime_error("cannot bind " + cfg.host);
    }
  } else if (!server.bind_to_port(cfg.host, port)) {
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    throw runtime_error("cannot bind " + cfg.host + ":" + std::to_string(port));
  }

  std::shared_ptr<const Technique> technique = load_technique(cfg.model_path);
  TicketService service(cfg, technique);
  const auto report = service.bootstrap(load_tickets(cfg.corpus_path));
  for (const auto& [id, msg] : report.failures) err << "ticketsim: could not index '" << id << "': " << msg << '\n';
  if (!report.failures.empty()) err << "ticketsim: " << report.failures.size() << " tickets failed to index\n";
  detail::log(g, err, "indexed " + std::to_string(report.indexed) + (report.from_snapshot ? " from snapshot" : "") +
                          ", replayed " + std::to_string(report.replayed_tickets) + " tickets and " +
                          std::to_string(report.replayed_feedback) + " feedback records");
  install_routes(server, service);

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  out << "listening on http://" << cfg.host << ":" << port << std::endl;
  const bool ok = server.listen_after_bind();
  pthread_kill(waiter.native_handle(), SIGUSR1);
  waiter.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  if (!report.failures.empty()) return kData;
  return ok ? kOk : kRuntime;
}

/// Parses argv and dispatches; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Retrieve previously solved support tickets similar to a new one."};
  app.name("ticketsim");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed for sampling techniques")->capture_default_str();
  app.add_flag("--verbose,-v", g.verbose, "Log progress to stderr");
  app.add_option("--config", g.config, "Service configuration file (JSON)");

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate (and optionally redact) a ticket JSONL file");
  ingest_cmd->add_option("--input", ingest.input, "Raw ticket JSONL file")->required();
  ingest_cmd->add_option("--output", ingest.output, "Validated ticket JSONL file to write")->required();
  ingest_cmd->add_option("--redact-rules", ingest.redact_rules, "JSON array of {pattern, tag} redaction rules");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a technique and write its model artifact");
  fit_cmd->add_option("--technique", fit.technique, "Technique to fit")
      ->required()
      ->check(CLI::IsMember(technique_kinds()));
  fit_cmd->add_option("--train", fit.train, "Training ticket JSONL (tfidf, bm25, lda)");
  fit_cmd->add_option("--model-out", fit.model_out, "Model artifact to write")->required();
  fit_cmd->add_option("--name", fit.name, "Display name used in reports");
  fit_cmd->add_option("--lexicon", fit.lexicon, "Expert-system lexicon (JSON); defaults to the bundled sample");
  fit_cmd->add_option("--stopwords", fit.stopwords, "Stopword list file; defaults to the bundled English list");
  fit_cmd->add_flag("--remove-stopwords", fit.remove_stopwords, "Drop stopwords (default for tfidf only)");
  fit_cmd->add_flag("--keep-stopwords", fit.keep_stopwords, "Keep stopwords, also for tfidf");
  fit_cmd->add_flag("--no-fold", fit.no_fold, "Skip accent and compatibility folding");
  fit_cmd->add_option("--max-features", fit.max_features, "TF-IDF vocabulary size")->capture_default_str();
  fit_cmd->add_option("--k1", fit.k1, "BM25 term saturation")->capture_default_str();
  fit_cmd->add_option("--b", fit.b, "BM25 length normalization")->capture_default_str();
  fit_cmd->add_option("--epsilon", fit.epsilon, "BM25 idf floor factor")->capture_default_str();
  fit_cmd->add_option("--topics", fit.topics, "LDA topic count")->capture_default_str();
  fit_cmd->add_option("--alpha", fit.alpha, "LDA document-topic prior (0 = 50/topics)")->capture_default_str();
  fit_cmd->add_option("--beta", fit.beta, "LDA topic-word prior")->capture_default_str();
  fit_cmd->add_option("--iterations", fit.iterations, "LDA Gibbs sweeps")->capture_default_str();
  fit_cmd->add_option("--fold-in", fit.fold_in, "LDA fold-in sweeps per document")->capture_default_str();
  fit_cmd->add_option("--vectors", fit.vectors, "Word-vector text file (wordvec-avg)");
  fit_cmd->add_option("--embeddings", fit.embeddings, "Precomputed ticket-embedding JSONL (external-embed)");
  fit_cmd->add_option("--provider-url", fit.provider_url, "Remote embedding endpoint (external-embed)");
  fit_cmd->add_option("--provider-name", fit.provider_name, "Embedding provider name");
  fit_cmd->add_option("--dim", fit.dim, "Declared embedding dimension (external-embed)");
  fit_cmd->add_option("--cache-dir", fit.cache_dir, "Persistent embedding cache directory");
  fit_cmd->add_option("--timeout-ms", fit.timeout_ms, "Provider timeout in milliseconds")->capture_default_str();
  fit_cmd->add_option("--retries", fit.retries, "Provider retries")->capture_default_str();

  CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "Evaluate model artifacts on the labeled subgroups");
  compare_cmd->add_option("--positions-dir", compare.positions_dir, "Directory of card-position CSV files")
      ->required();
  compare_cmd->add_option("--eval-corpus", compare.eval_corpus, "Labeled ticket JSONL")->required();
  compare_cmd->add_option("--techniques", compare.techniques, "Model artifacts to evaluate")->required();
  compare_cmd->add_option("--report-out", compare.report_out, "Report path prefix (.json and .txt are written)");
  compare_cmd->add_flag("--with-paper-refs", compare.with_paper_refs, "Attach published reference values");

  EmbedCacheOptions embed;
  auto* embed_cmd = app.add_subcommand("embed-cache", "Precompute remote embeddings for a corpus");
  embed_cmd->add_option("--corpus", embed.corpus, "Ticket JSONL")->required();
  embed_cmd->add_option("--output", embed.output, "Embedding JSONL to write")->required();
  embed_cmd->add_option("--provider-url", embed.provider_url, "Remote embedding endpoint")->required();
  embed_cmd->add_option("--provider-name", embed.provider_name, "Provider name")->required();
  embed_cmd->add_option("--dim", embed.dim, "Declared embedding dimension")->required();
  embed_cmd->add_option("--cache-dir", embed.cache_dir, "Persistent embedding cache directory");
  embed_cmd->add_option("--timeout-ms", embed.timeout_ms, "Provider timeout in milliseconds")->capture_default_str();
  embed_cmd->add_option("--retries", embed.retries, "Provider retries")->capture_default_str();

  auto* serve_cmd = app.add_subcommand("serve", "Run the recommendation service (uses --config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "ticketsim: " << e.what() << "\nRun with --help for usage.\n";
    return kUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(g, ingest, out, err);
    if (*fit_cmd) return cmd_fit(g, fit, out, err);
    if (*compare_cmd) return cmd_compare(g, compare, out, err);
    if (*embed_cmd) return cmd_embed_cache(g, embed, out, err);
    if (*serve_cmd) return cmd_serve(g, out, err);
  } catch (const Error& e) {
    err << "ticketsim: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "ticketsim: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace ticketsim::cli
