#pragma once

// The recommendation service. Two flows share one store:
//  * collection: every corpus ticket is represented and indexed once
//    (persisted as a snapshot);
//  * query: a submitted ticket is represented, matched against the most
//    recent stored tickets, then stored itself (journaled) so later queries
//    can retrieve it.
// Analyst feedback goes to its own append-only log.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ticketsim/corpus.hpp"
#include "ticketsim/error.hpp"
#include "ticketsim/index.hpp"
#include "ticketsim/technique.hpp"

namespace ticketsim {

struct ServiceConfig {
  std::string model_path;
  std::string corpus_path;
  std::string data_dir = "service-data";
  std::size_t candidate_window = 100;
  std::size_t k = 5;
  std::string host = "127.0.0.1";
  int port = 8080;

  void validate() const {
    if (k < 1) throw usage_error("k must be >= 1");
    if (candidate_window < k) throw usage_error("candidate_window must be >= k");
    if (port < 0 || port > 65535) throw usage_error("port out of range");
  }
};

/// Reads the JSON config file (when given), then applies TICKETSIM_*
/// environment overrides: MODEL, CORPUS, DATA_DIR, WINDOW, K, HOST, PORT.
inline ServiceConfig load_service_config(const std::string& path) {
  ServiceConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open service config '" + path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      cfg.model_path = j.value("model_path", cfg.model_path);
      cfg.corpus_path = j.value("corpus_path", cfg.corpus_path);
      cfg.data_dir = j.value("data_dir", cfg.data_dir);
      cfg.candidate_window = j.value("candidate_window", cfg.candidate_window);
      cfg.k = j.value("k", cfg.k);
      cfg.host = j.value("host", cfg.host);
      cfg.port = j.value("port", cfg.port);
    } catch (const nlohmann::json::exception& e) {
      throw usage_error("service config '" + path + "': " + e.what());
    }
    // Relative paths in the file are relative to the file.
    const auto base = std::filesystem::path(path).parent_path();
    for (auto* p : {&cfg.model_path, &cfg.corpus_path, &cfg.data_dir}) {
      if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
    }
  }
  const auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  try {
    if (auto v = env("TICKETSIM_MODEL")) cfg.model_path = *v;
    if (auto v = env("TICKETSIM_CORPUS")) cfg.corpus_path = *v;
    if (auto v = env("TICKETSIM_DATA_DIR")) cfg.data_dir = *v;
    if (auto v = env("TICKETSIM_WINDOW")) cfg.candidate_window = std::stoul(*v);
    if (auto v = env("TICKETSIM_K")) cfg.k = std::stoul(*v);
    if (auto v = env("TICKETSIM_HOST")) cfg.host = *v;
    if (auto v = env("TICKETSIM_PORT")) cfg.port = std::stoi(*v);
  } catch (const std::logic_error&) {
    throw usage_error("numeric TICKETSIM_* override is not a number");
  }
  cfg.validate();
  if (cfg.model_path.empty()) throw usage_error("service config needs model_path");
  if (cfg.corpus_path.empty()) throw usage_error("service config needs corpus_path");
  return cfg;
}

enum class Verdict { helpful, not_helpful };

inline const char* to_string(Verdict v) { return v == Verdict::helpful ? "helpful" : "not_helpful"; }

inline Verdict parse_verdict(const std::string& s) {
  if (s == "helpful") return Verdict::helpful;
  if (s == "not_helpful") return Verdict::not_helpful;
  throw validation_error("verdict must be 'helpful' or 'not_helpful', got '" + s + "'");
}

struct FeedbackRecord {
  std::string query_ticket_id;
  std::vector<std::string> recommended_ids;
  Verdict verdict = Verdict::helpful;
  std::string technique;
  std::string timestamp;
};

inline nlohmann::ordered_json to_json(const FeedbackRecord& f) {
  nlohmann::ordered_json j;
  j["query_ticket_id"] = f.query_ticket_id;
  j["recommended_ids"] = f.recommended_ids;
  j["verdict"] = to_string(f.verdict);
  j["technique"] = f.technique;
  j["timestamp"] = f.timestamp;
  return j;
}

inline FeedbackRecord feedback_from_json(const nlohmann::json& j) {
  try {
    FeedbackRecord f;
    f.query_ticket_id = j.at("query_ticket_id").get<std::string>();
    f.recommended_ids = j.at("recommended_ids").get<std::vector<std::string>>();
    f.verdict = parse_verdict(j.at("verdict").get<std::string>());
    f.technique = j.value("technique", std::string{});
    f.timestamp = j.value("timestamp", std::string{});
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("malformed feedback: ") + e.what());
  }
}

struct Recommendation {
  std::string external_id;
  double score = 0.0;
  std::string title;
  std::optional<std::string> solution;
};

struct SubmitResult {
  std::string ticket_id;
  std::vector<Recommendation> recommendations;
};

inline nlohmann::ordered_json to_json(const SubmitResult& r) {
  nlohmann::ordered_json j;
  j["ticket_id"] = r.ticket_id;
  auto& recs = j["recommendations"] = nlohmann::ordered_json::array();
  for (const auto& rec : r.recommendations) {
    nlohmann::ordered_json item;
    item["external_id"] = rec.external_id;
    item["score"] = rec.score;
    item["title"] = rec.title;
    item["solution"] = rec.solution ? nlohmann::ordered_json(*rec.solution) : nlohmann::ordered_json(nullptr);
    recs.push_back(std::move(item));
  }
  return j;
}

struct BootstrapReport {
  std::size_t indexed = 0;
  bool from_snapshot = false;
  std::vector<std::pair<std::string, std::string>> failures;  // id, message
  std::size_t replayed_tickets = 0;
  std::size_t replayed_feedback = 0;
};

inline std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class TicketService {
 public:
  TicketService(ServiceConfig cfg, std::shared_ptr<const Technique> technique)
      : cfg_(std::move(cfg)), technique_(std::move(technique)) {
    cfg_.validate();
    if (!technique_) throw usage_error("service needs a technique");
  }

  const ServiceConfig& config() const noexcept { return cfg_; }
  const Technique& technique() const noexcept { return *technique_; }
  std::filesystem::path data_dir() const { return cfg_.data_dir; }
  std::filesystem::path snapshot_dir() const { return data_dir() / "snapshot"; }
  std::filesystem::path journal_path() const { return data_dir() / "journal.jsonl"; }
  std::filesystem::path feedback_path() const { return data_dir() / "feedback.jsonl"; }

  /// Indexes the corpus (oldest first, so the newest ticket gets recency
  /// rank 0), reusing a snapshot that matches technique and corpus, then
  /// replays the ticket journal and the feedback log.
  BootstrapReport bootstrap(const Corpus& corpus) {
    std::unique_lock lock(store_mutex_);
    if (bootstrapped_) throw usage_error("service already bootstrapped");
    BootstrapReport report;
    std::filesystem::create_directories(data_dir());

    const auto order = corpus.chronological_order();
    std::vector<std::string> ids;
    ids.reserve(order.size());
    for (auto pos : order) ids.push_back(corpus[pos].external_id);

    bool loaded = false;
    if (std::filesystem::exists(snapshot_dir() / "manifest.json")) {
      try {
        auto snap = read_snapshot(snapshot_dir());
        bool matches = snap.info.technique == technique_->name() &&
                       snap.info.fingerprint == technique_->config_fingerprint() && snap.entries.size() <= ids.size();
        std::vector<std::string> snap_ids;
        for (const auto& [id, _] : snap.entries) snap_ids.push_back(id);
        if (matches && snap_ids.size() == ids.size() && snap_ids == ids) {
          for (auto& [id, rep] : snap.entries) index_.insert(id, std::move(rep));
          loaded = true;
        }
      } catch (const Error& e) {
        std::cerr << "ticketsim: ignoring unusable snapshot: " << e.what() << '\n';
      }
    }
    if (!loaded) {
      for (auto pos : order) {
        const auto& t = corpus[pos];
        try {
          index_.insert(t.external_id, technique_->represent(document_of(t)));
        } catch (const Error& e) {
          report.failures.emplace_back(t.external_id, e.what());
        }
      }
      write_snapshot(snapshot_dir(), {technique_->name(), technique_->config_fingerprint()}, index_.entries());
    }
    for (const auto& t : corpus) tickets_.emplace(t.external_id, t);
    report.from_snapshot = loaded;
    report.indexed = index_.size();

    report.replayed_tickets = replay_journal();
    report.replayed_feedback = replay_feedback();
    bootstrapped_ = true;
    return report;
  }

  /// Represents the ticket, scores it against the most recent stored
  /// tickets and stores it afterwards, so it never recommends itself.
  SubmitResult submit_ticket(const std::string& title, const std::string& description) {
    require_bootstrapped();
    if (title.find_first_not_of(" \t\r\n") == std::string::npos &&
        description.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw validation_error("a ticket needs a title or a description");
    }
    Ticket ticket;
    ticket.title = title;
    ticket.description = description;
    const auto text = query_text(ticket);
    // Representation is the expensive part and runs outside the store lock.
    Representation rep = technique_->represent(Document{"", text});

    std::unique_lock append(append_mutex_);
    ticket.external_id = next_live_id();
    ticket.date_open = Timestamp::parse(utc_now_iso());
    const auto candidates = index_.recent_candidates(cfg_.candidate_window, ticket.external_id);
    const auto ranked = technique_->rank(Document{ticket.external_id, text}, rep, candidates, cfg_.k);

    append_journal(ticket, rep);
    {
      std::unique_lock lock(store_mutex_);
      tickets_.emplace(ticket.external_id, ticket);
    }
    index_.insert(ticket.external_id, std::move(rep));
    ++live_count_;

    SubmitResult result;
    result.ticket_id = ticket.external_id;
    std::shared_lock lock(store_mutex_);
    for (const auto& item : ranked.items) {
      const auto& stored = tickets_.at(item.external_id);
      result.recommendations.push_back({item.external_id, item.score, stored.title, stored.solution});
    }
    return result;
  }

  FeedbackRecord record_feedback(FeedbackRecord fb) {
    require_bootstrapped();
    if (fb.recommended_ids.size() > cfg_.k) {
      throw validation_error("feedback lists " + std::to_string(fb.recommended_ids.size()) +
                             " recommendations, at most " + std::to_string(cfg_.k) + " allowed");
    }
    {
      std::shared_lock lock(store_mutex_);
      if (!tickets_.count(fb.query_ticket_id)) throw not_found_error("unknown ticket '" + fb.query_ticket_id + "'");
    }
    if (fb.technique.empty()) fb.technique = technique_->name();
    fb.timestamp = utc_now_iso();
    std::unique_lock lock(feedback_mutex_);
    append_line(feedback_path(), to_json(fb).dump());
    feedback_.push_back(fb);
    return fb;
  }

  std::vector<FeedbackRecord> list_feedback() const {
    std::shared_lock lock(feedback_mutex_);
    return feedback_;
  }

  std::optional<Ticket> get_ticket(const std::string& id) const {
    std::shared_lock lock(store_mutex_);
    const auto it = tickets_.find(id);
    if (it == tickets_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_size() const { return index_.size(); }

  nlohmann::ordered_json health() const {
    nlohmann::ordered_json j;
    j["status"] = bootstrapped_ ? "ok" : "starting";
    j["technique"] = technique_->name();
    j["index_size"] = index_size();
    return j;
  }

 private:
  void require_bootstrapped() const {
    if (!bootstrapped_) throw runtime_error("service is not bootstrapped");
  }

  std::string next_live_id() {
    for (;;) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "LIVE-%06zu", live_count_ + 1 + id_skips_);
      std::shared_lock lock(store_mutex_);
      if (!tickets_.count(buf)) return buf;
      ++id_skips_;
    }
  }

  static void append_line(const std::filesystem::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw runtime_error("cannot append to '" + path.string() + "'");
    out << line << '\n';
    out.flush();
    if (!out) throw runtime_error("append to '" + path.string() + "' failed");
  }

  void append_journal(const Ticket& t, const Representation& rep) {
    nlohmann::ordered_json j;
    j["type"] = "ticket";
    j["ticket"] = ticket_to_json(t);
    j["representation"] = representation_to_json(t.external_id, rep);
    append_line(journal_path(), j.dump());
  }

  /// Reads complete lines; a torn final line (crash mid-write) is cut off.
  static std::vector<nlohmann::json> read_log(const std::filesystem::path& path) {
    std::vector<nlohmann::json> records;
    std::ifstream in(path, std::ios::binary);
    if (!in) return records;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::size_t start = 0, good_end = 0;
    while (start < content.size()) {
      const auto nl = content.find('\n', start);
      if (nl == std::string::npos) break;
      const auto line = content.substr(start, nl - start);
      if (!line.empty()) {
        try {
          records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception&) {
          break;
        }
      }
      start = nl + 1;
      good_end = start;
    }
    if (good_end < content.size()) std::filesystem::resize_file(path, good_end);
    return records;
  }

  std::size_t replay_journal() {
    std::size_t n = 0;
    for (const auto& record : read_log(journal_path())) {
      if (record.value("type", "") != "ticket") continue;
      auto ticket = ticket_from_json(record.at("ticket"));
      auto [id, rep] = representation_from_json(record.at("representation"));
      if (id != ticket.external_id) throw data_error("journal record for '" + ticket.external_id + "' is inconsistent");
      index_.insert(id, std::move(rep));
      tickets_.emplace(id, std::move(ticket));
      ++live_count_;
      ++n;
    }
    return n;
  }

  std::size_t replay_feedback() {
    std::unique_lock lock(feedback_mutex_);
    for (const auto& record : read_log(feedback_path())) feedback_.push_back(feedback_from_json(record));
    return feedback_.size();
  }

  ServiceConfig cfg_;
  std::shared_ptr<const Technique> technique_;
  RepresentationIndex index_;
  mutable std::shared_mutex store_mutex_;
  std::unordered_map<std::string, Ticket> tickets_;
  std::mutex append_mutex_;
  std::size_t live_count_ = 0;
  std::size_t id_skips_ = 0;
  mutable std::shared_mutex feedback_mutex_;
  std::vector<FeedbackRecord> feedback_;
  std::atomic<bool> bootstrapped_{false};
};

// --- HTTP ------------------------------------------------------------------

namespace detail {

inline int http_status(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::validation:
    case ErrorKind::usage: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::retryable: return 503;
    default: return 500;
  }
}

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Handler>
void guarded(httplib::Response& res, Handler&& handler) {
  try {
    handler();
  } catch (const Error& e) {
    send_json(res, http_status(e), {{"error", e.what()}});
  } catch (const nlohmann::json::exception& e) {
    send_json(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}});
  }
}

}  // namespace detail

/// POST /tickets, GET /tickets/{id}, POST /feedback, GET /feedback, GET /health.
inline void install_routes(httplib::Server& server, TicketService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/tickets", [&service](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const auto body = nlohmann::json::parse(req.body);
      if (!body.is_object()) throw validation_error("body must be a JSON object");
      const auto title = body.value("title", std::string{});
      const auto description = body.value("description", std::string{});
      detail::send_json(res, 200, to_json(service.submit_ticket(title, description)));
    });
  });

  server.Get(R"(/tickets/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const auto id = req.matches[1].str();
      const auto ticket = service.get_ticket(id);
      if (!ticket) throw not_found_error("unknown ticket '" + id + "'");
      detail::send_json(res, 200, ticket_to_json(*ticket));
    });
  });

  server.Post("/feedback", [&service](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const auto stored = service.record_feedback(feedback_from_json(nlohmann::json::parse(req.body)));
      detail::send_json(res, 201, to_json(stored));
    });
  });

  server.Get("/feedback", [&service](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] {
      auto list = nlohmann::ordered_json::array();
      for (const auto& f : service.list_feedback()) list.push_back(to_json(f));
      detail::send_json(res, 200, list);
    });
  });

  server.Get("/health", [&service](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] { detail::send_json(res, 200, service.health()); });
  });
}

}  // namespace ticketsim
