#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>

#include "support.hpp"
#include "ticketsim/service.hpp"

using namespace ticketsim;
using testing_support::ticket;

namespace {

Corpus bootstrap_corpus(std::size_t n = 30) {
  const std::vector<std::string> topics = {"printer toner empty", "vpn tunnel drops", "outlook mailbox full",
                                           "password reset needed", "monitor flickers"};
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    auto t = ticket("B" + std::to_string(100 + i), topics[i % topics.size()] + " case " + std::to_string(i),
                    "details for case " + std::to_string(i));
    t.solution = "fixed " + std::to_string(i);
    char date[32];
    std::snprintf(date, sizeof date, "2021-01-%02zu 09:00", 1 + i % 28);
    t.date_open = Timestamp::parse(date);
    c.add(std::move(t));
  }
  return c;
}

std::shared_ptr<const Technique> tfidf_for(const Corpus& c) {
  return std::make_shared<TfidfTechnique>("TF-IDF", tfidf_fit(c, {}), 500);
}

ServiceConfig config_in(const testing_support::TempDir& dir, std::size_t window = 100) {
  ServiceConfig cfg;
  cfg.data_dir = dir.file("data");
  cfg.candidate_window = window;
  return cfg;
}

FeedbackRecord feedback(const std::string& query, std::vector<std::string> ids, Verdict v) {
  FeedbackRecord f;
  f.query_ticket_id = query;
  f.recommended_ids = std::move(ids);
  f.verdict = v;
  return f;
}

}  // namespace

TEST(ServiceConfig, FileAndEnvironmentOverrides) {
  testing_support::TempDir dir;
  testing_support::write_text(dir.file("svc.json"),
                              R"({"model_path":"m.json","corpus_path":"/abs/c.jsonl","k":3,"candidate_window":50})");
  ::setenv("TICKETSIM_PORT", "9099", 1);
  const auto cfg = load_service_config(dir.file("svc.json"));
  ::unsetenv("TICKETSIM_PORT");
  EXPECT_EQ(cfg.model_path, dir.file("m.json"));
  EXPECT_EQ(cfg.corpus_path, "/abs/c.jsonl");
  EXPECT_EQ(cfg.k, 3u);
  EXPECT_EQ(cfg.candidate_window, 50u);
  EXPECT_EQ(cfg.port, 9099);
}

TEST(ServiceConfig, WindowMustCoverK) {
  testing_support::TempDir dir;
  testing_support::write_text(dir.file("svc.json"),
                              R"({"model_path":"m","corpus_path":"c","k":6,"candidate_window":5})");
  EXPECT_THROW(load_service_config(dir.file("svc.json")), Error);
  testing_support::write_text(dir.file("nomodel.json"), R"({"corpus_path":"c"})");
  EXPECT_THROW(load_service_config(dir.file("nomodel.json")), Error);
}

TEST(Service, BootstrapIndexesEveryTicket) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  TicketService service(config_in(dir), tfidf_for(corpus));
  const auto report = service.bootstrap(corpus);
  EXPECT_EQ(report.indexed, 30u);
  EXPECT_FALSE(report.from_snapshot);
  EXPECT_TRUE(report.failures.empty());
  EXPECT_EQ(service.index_size(), 30u);
  EXPECT_EQ(service.health()["status"], "ok");
}

TEST(Service, EmptyCorpusGivesValidSnapshot) {
  testing_support::TempDir dir;
  TicketService service(config_in(dir), tfidf_for(bootstrap_corpus()));
  EXPECT_EQ(service.bootstrap(Corpus{}).indexed, 0u);
  EXPECT_TRUE(read_snapshot(service.snapshot_dir()).entries.empty());
  EXPECT_TRUE(service.submit_ticket("printer", "broken").recommendations.empty());
}

TEST(Service, RebootstrapReusesIdenticalSnapshot) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  std::string first;
  {
    TicketService service(config_in(dir), tfidf_for(corpus));
    service.bootstrap(corpus);
    first = testing_support::read_text(dir.file("data/snapshot/snapshot.jsonl"));
  }
  TicketService again(config_in(dir), tfidf_for(corpus));
  EXPECT_TRUE(again.bootstrap(corpus).from_snapshot);
  EXPECT_EQ(testing_support::read_text(dir.file("data/snapshot/snapshot.jsonl")), first);
}

TEST(Service, ChangedCorpusRebuildsSnapshot) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  {
    TicketService service(config_in(dir), tfidf_for(corpus));
    service.bootstrap(corpus);
  }
  const auto bigger = bootstrap_corpus(31);
  TicketService again(config_in(dir), tfidf_for(corpus));
  const auto report = again.bootstrap(bigger);
  EXPECT_FALSE(report.from_snapshot);
  EXPECT_EQ(report.indexed, 31u);
}

TEST(Service, RepresentationFailuresAreCountedNotFatal) {
  testing_support::TempDir dir;
  auto corpus = bootstrap_corpus(5);
  PrecomputedEmbeddings file;
  file.provider = "p";
  file.dim = 2;
  file.add("B100", {1, 0});
  file.add("B101", {0, 1});
  std::ostringstream out;
  write_precomputed_embeddings(out, file);
  testing_support::write_text(dir.file("e.jsonl"), out.str());
  auto technique = std::make_shared<ExternalEmbeddingTechnique>(
      "ext", EmbeddingProviderSpec{"p", 2, VectorFileSource{dir.file("e.jsonl")}});
  TicketService service(config_in(dir), technique);
  const auto report = service.bootstrap(corpus);
  EXPECT_EQ(report.indexed, 2u);
  EXPECT_EQ(report.failures.size(), 3u);
}

TEST(Service, SubmitRecommendsFromBootstrapAndNeverItself) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  TicketService service(config_in(dir), tfidf_for(corpus));
  service.bootstrap(corpus);
  const auto& stored = corpus.at("B107");
  const auto result = service.submit_ticket(stored.title, stored.description);
  ASSERT_EQ(result.recommendations.size(), 5u);
  EXPECT_EQ(result.recommendations[0].external_id, "B107");
  EXPECT_NEAR(result.recommendations[0].score, 1.0, 1e-12);
  EXPECT_EQ(result.recommendations[0].solution, "fixed 7");
  for (std::size_t i = 0; i < result.recommendations.size(); ++i) {
    EXPECT_NE(result.recommendations[i].external_id, result.ticket_id);
    if (i) EXPECT_LE(result.recommendations[i].score, result.recommendations[i - 1].score);
  }
  EXPECT_EQ(service.index_size(), 31u);
  EXPECT_TRUE(service.get_ticket(result.ticket_id).has_value());
}

TEST(Service, WindowLimitsCandidates) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  TicketService service(config_in(dir, 5), tfidf_for(corpus));
  service.bootstrap(corpus);
  // Only the five newest tickets (dates 2021-01-26..30 wrap, so check by set) are eligible.
  const auto ranks = corpus.recency_ranks();
  std::set<std::string> newest;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (ranks[i] < 5) newest.insert(corpus[i].external_id);
  }
  const auto result = service.submit_ticket("printer toner", "empty");
  for (const auto& r : result.recommendations) EXPECT_TRUE(newest.count(r.external_id)) << r.external_id;
}

TEST(Service, BlankTicketIsRejected) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  TicketService service(config_in(dir), tfidf_for(corpus));
  service.bootstrap(corpus);
  try {
    service.submit_ticket("  ", "\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
  EXPECT_EQ(service.index_size(), 30u);
}

TEST(Service, FeedbackIsAppendOnly) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  TicketService service(config_in(dir), tfidf_for(corpus));
  service.bootstrap(corpus);
  const auto r = service.submit_ticket("vpn", "tunnel drops");
  service.record_feedback(feedback(r.ticket_id, {r.recommendations[0].external_id}, Verdict::helpful));
  service.record_feedback(feedback(r.ticket_id, {}, Verdict::not_helpful));
  const auto list = service.list_feedback();
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].verdict, Verdict::helpful);
  EXPECT_EQ(list[1].verdict, Verdict::not_helpful);
  EXPECT_EQ(list[0].technique, "TF-IDF");
  try {
    service.record_feedback(feedback("nope", {}, Verdict::helpful));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_found);
  }
  EXPECT_THROW(service.record_feedback(feedback(r.ticket_id, {"a", "b", "c", "d", "e", "f"}, Verdict::helpful)),
               Error);
}

TEST(Service, RestartReplaysJournalAndFeedback) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  std::vector<std::string> expected;
  {
    TicketService service(config_in(dir), tfidf_for(corpus));
    service.bootstrap(corpus);
    for (int i = 0; i < 4; ++i) service.submit_ticket("printer toner", "again " + std::to_string(i));
    service.record_feedback(feedback("LIVE-000002", {}, Verdict::helpful));
  }
  TicketService restarted(config_in(dir), tfidf_for(corpus));
  const auto report = restarted.bootstrap(corpus);
  EXPECT_EQ(report.replayed_tickets, 4u);
  EXPECT_EQ(report.replayed_feedback, 1u);
  EXPECT_EQ(restarted.index_size(), 34u);
  EXPECT_EQ(restarted.submit_ticket("x", "y").ticket_id, "LIVE-000005");
}

TEST(Service, TornJournalLineIsDropped) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  {
    TicketService service(config_in(dir), tfidf_for(corpus));
    service.bootstrap(corpus);
    service.submit_ticket("printer toner", "one");
    service.submit_ticket("printer toner", "two");
  }
  const auto journal = dir.file("data/journal.jsonl");
  auto text = testing_support::read_text(journal);
  testing_support::write_text(journal, text.substr(0, text.size() - 20));
  TicketService restarted(config_in(dir), tfidf_for(corpus));
  EXPECT_EQ(restarted.bootstrap(corpus).replayed_tickets, 1u);
  EXPECT_EQ(restarted.submit_ticket("a", "b").ticket_id, "LIVE-000002");
}

TEST(Service, ConcurrentSubmitsGetDistinctIds) {
  testing_support::TempDir dir;
  const auto corpus = bootstrap_corpus();
  TicketService service(config_in(dir), tfidf_for(corpus));
  service.bootstrap(corpus);
  std::vector<std::thread> threads;
  std::mutex m;
  std::set<std::string> ids;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 10; ++i) {
        const auto r = service.submit_ticket("vpn " + std::to_string(t), "drops " + std::to_string(i));
        std::lock_guard lock(m);
        ids.insert(r.ticket_id);
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(ids.size(), 40u);
  EXPECT_EQ(service.index_size(), 70u);
}

// --- HTTP --------------------------------------------------------------------

namespace {

class HttpFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = bootstrap_corpus();
    service_ = std::make_unique<TicketService>(config_in(dir_), tfidf_for(corpus_));
    service_->bootstrap(corpus_);
    install_routes(server_, *service_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

  testing_support::TempDir dir_;
  Corpus corpus_;
  std::unique_ptr<TicketService> service_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_F(HttpFixture, SubmitAndFetch) {
  auto c = client();
  auto res = c.Post("/tickets", R"({"title":"outlook","description":"mailbox full"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto body = nlohmann::json::parse(res->body);
  const auto id = body["ticket_id"].get<std::string>();
  ASSERT_EQ(body["recommendations"].size(), 5u);
  for (const auto& rec : body["recommendations"]) {
    EXPECT_TRUE(rec.contains("external_id"));
    EXPECT_TRUE(rec.contains("score"));
    EXPECT_TRUE(rec.contains("title"));
    EXPECT_TRUE(rec.contains("solution"));
  }
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");

  res = c.Get(("/tickets/" + id).c_str());
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body)["title"], "outlook");

  res = c.Get("/tickets/B105");
  ASSERT_TRUE(res);
  EXPECT_EQ(nlohmann::json::parse(res->body)["solution"], "fixed 5");
}

TEST_F(HttpFixture, ErrorStatuses) {
  auto c = client();
  auto res = c.Post("/tickets", R"({"title":"","description":""})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  res = c.Post("/tickets", "not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  res = c.Get("/tickets/NOPE");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  res = c.Post("/feedback", R"({"query_ticket_id":"NOPE","recommended_ids":[],"verdict":"helpful","technique":"x"})",
               "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  res = c.Post("/feedback", R"({"query_ticket_id":"B100","recommended_ids":[],"verdict":"meh"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(HttpFixture, FeedbackRoundTrip) {
  auto c = client();
  auto res = c.Post("/tickets", R"({"title":"vpn","description":"tunnel"})", "application/json");
  const auto submitted = nlohmann::json::parse(res->body);
  nlohmann::json fb = {{"query_ticket_id", submitted["ticket_id"]},
                       {"recommended_ids", {submitted["recommendations"][0]["external_id"]}},
                       {"verdict", "helpful"},
                       {"technique", "TF-IDF"}};
  res = c.Post("/feedback", fb.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  res = c.Get("/feedback");
  ASSERT_TRUE(res);
  const auto list = nlohmann::json::parse(res->body);
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0]["verdict"], "helpful");
  EXPECT_EQ(list[0]["query_ticket_id"], submitted["ticket_id"]);
}

TEST_F(HttpFixture, HealthAndPreflight) {
  auto c = client();
  auto res = c.Get("/health");
  ASSERT_TRUE(res);
  const auto body = nlohmann::json::parse(res->body);
  EXPECT_EQ(body["status"], "ok");
  EXPECT_EQ(body["technique"], "TF-IDF");
  EXPECT_EQ(body["index_size"], 30);
  res = c.Options("/tickets");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
}
