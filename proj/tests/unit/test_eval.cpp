#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "ticketsim/eval.hpp"

using namespace ticketsim;

namespace {

RetrievalResult result(std::initializer_list<const char*> ids) {
  RetrievalResult r;
  for (const auto* id : ids) r.items.push_back({id, 0.0});
  return r;
}

std::vector<CardPosition> line_layout(const std::vector<double>& xs) {
  std::vector<CardPosition> out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({"c" + std::to_string(i), xs[i], 0.0, 0});
  return out;
}

/// Ranks peers by their card distance, so it reproduces the judgment.
class OracleTechnique final : public Technique {
 public:
  explicit OracleTechnique(std::map<std::string, std::pair<double, double>> where)
      : Technique("Oracle"), where_(std::move(where)) {}
  std::string kind() const override { return "oracle"; }
  Representation represent(const Document& doc) const override {
    const auto& [x, y] = where_.at(doc.id);
    return DocumentVector({x, y});
  }
  Scorer scorer() const override { return Scorer::cosine(); }
  RetrievalResult rank(const Document&, const Representation& q, std::span<const Candidate> candidates,
                       std::size_t k) const override {
    const auto& qv = std::get<DocumentVector>(q);
    std::vector<std::pair<double, std::string>> d;
    for (const auto& c : candidates) {
      const auto& v = std::get<DocumentVector>(*c.representation);
      const double dx = v[0] - qv[0], dy = v[1] - qv[1];
      d.emplace_back(dx * dx + dy * dy, c.external_id);
    }
    std::sort(d.begin(), d.end());
    RetrievalResult r;
    for (std::size_t i = 0; i < std::min(k, d.size()); ++i) r.items.push_back({d[i].second, -d[i].first});
    return r;
  }
  nlohmann::ordered_json hyperparameters() const override { return nlohmann::ordered_json::object(); }

 private:
  std::map<std::string, std::pair<double, double>> where_;
};

/// Three subgroups of `n` cards at random positions, and a matching corpus.
std::pair<std::vector<Subgroup>, Corpus> random_layout(std::uint64_t seed, std::size_t n = 100) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(0, 1000);
  std::vector<Subgroup> groups;
  Corpus corpus;
  for (int g = 0; g < 3; ++g) {
    Subgroup s{"group" + std::to_string(g), {}};
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = "G" + std::to_string(g) + "-" + std::to_string(i);
      s.positions.push_back({id, dist(gen), dist(gen), g});
      corpus.add(testing_support::ticket(id, "title " + id, "text"));
    }
    groups.push_back(std::move(s));
  }
  return {groups, corpus};
}

}  // namespace

TEST(Positions, ParsesRows) {
  std::istringstream in("external_id,x,y\nA,1.5,-2\n\"B,1\",3,4\n");
  const auto rows = parse_positions(in, 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].external_id, "B,1");
  EXPECT_EQ(rows[0].x, 1.5);
  EXPECT_EQ(rows[0].y, -2);
  EXPECT_EQ(rows[0].subgroup, 2);
}

TEST(Positions, EmptyFileIsEmpty) {
  std::istringstream in("");
  EXPECT_TRUE(parse_positions(in, 0).empty());
}

TEST(Positions, DuplicateIdIsAnError) {
  std::istringstream in("external_id,x,y\nA,1,2\nA,3,4\n");
  EXPECT_THROW(parse_positions(in, 0), Error);
}

TEST(Positions, MalformedRowNamesTheRow) {
  std::istringstream in("external_id,x,y\nA,1,2\nB,oops,4\n");
  try {
    parse_positions(in, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
}

TEST(Positions, DirectoryLoadsOneSubgroupPerFile) {
  testing_support::TempDir dir;
  for (int g = 0; g < 3; ++g) {
    std::string csv = "external_id,x,y\n";
    for (int i = 0; i < 100; ++i) csv += "S" + std::to_string(g) + "_" + std::to_string(i) + "," + std::to_string(i) + ",0\n";
    testing_support::write_text(dir.file("sub" + std::to_string(g) + ".csv"), csv);
  }
  std::vector<std::string> warnings;
  const auto groups = load_positions_dir(dir.path(), &warnings);
  ASSERT_EQ(groups.size(), 3u);
  std::size_t total = 0;
  for (const auto& g : groups) total += g.positions.size();
  EXPECT_EQ(total, 300u);
  EXPECT_TRUE(warnings.empty());
  EXPECT_EQ(groups[2].name, "sub2");
}

TEST(Positions, ShortSubgroupWarns) {
  testing_support::TempDir dir;
  testing_support::write_text(dir.file("a.csv"), "external_id,x,y\nA,0,0\nB,1,1\n");
  std::vector<std::string> warnings;
  load_positions_dir(dir.path(), &warnings);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(GroundTruth, NearestFiveOnALine) {
  const auto j = ground_truth(line_layout({0, 1, 2, 3, 4, 5, 10}));
  EXPECT_EQ(j[0].relevant_ids, (std::set<std::string>{"c1", "c2", "c3", "c4", "c5"}));
  for (const auto& judgment : j) {
    EXPECT_EQ(judgment.relevant_ids.size(), 5u);
    EXPECT_FALSE(judgment.relevant_ids.count(judgment.query_id));
  }
}

TEST(GroundTruth, EquidistantCardsFavorSmallerId) {
  std::vector<CardPosition> cards = {{"q", 0, 0, 0}, {"a", 1, 0, 0}, {"b", 0, 1, 0}, {"c", -1, 0, 0},
                                     {"d", 0, -1, 0}, {"f", 0, 2, 0}, {"e", 2, 0, 0}};
  EXPECT_EQ(ground_truth(cards)[0].relevant_ids, (std::set<std::string>{"a", "b", "c", "d", "e"}));
}

TEST(GroundTruth, TranslationInvariant) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> dist(-10, 10);
  std::vector<CardPosition> cards;
  for (int i = 0; i < 30; ++i) cards.push_back({"k" + std::to_string(i), dist(gen), dist(gen), 0});
  auto moved = cards;
  for (auto& c : moved) {
    c.x += 256;
    c.y -= 512;
  }
  const auto a = ground_truth(cards), b = ground_truth(moved);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].relevant_ids, b[i].relevant_ids);
}

TEST(GroundTruth, RelevanceNeedNotBeSymmetric) {
  const auto j = ground_truth(line_layout({0, 1, 2, 3, 4, 5, 10}));
  EXPECT_TRUE(j[6].relevant_ids.count("c5"));
  EXPECT_FALSE(j[5].relevant_ids.count("c6"));
}

TEST(GroundTruth, TooFewCardsIsAnError) { EXPECT_THROW(ground_truth(line_layout({0, 1, 2, 3, 4})), Error); }

TEST(Metrics, PrecisionValues) {
  const std::vector<RelevanceJudgment> one = {{"q", {"a", "b", "c", "d", "e"}, 0}};
  EXPECT_DOUBLE_EQ(precision(one, {{"q", result({"a", "b", "c", "d", "e"})}}), 1.0);
  EXPECT_DOUBLE_EQ(precision(one, {{"q", result({"v", "w", "x", "y", "z"})}}), 0.0);
  EXPECT_DOUBLE_EQ(precision(one, {{"q", result({"a", "b", "x", "y", "z"})}}), 0.4);
}

TEST(Metrics, AtLeastOneAccuracyValues) {
  const std::set<std::string> rel = {"a", "b", "c", "d", "e"};
  const std::vector<RelevanceJudgment> four = {{"q1", rel, 0}, {"q2", rel, 0}, {"q3", rel, 0}, {"q4", rel, 0}};
  const ResultMap results = {{"q1", result({"a", "x", "y", "z", "w"})},
                             {"q2", result({"x", "b", "c", "z", "w"})},
                             {"q3", result({"x", "y", "z", "w", "e"})},
                             {"q4", result({"v", "w", "x", "y", "z"})}};
  EXPECT_DOUBLE_EQ(at_least_one_accuracy(four, results), 0.75);
  ResultMap misses;
  for (const auto& j : four) misses[j.query_id] = result({"v", "w", "x", "y", "z"});
  EXPECT_DOUBLE_EQ(at_least_one_accuracy(four, misses), 0.0);
}

TEST(Metrics, SingleRelevantHitCountsForTheQuery) {
  const std::vector<RelevanceJudgment> j = {{"broken mouse", {"mouse not working", "a", "b", "c", "d"}, 0}};
  const ResultMap r = {{"broken mouse", result({"mouse not working", "x1", "x2", "x3", "x4"})}};
  EXPECT_DOUBLE_EQ(at_least_one_accuracy(j, r), 1.0);
}

TEST(Metrics, MissingResultIsAnError) {
  const std::vector<RelevanceJudgment> j = {{"q", {"a"}, 0}};
  EXPECT_THROW(precision(j, {}), Error);
  EXPECT_THROW(at_least_one_accuracy(j, {}), Error);
}

TEST(Metrics, AlgebraAndPermutationInvariance) {
  std::mt19937_64 gen(8);
  for (int instance = 0; instance < 300; ++instance) {
    std::vector<RelevanceJudgment> judgments;
    ResultMap results, shuffled;
    const int queries = 1 + static_cast<int>(gen() % 20);
    for (int q = 0; q < queries; ++q) {
      std::vector<std::string> pool;
      for (int i = 0; i < 12; ++i) pool.push_back("p" + std::to_string(i));
      std::shuffle(pool.begin(), pool.end(), gen);
      RelevanceJudgment j{"q" + std::to_string(q), {pool.begin(), pool.begin() + 5}, 0};
      std::shuffle(pool.begin(), pool.end(), gen);
      RetrievalResult r;
      for (int i = 0; i < 5; ++i) r.items.push_back({pool[i], 0.0});
      auto rs = r;
      std::shuffle(rs.items.begin(), rs.items.end(), gen);
      results[j.query_id] = r;
      shuffled[j.query_id] = rs;
      judgments.push_back(std::move(j));
    }
    const double p = precision(judgments, results);
    const double a = at_least_one_accuracy(judgments, results);
    EXPECT_LE(p, a);
    EXPECT_LE(a, std::min(1.0, 5 * p) + 1e-12);
    EXPECT_DOUBLE_EQ(recall(judgments, results), p);
    EXPECT_EQ(precision(judgments, shuffled), p);
    EXPECT_EQ(at_least_one_accuracy(judgments, shuffled), a);
  }
}

TEST(Evaluate, OracleTechniqueIsPerfect) {
  auto [groups, corpus] = random_layout(3);
  std::map<std::string, std::pair<double, double>> where;
  for (const auto& g : groups) {
    for (const auto& p : g.positions) where[p.external_id] = {p.x, p.y};
  }
  const auto outcome = evaluate_technique(preloaded(std::make_shared<OracleTechnique>(where)), corpus, groups);
  EXPECT_DOUBLE_EQ(outcome.row.precision, 1.0);
  EXPECT_DOUBLE_EQ(outcome.row.accuracy_alo, 1.0);
  EXPECT_EQ(outcome.row.technique, "Oracle");
  EXPECT_EQ(outcome.subgroups.size(), 3u);
  EXPECT_GT(outcome.row.time_ms_per_100, 0.0);
}

TEST(Evaluate, RandomNeverRecommendsTheQueryOrOtherSubgroups) {
  auto [groups, corpus] = random_layout(5);
  struct Spy final : Technique {
    Spy() : Technique("Spy") {}
    std::string kind() const override { return "spy"; }
    Representation represent(const Document&) const override { return LabelSet{}; }
    Scorer scorer() const override { return Scorer::jaccard(); }
    RetrievalResult rank(const Document& q, const Representation&, std::span<const Candidate> c,
                         std::size_t) const override {
      EXPECT_EQ(c.size(), 99u);
      for (const auto& cand : c) {
        EXPECT_NE(cand.external_id, q.id);
        EXPECT_EQ(cand.external_id.substr(0, 3), q.id.substr(0, 3));
      }
      return RetrievalResult{{{c[0].external_id, 0.0}}};
    }
    nlohmann::ordered_json hyperparameters() const override { return nlohmann::ordered_json::object(); }
  };
  evaluate_technique(preloaded(std::make_shared<Spy>()), corpus, groups);
}

TEST(Evaluate, ErrorsNameTheQuery) {
  auto [groups, corpus] = random_layout(6, 10);
  struct Failing final : Technique {
    Failing() : Technique("Failing") {}
    std::string kind() const override { return "failing"; }
    Representation represent(const Document& d) const override {
      if (d.id == "G1-4") throw runtime_error("boom");
      return LabelSet{};
    }
    Scorer scorer() const override { return Scorer::jaccard(); }
    nlohmann::ordered_json hyperparameters() const override { return nlohmann::ordered_json::object(); }
  };
  try {
    evaluate_technique(preloaded(std::make_shared<Failing>()), corpus, groups);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("G1-4"), std::string::npos) << e.what();
  }
}

TEST(Evaluate, CardMissingFromCorpusIsAnError) {
  auto [groups, corpus] = random_layout(7, 10);
  groups[0].positions[0].external_id = "ghost";
  EXPECT_THROW(evaluate_technique(preloaded(std::make_shared<RandomTechnique>("r", 1)), corpus, groups), Error);
}
