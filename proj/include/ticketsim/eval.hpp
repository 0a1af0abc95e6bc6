#pragma once

// Benchmark harness: ground truth from the analysts' 2D card layout, set
// metrics over five recommendations, and per-technique timing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ticketsim/corpus.hpp"
#include "ticketsim/error.hpp"
#include "ticketsim/index.hpp"
#include "ticketsim/technique.hpp"
#include "ticketsim/techniques/word_vectors.hpp"

namespace ticketsim {

inline constexpr std::size_t kRelevantPerQuery = 5;
inline constexpr std::size_t kRecommendations = 5;
inline constexpr std::size_t kCardsPerSubgroup = 100;

struct CardPosition {
  std::string external_id;
  double x = 0.0;
  double y = 0.0;
  int subgroup = 0;
};

struct RelevanceJudgment {
  std::string query_id;
  std::set<std::string> relevant_ids;
  int subgroup = 0;
};

namespace detail {

/// Splits one CSV record; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// CSV with header `external_id,x,y`; every row belongs to `subgroup`.
inline std::vector<CardPosition> parse_positions(std::istream& in, int subgroup, const std::string& source = "<input>") {
  std::vector<CardPosition> out;
  std::string line;
  std::size_t row = 0;
  std::set<std::string> seen;
  bool header = false;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv(line);
    for (auto& f : fields) f = detail::trim(f);
    if (!header) {
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      if (fields != std::vector<std::string>{"external_id", "x", "y"}) {
        throw data_error(source + ":" + std::to_string(row) + ": expected header 'external_id,x,y'");
      }
      header = true;
      continue;
    }
    const auto where = source + ":" + std::to_string(row) + ": ";
    if (fields.size() != 3 || fields[0].empty()) throw data_error(where + "expected 3 fields");
    CardPosition p;
    p.external_id = fields[0];
    p.subgroup = subgroup;
    if (!detail::parse_number(fields[1], p.x) || !detail::parse_number(fields[2], p.y) || !std::isfinite(p.x) ||
        !std::isfinite(p.y)) {
      throw data_error(where + "coordinates must be numbers");
    }
    if (!seen.insert(p.external_id).second) throw data_error(where + "duplicate id '" + p.external_id + "'");
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<CardPosition> load_positions(const std::string& path, int subgroup = 0) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open positions file '" + path + "'");
  return parse_positions(in, subgroup, path);
}

struct Subgroup {
  std::string name;  // file stem
  std::vector<CardPosition> positions;
};

/// Every `*.csv` in `dir`, one subgroup per file, numbered in stem order.
/// A card id may appear in only one subgroup.
inline std::vector<Subgroup> load_positions_dir(const std::filesystem::path& dir,
                                                std::vector<std::string>* warnings = nullptr) {
  if (!std::filesystem::is_directory(dir)) throw data_error("positions directory '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.stem() < b.stem(); });
  std::vector<Subgroup> out;
  std::set<std::string> seen;
  for (const auto& file : files) {
    Subgroup g{file.stem().string(), load_positions(file.string(), static_cast<int>(out.size()))};
    for (const auto& p : g.positions) {
      if (!seen.insert(p.external_id).second) {
        throw data_error("card '" + p.external_id + "' appears in more than one subgroup");
      }
    }
    if (warnings && g.positions.size() != kCardsPerSubgroup) {
      warnings->push_back("subgroup '" + g.name + "' has " + std::to_string(g.positions.size()) + " cards, expected " +
                          std::to_string(kCardsPerSubgroup));
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// For each card, the five nearest other cards by Euclidean distance;
/// equal distances go to the smaller id.
inline std::vector<RelevanceJudgment> ground_truth(const std::vector<CardPosition>& positions) {
  if (positions.size() < kRelevantPerQuery + 1) {
    throw data_error("a subgroup needs at least " + std::to_string(kRelevantPerQuery + 1) + " cards, got " +
                     std::to_string(positions.size()));
  }
  std::vector<RelevanceJudgment> out;
  out.reserve(positions.size());
  std::vector<std::pair<double, const CardPosition*>> others;
  for (const auto& q : positions) {
    others.clear();
    for (const auto& p : positions) {
      if (&p == &q) continue;
      const double dx = p.x - q.x;
      const double dy = p.y - q.y;
      others.emplace_back(dx * dx + dy * dy, &p);
    }
    std::partial_sort(others.begin(), others.begin() + kRelevantPerQuery, others.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first < b.first;
                        return a.second->external_id < b.second->external_id;
                      });
    RelevanceJudgment j{q.external_id, {}, q.subgroup};
    for (std::size_t i = 0; i < kRelevantPerQuery; ++i) j.relevant_ids.insert(others[i].second->external_id);
    out.push_back(std::move(j));
  }
  return out;
}

// --- Metrics ---------------------------------------------------------------

using ResultMap = std::unordered_map<std::string, RetrievalResult>;

namespace detail {

inline std::size_t hits(const RelevanceJudgment& j, const RetrievalResult& r) {
  std::set<std::string> recommended;
  for (const auto& item : r.items) recommended.insert(item.external_id);
  std::size_t n = 0;
  for (const auto& id : recommended) n += j.relevant_ids.count(id);
  return n;
}

inline std::size_t recommended_count(const RetrievalResult& r) {
  std::set<std::string> recommended;
  for (const auto& item : r.items) recommended.insert(item.external_id);
  return recommended.size();
}

inline const RetrievalResult& result_for(const RelevanceJudgment& j, const ResultMap& results) {
  const auto it = results.find(j.query_id);
  if (it == results.end()) throw data_error("no recommendations for query '" + j.query_id + "'");
  return it->second;
}

template <typename PerQuery>
double mean_over(const std::vector<RelevanceJudgment>& judgments, const ResultMap& results, PerQuery per_query) {
  if (judgments.empty()) return 0.0;
  double total = 0.0;
  for (const auto& j : judgments) total += per_query(j, result_for(j, results));
  return total / static_cast<double>(judgments.size());
}

}  // namespace detail

/// Mean over queries of |relevant ∩ recommended| / |recommended|.
inline double precision(const std::vector<RelevanceJudgment>& judgments, const ResultMap& results) {
  return detail::mean_over(judgments, results, [](const auto& j, const auto& r) {
    const auto n = detail::recommended_count(r);
    return n == 0 ? 0.0 : static_cast<double>(detail::hits(j, r)) / static_cast<double>(n);
  });
}

/// Mean over queries of |relevant ∩ recommended| / |relevant|.
inline double recall(const std::vector<RelevanceJudgment>& judgments, const ResultMap& results) {
  return detail::mean_over(judgments, results, [](const auto& j, const auto& r) {
    return j.relevant_ids.empty() ? 0.0
                                  : static_cast<double>(detail::hits(j, r)) / static_cast<double>(j.relevant_ids.size());
  });
}

/// Fraction of queries with at least one relevant recommendation.
inline double at_least_one_accuracy(const std::vector<RelevanceJudgment>& judgments, const ResultMap& results) {
  return detail::mean_over(judgments, results,
                           [](const auto& j, const auto& r) { return detail::hits(j, r) > 0 ? 1.0 : 0.0; });
}

// --- Technique evaluation --------------------------------------------------

struct EvalReportRow {
  std::string technique;
  double accuracy_alo = 0.0;
  double precision = 0.0;
  double time_ms_per_100 = 0.0;
  std::optional<std::string> error;
};

struct SubgroupOutcome {
  std::string name;
  double accuracy_alo = 0.0;
  double precision = 0.0;
  double elapsed_ms = 0.0;
  std::size_t queries = 0;
};

struct EvalOutcome {
  EvalReportRow row;
  std::vector<SubgroupOutcome> subgroups;
};

/// Returns a ready technique. Called once per subgroup inside the timed
/// region, so loading a model from disk is part of the measurement.
using TechniqueLoader = std::function<std::shared_ptr<const Technique>()>;

inline TechniqueLoader artifact_loader(std::filesystem::path path) {
  return [path = std::move(path)] { return std::shared_ptr<const Technique>(load_technique(path)); };
}

inline TechniqueLoader preloaded(std::shared_ptr<const Technique> technique) {
  return [technique = std::move(technique)] { return technique; };
}

/// Each subgroup query is matched against its subgroup peers; metrics are
/// computed per subgroup and averaged uniformly. Timing is the mean
/// wall-clock per subgroup, scaled to 100 recommendations.
inline EvalOutcome evaluate_technique(const TechniqueLoader& load, const Corpus& eval_corpus,
                                      const std::vector<Subgroup>& subgroups, std::size_t k = kRecommendations) {
  if (subgroups.empty()) throw data_error("evaluation needs at least one subgroup");
  const auto ranks = eval_corpus.recency_ranks();
  EvalOutcome outcome;
  double acc_sum = 0.0, prec_sum = 0.0, time_sum = 0.0;
  for (const auto& group : subgroups) {
    const auto judgments = ground_truth(group.positions);
    for (const auto& p : group.positions) {
      if (!eval_corpus.contains(p.external_id)) {
        throw data_error("card '" + p.external_id + "' of subgroup '" + group.name + "' is not in the eval corpus");
      }
    }

    ResultMap results;
    std::string name;
    const auto start = std::chrono::steady_clock::now();
    {
      const auto technique = load();
      name = technique->name();
      std::vector<Document> docs;
      std::vector<Candidate> all;
      docs.reserve(group.positions.size());
      for (const auto& p : group.positions) {
        const auto pos = eval_corpus.position(p.external_id);
        docs.push_back(document_of(eval_corpus[pos]));
        try {
          all.push_back({p.external_id, std::make_shared<const Representation>(technique->represent(docs.back())),
                         ranks[pos]});
        } catch (const Error& e) {
          throw Error(e.kind(), "query '" + p.external_id + "': " + e.what());
        }
      }
      std::vector<Candidate> peers;
      peers.reserve(all.size());
      for (std::size_t q = 0; q < all.size(); ++q) {
        peers.clear();
        for (std::size_t c = 0; c < all.size(); ++c) {
          if (c != q) peers.push_back(all[c]);
        }
        try {
          results[all[q].external_id] = technique->rank(docs[q], *all[q].representation, peers, k);
        } catch (const Error& e) {
          throw Error(e.kind(), "query '" + all[q].external_id + "': " + e.what());
        }
      }
    }
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    SubgroupOutcome so;
    so.name = group.name;
    so.accuracy_alo = at_least_one_accuracy(judgments, results);
    so.precision = precision(judgments, results);
    so.elapsed_ms = elapsed;
    so.queries = judgments.size();
    acc_sum += so.accuracy_alo;
    prec_sum += so.precision;
    time_sum += elapsed * 100.0 / static_cast<double>(so.queries);
    outcome.row.technique = name;
    outcome.subgroups.push_back(std::move(so));
  }
  const auto n = static_cast<double>(subgroups.size());
  outcome.row.accuracy_alo = acc_sum / n;
  outcome.row.precision = prec_sum / n;
  outcome.row.time_ms_per_100 = time_sum / n;
  return outcome;
}

inline EvalReportRow evaluate_technique_row(const TechniqueLoader& load, const Corpus& eval_corpus,
                                            const std::vector<Subgroup>& subgroups, std::size_t k = kRecommendations) {
  return evaluate_technique(load, eval_corpus, subgroups, k).row;
}

}  // namespace ticketsim
