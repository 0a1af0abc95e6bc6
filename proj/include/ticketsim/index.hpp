#pragma once

// Similarity scoring, exact top-k selection and the recency-ordered
// representation store used by the service.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ticketsim/error.hpp"
#include "ticketsim/techniques/bm25.hpp"
#include "ticketsim/techniques/representation.hpp"

namespace ticketsim {

/// A·B / (|A||B|); 0 when either vector has zero norm.
inline double cosine(const DocumentVector& a, const DocumentVector& b) {
  if (a.dim() != b.dim()) {
    throw contract_error("cosine of vectors with dimensions " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

enum class ScorerKind { cosine, jaccard, bm25 };

inline const char* to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::cosine: return "cosine";
    case ScorerKind::jaccard: return "jaccard";
    case ScorerKind::bm25: return "bm25";
  }
  return "?";
}

/// Scores a query representation against a candidate representation. BM25
/// needs the corpus statistics of the index it was fitted on.
class Scorer {
 public:
  static Scorer cosine() { return Scorer(ScorerKind::cosine, nullptr); }
  static Scorer jaccard() { return Scorer(ScorerKind::jaccard, nullptr); }
  static Scorer bm25(std::shared_ptr<const Bm25Index> index) {
    if (!index) throw usage_error("BM25 scorer needs an index");
    return Scorer(ScorerKind::bm25, std::move(index));
  }

  ScorerKind kind() const noexcept { return kind_; }

  double operator()(const Representation& query, const Representation& doc) const {
    switch (kind_) {
      case ScorerKind::cosine: return ticketsim::cosine(as<DocumentVector>(query), as<DocumentVector>(doc));
      case ScorerKind::jaccard: return ticketsim::jaccard(as<LabelSet>(query), as<LabelSet>(doc));
      case ScorerKind::bm25: return bm25_->score(as<TermBag>(query), as<TermBag>(doc));
    }
    return 0.0;
  }

 private:
  Scorer(ScorerKind kind, std::shared_ptr<const Bm25Index> index) : kind_(kind), bm25_(std::move(index)) {}

  template <typename T>
  const T& as(const Representation& r) const {
    const auto* value = std::get_if<T>(&r);
    if (value == nullptr) {
      throw usage_error(std::string("scorer '") + to_string(kind_) + "' cannot score a '" +
                        representation_kind(r) + "' representation");
    }
    return *value;
  }

  ScorerKind kind_;
  std::shared_ptr<const Bm25Index> bm25_;
};

struct Candidate {
  std::string external_id;
  std::shared_ptr<const Representation> representation;
  std::size_t recency_rank = 0;  // 0 = newest
};

struct ScoredCandidate {
  std::string external_id;
  double score = 0.0;

  friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

struct RetrievalResult {
  std::vector<ScoredCandidate> items;

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& c : items) out.push_back(c.external_id);
    return out;
  }

  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

/// The k best candidates by descending score; equal scores go to the more
/// recent candidate, then to the smaller id.
inline RetrievalResult top_k(const Representation& query, std::span<const Candidate> candidates, std::size_t k,
                             const Scorer& scorer) {
  if (k == 0) throw usage_error("top_k needs k >= 1");
  struct Scored {
    double score;
    const Candidate* candidate;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (!c.representation) throw contract_error("candidate '" + c.external_id + "' has no representation");
    const double s = scorer(query, *c.representation);
    if (!std::isfinite(s)) throw contract_error("non-finite score for candidate '" + c.external_id + "'");
    scored.push_back({s, &c});
  }
  const auto better = [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.candidate->recency_rank != b.candidate->recency_rank) {
      return a.candidate->recency_rank < b.candidate->recency_rank;
    }
    return a.candidate->external_id < b.candidate->external_id;
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
  RetrievalResult result;
  result.items.reserve(take);
  for (std::size_t i = 0; i < take; ++i) result.items.push_back({scored[i].candidate->external_id, scored[i].score});
  return result;
}

struct IndexEntry {
  std::string external_id;
  std::shared_ptr<const Representation> representation;
};

/// Append-only store of representations in insertion order; the newest
/// entry has recency rank 0. Readers share a lock, insertion is exclusive,
/// so no reader ever sees a half-inserted entry.
class RepresentationIndex {
 public:
  void insert(std::string id, Representation representation) {
    auto shared = std::make_shared<const Representation>(std::move(representation));
    std::unique_lock lock(mutex_);
    if (!entries_.empty() && entries_.front().representation->index() != shared->index()) {
      throw contract_error("index holds '" + std::string(representation_kind(*entries_.front().representation)) +
                           "' representations, got '" + representation_kind(*shared) + "'");
    }
    if (!positions_.emplace(id, entries_.size()).second) {
      throw data_error("duplicate index entry '" + id + "'");
    }
    entries_.push_back({std::move(id), std::move(shared)});
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  bool contains(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return positions_.count(id) != 0;
  }

  std::shared_ptr<const Representation> find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto it = positions_.find(id);
    return it == positions_.end() ? nullptr : entries_[it->second].representation;
  }

  /// The `window` most recent entries other than `exclude`, newest first.
  std::vector<Candidate> recent_candidates(std::size_t window, const std::string& exclude = {}) const {
    if (window == 0) throw usage_error("candidate window must be >= 1");
    std::shared_lock lock(mutex_);
    std::vector<Candidate> out;
    out.reserve(std::min(window, entries_.size()));
    const std::size_t n = entries_.size();
    for (std::size_t rank = 0; rank < n && out.size() < window; ++rank) {
      const auto& e = entries_[n - 1 - rank];
      if (e.external_id == exclude) continue;
      out.push_back({e.external_id, e.representation, rank});
    }
    return out;
  }

  /// Entries from oldest to newest.
  std::vector<IndexEntry> entries() const {
    std::shared_lock lock(mutex_);
    return entries_;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::vector<IndexEntry> entries_;
  std::unordered_map<std::string, std::size_t> positions_;
};

// --- Snapshot --------------------------------------------------------------

/// `<dir>/snapshot.jsonl` holds one representation record per entry, oldest
/// first, after a {provider, dim, kind} header; `<dir>/manifest.json` records
/// the technique, its fingerprint and the recency order.
struct SnapshotInfo {
  std::string technique;
  std::string fingerprint;
};

inline void write_snapshot(const std::filesystem::path& dir, const SnapshotInfo& info,
                           const std::vector<IndexEntry>& entries) {
  std::filesystem::create_directories(dir);
  const auto tmp = dir / "snapshot.jsonl.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw runtime_error("cannot write snapshot in '" + dir.string() + "'");
    nlohmann::ordered_json header;
    header["provider"] = info.technique;
    std::size_t dim = 0;
    std::string kind = "vector";
    if (!entries.empty()) {
      kind = representation_kind(*entries.front().representation);
      if (const auto* v = std::get_if<DocumentVector>(entries.front().representation.get())) dim = v->dim();
    }
    header["dim"] = dim;
    header["kind"] = kind;
    out << header.dump() << '\n';
    for (const auto& e : entries) out << representation_to_json(e.external_id, *e.representation).dump() << '\n';
    if (!out) throw runtime_error("snapshot write failed");
  }
  std::filesystem::rename(tmp, dir / "snapshot.jsonl");

  nlohmann::ordered_json manifest;
  manifest["technique"] = info.technique;
  manifest["fingerprint"] = info.fingerprint;
  manifest["count"] = entries.size();
  auto& order = manifest["order"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) order.push_back(e.external_id);
  const auto mtmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(mtmp, std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw runtime_error("manifest write failed");
  }
  std::filesystem::rename(mtmp, dir / "manifest.json");
}

struct Snapshot {
  SnapshotInfo info;
  std::vector<std::pair<std::string, Representation>> entries;  // oldest first
};

inline Snapshot read_snapshot(const std::filesystem::path& dir) {
  Snapshot snap;
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw not_found_error("no snapshot manifest in '" + dir.string() + "'");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("snapshot manifest: " + std::string(e.what()));
  }
  snap.info.technique = manifest.at("technique").get<std::string>();
  snap.info.fingerprint = manifest.at("fingerprint").get<std::string>();
  const auto order = manifest.at("order").get<std::vector<std::string>>();

  std::ifstream in(dir / "snapshot.jsonl");
  if (!in) throw data_error("snapshot file missing in '" + dir.string() + "'");
  std::string line;
  std::getline(in, line);  // header
  std::unordered_map<std::string, Representation> by_id;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto [id, rep] = representation_from_json(nlohmann::json::parse(line));
    by_id.emplace(std::move(id), std::move(rep));
  }
  if (by_id.size() != order.size()) throw data_error("snapshot and manifest disagree on entry count");
  for (const auto& id : order) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw data_error("manifest id '" + id + "' missing from snapshot");
    snap.entries.emplace_back(id, std::move(it->second));
  }
  return snap;
}

}  // namespace ticketsim
