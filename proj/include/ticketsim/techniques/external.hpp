#pragma once

// Embeddings produced outside this process: either a precomputed per-ticket
// vector file, or a remote HTTP provider whose answers are cached on disk
// under the SHA-256 of (provider name, text).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ticketsim/error.hpp"
#include "ticketsim/hash.hpp"
#include "ticketsim/techniques/representation.hpp"

namespace ticketsim {

struct VectorFileSource {
  std::string path;
};

struct RemoteSource {
  std::string url;  // e.g. http://127.0.0.1:8088/embed
  int timeout_ms = 10000;
  int retries = 2;
  std::string cache_dir;  // empty disables the persistent cache
};

struct EmbeddingProviderSpec {
  std::string name;
  std::size_t dim = 0;
  std::variant<VectorFileSource, RemoteSource> source;
};

// --- Precomputed vector files ----------------------------------------------

/// JSONL: a header record {"provider": name, "dim": n}, then one
/// {"external_id": id, "values": [...]} record per ticket.
struct PrecomputedEmbeddings {
  std::string provider;
  std::size_t dim = 0;
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<double>> vectors;

  void add(const std::string& id, std::vector<double> values) {
    if (values.size() != dim) {
      throw contract_error("embedding for '" + id + "' has dimension " + std::to_string(values.size()) +
                           ", expected " + std::to_string(dim));
    }
    if (!vectors.emplace(id, std::move(values)).second) {
      throw data_error("duplicate embedding for '" + id + "'");
    }
    order.push_back(id);
  }
};

inline PrecomputedEmbeddings parse_precomputed_embeddings(std::istream& in, const std::string& source = "<input>") {
  PrecomputedEmbeddings out;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error(where + "malformed JSON: " + e.what());
    }
    try {
      if (!have_header) {
        out.provider = j.at("provider").get<std::string>();
        out.dim = j.at("dim").get<std::size_t>();
        if (out.dim == 0) throw data_error("embedding dimension must be positive");
        have_header = true;
        continue;
      }
      out.add(j.at("external_id").get<std::string>(), j.at("values").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      throw data_error(where + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
  }
  if (!have_header) throw data_error(source + ": missing header record {provider, dim}");
  return out;
}

inline PrecomputedEmbeddings load_precomputed_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open embedding file '" + path + "'");
  return parse_precomputed_embeddings(in, path);
}

inline void write_precomputed_embeddings(std::ostream& out, const PrecomputedEmbeddings& e) {
  nlohmann::ordered_json header;
  header["provider"] = e.provider;
  header["dim"] = e.dim;
  out << header.dump() << '\n';
  for (const auto& id : e.order) {
    nlohmann::ordered_json j;
    j["external_id"] = id;
    j["values"] = e.vectors.at(id);
    out << j.dump() << '\n';
  }
}

// --- Persistent cache ------------------------------------------------------

/// Append-only JSONL cache of {key, values}. Concurrent readers, serialized writers.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      try {
        const auto j = nlohmann::json::parse(line);
        entries_[j.at("key").get<std::string>()] = j.at("values").get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        // A torn final line from an interrupted write; the entry is refetched.
      }
    }
  }

  std::optional<std::vector<double>> get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(const std::string& key, const std::vector<double>& values) {
    std::unique_lock lock(mutex_);
    if (entries_.count(key)) return;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw runtime_error("cannot append to embedding cache '" + path_.string() + "'");
    nlohmann::ordered_json j;
    j["key"] = key;
    j["values"] = values;
    out << j.dump() << '\n';
    out.flush();
    entries_.emplace(key, values);
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::vector<double>> entries_;
};

// --- Provider client -------------------------------------------------------

namespace detail {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw usage_error("provider URL needs a scheme: '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

class ExternalEmbedder {
 public:
  explicit ExternalEmbedder(EmbeddingProviderSpec spec) : spec_(std::move(spec)) {
    if (spec_.dim == 0) throw usage_error("embedding provider '" + spec_.name + "' must declare a dimension");
    if (const auto* file = std::get_if<VectorFileSource>(&spec_.source)) {
      precomputed_ = std::make_shared<PrecomputedEmbeddings>(load_precomputed_embeddings(file->path));
      if (precomputed_->dim != spec_.dim) {
        throw contract_error("embedding file '" + file->path + "' declares dim " +
                             std::to_string(precomputed_->dim) + ", provider '" + spec_.name + "' expects " +
                             std::to_string(spec_.dim));
      }
    } else {
      const auto& remote = std::get<RemoteSource>(spec_.source);
      detail::split_url(remote.url);
      if (!remote.cache_dir.empty()) {
        cache_ = std::make_shared<EmbeddingCache>(std::filesystem::path(remote.cache_dir) /
                                                  (sha256_hex(spec_.name).substr(0, 16) + ".jsonl"));
      }
    }
  }

  const EmbeddingProviderSpec& spec() const noexcept { return spec_; }

  std::string cache_key(std::string_view text) const {
    std::string material = spec_.name;
    material.push_back('\0');
    material.append(text);
    return sha256_hex(material);
  }

  /// Vector-file providers are keyed by ticket id, remote providers by text.
  DocumentVector embed(const std::string& ticket_id, std::string_view text) const {
    if (precomputed_) {
      const auto it = precomputed_->vectors.find(ticket_id);
      if (it == precomputed_->vectors.end()) {
        throw not_found_error("provider '" + spec_.name + "' has no vector for ticket '" + ticket_id + "'");
      }
      return DocumentVector(it->second);
    }
    const auto key = cache_key(text);
    if (cache_) {
      if (auto hit = cache_->get(key)) return DocumentVector(std::move(*hit));
    }
    auto values = fetch(text);
    if (cache_) cache_->put(key, values);
    return DocumentVector(std::move(values));
  }

 private:
  std::vector<double> fetch(std::string_view text) const {
    const auto& remote = std::get<RemoteSource>(spec_.source);
    const auto url = detail::split_url(remote.url);
    const nlohmann::json body = {{"text", std::string(text)}};
    std::string last_error;
    for (int attempt = 0; attempt <= std::max(0, remote.retries); ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
      httplib::Client client(url.base);
      client.set_connection_timeout(std::chrono::milliseconds(remote.timeout_ms));
      client.set_read_timeout(std::chrono::milliseconds(remote.timeout_ms));
      client.set_write_timeout(std::chrono::milliseconds(remote.timeout_ms));
      const auto res = client.Post(url.path, body.dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw contract_error("provider '" + spec_.name + "' answered HTTP " + std::to_string(res->status));
      }
      std::vector<double> values;
      try {
        values = nlohmann::json::parse(res->body).at("values").get<std::vector<double>>();
      } catch (const nlohmann::json::exception& e) {
        throw contract_error("provider '" + spec_.name + "' sent an unreadable response: " + e.what());
      }
      if (values.size() != spec_.dim) {
        throw contract_error("provider '" + spec_.name + "' returned dimension " + std::to_string(values.size()) +
                             ", declared " + std::to_string(spec_.dim));
      }
      return values;
    }
    throw retryable_error("provider '" + spec_.name + "' unavailable: " + last_error);
  }

  EmbeddingProviderSpec spec_;
  std::shared_ptr<const PrecomputedEmbeddings> precomputed_;
  std::shared_ptr<EmbeddingCache> cache_;
};

inline DocumentVector external_embed(const ExternalEmbedder& embedder, const std::string& ticket_id,
                                     std::string_view text) {
  return embedder.embed(ticket_id, text);
}

}  // namespace ticketsim
