#pragma once

// Ticket records, the JSONL corpus format, PII redaction and the train/eval split.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/regex.hpp>
#include <nlohmann/json.hpp>

#include "ticketsim/error.hpp"

namespace ticketsim {

/// An ISO-8601 timestamp that keeps its original spelling, so that a corpus
/// survives a load/save cycle byte for byte, and a parsed instant for ordering.
class Timestamp {
 public:
  using Instant = std::chrono::sys_time<std::chrono::microseconds>;

  /// Accepts `YYYY-MM-DD`, optionally followed by `T` or a space and
  /// `HH:MM[:SS[.frac]]`, optionally followed by `Z` or `+HH:MM`/`-HH:MM`.
  static std::optional<Timestamp> parse(std::string_view text) {
    Cursor c{text};
    int year = 0, month = 0, day = 0;
    if (!c.digits(4, year) || !c.lit('-') || !c.digits(2, month) || !c.lit('-') ||
        !c.digits(2, day)) {
      return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{year},
                                          std::chrono::month{static_cast<unsigned>(month)},
                                          std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok()) return std::nullopt;

    int hour = 0, minute = 0, second = 0;
    std::int64_t micros = 0;
    std::int64_t offset_minutes = 0;
    if (!c.done()) {
      if (!c.lit('T') && !c.lit(' ')) return std::nullopt;
      if (!c.digits(2, hour) || !c.lit(':') || !c.digits(2, minute)) return std::nullopt;
      if (c.lit(':')) {
        if (!c.digits(2, second)) return std::nullopt;
        if (c.lit('.')) {
          int ndigits = 0;
          while (!c.done() && c.is_digit()) {
            if (ndigits < 6) micros = micros * 10 + (c.next() - '0');
            else c.next();
            ++ndigits;
          }
          if (ndigits == 0) return std::nullopt;
          for (int i = ndigits; i < 6; ++i) micros *= 10;
        }
      }
      if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
      if (c.lit('Z')) {
      } else if (!c.done() && (c.peek() == '+' || c.peek() == '-')) {
        const int sign = c.next() == '-' ? -1 : 1;
        int oh = 0, om = 0;
        if (!c.digits(2, oh) || !c.lit(':') || !c.digits(2, om)) return std::nullopt;
        offset_minutes = sign * (oh * 60 + om);
      }
    }
    if (!c.done()) return std::nullopt;

    using namespace std::chrono;
    const auto instant = time_point_cast<microseconds>(sys_days{ymd}) + hours{hour} +
                         minutes{minute} + seconds{second} + microseconds{micros} -
                         minutes{offset_minutes};
    return Timestamp{std::string(text), instant};
  }

  const std::string& text() const noexcept { return text_; }
  Instant instant() const noexcept { return instant_; }

  friend bool operator==(const Timestamp& a, const Timestamp& b) { return a.text_ == b.text_; }

 private:
  struct Cursor {
    std::string_view s;
    std::size_t i = 0;
    bool done() const { return i >= s.size(); }
    char peek() const { return s[i]; }
    char next() { return s[i++]; }
    bool is_digit() const { return s[i] >= '0' && s[i] <= '9'; }
    bool lit(char ch) {
      if (done() || s[i] != ch) return false;
      ++i;
      return true;
    }
    bool digits(int n, int& out) {
      if (i + n > s.size()) return false;
      out = 0;
      for (int k = 0; k < n; ++k) {
        const char ch = s[i + k];
        if (ch < '0' || ch > '9') return false;
        out = out * 10 + (ch - '0');
      }
      i += n;
      return true;
    }
  };

  Timestamp(std::string text, Instant instant) : text_(std::move(text)), instant_(instant) {}

  std::string text_;
  Instant instant_{};
};

struct Ticket {
  std::string external_id;
  std::string title;
  std::string description;
  std::optional<std::string> category;
  std::optional<Timestamp> date_open;
  std::optional<Timestamp> date_close;
  std::optional<std::string> location;
  std::optional<std::string> solution;
  std::optional<std::string> analysts;

  friend bool operator==(const Ticket&, const Ticket&) = default;
};

/// The text every technique sees: title, one space, description.
inline std::string query_text(const Ticket& t) {
  std::string out;
  out.reserve(t.title.size() + 1 + t.description.size());
  out += t.title;
  out += ' ';
  out += t.description;
  return out;
}

namespace detail {

inline const std::vector<std::string>& ticket_keys() {
  static const std::vector<std::string> keys = {
      "external_id", "title",    "description", "category", "date_open",
      "date_close",  "location", "solution",    "analysts"};
  return keys;
}

inline std::optional<std::string> optional_text(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw data_error(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

inline std::optional<Timestamp> optional_time(const nlohmann::json& j, const char* key) {
  auto text = optional_text(j, key);
  if (!text) return std::nullopt;
  auto ts = Timestamp::parse(*text);
  if (!ts) throw data_error(std::string("field '") + key + "' is not an ISO-8601 timestamp: " + *text);
  return ts;
}

}  // namespace detail

inline Ticket ticket_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw data_error("ticket record must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    const auto& keys = detail::ticket_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw data_error("unknown ticket field '" + key + "'");
    }
  }
  Ticket t;
  for (const char* required : {"external_id", "title", "description"}) {
    auto value = detail::optional_text(j, required);
    if (!value) throw data_error(std::string("missing required field '") + required + "'");
  }
  t.external_id = j.at("external_id").get<std::string>();
  if (t.external_id.empty()) throw data_error("external_id must be non-empty");
  t.title = j.at("title").get<std::string>();
  t.description = j.at("description").get<std::string>();
  t.category = detail::optional_text(j, "category");
  t.date_open = detail::optional_time(j, "date_open");
  t.date_close = detail::optional_time(j, "date_close");
  t.location = detail::optional_text(j, "location");
  t.solution = detail::optional_text(j, "solution");
  t.analysts = detail::optional_text(j, "analysts");
  return t;
}

/// Absent optional fields are omitted rather than written as empty strings.
inline nlohmann::ordered_json ticket_to_json(const Ticket& t) {
  nlohmann::ordered_json j;
  j["external_id"] = t.external_id;
  j["title"] = t.title;
  j["description"] = t.description;
  if (t.category) j["category"] = *t.category;
  if (t.date_open) j["date_open"] = t.date_open->text();
  if (t.date_close) j["date_close"] = t.date_close->text();
  if (t.location) j["location"] = *t.location;
  if (t.solution) j["solution"] = *t.solution;
  if (t.analysts) j["analysts"] = *t.analysts;
  return j;
}

/// An ordered, id-unique collection of tickets. Immutable once built, so it
/// can be shared between reader threads.
class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<Ticket> tickets) {
    tickets_.reserve(tickets.size());
    for (auto& t : tickets) add(std::move(t));
  }

  void add(Ticket t) {
    if (t.external_id.empty()) throw data_error("external_id must be non-empty");
    const auto [it, inserted] = index_.emplace(t.external_id, tickets_.size());
    if (!inserted) throw data_error("duplicate external_id '" + t.external_id + "'");
    tickets_.push_back(std::move(t));
  }

  std::size_t size() const noexcept { return tickets_.size(); }
  bool empty() const noexcept { return tickets_.empty(); }
  const std::vector<Ticket>& tickets() const noexcept { return tickets_; }
  auto begin() const { return tickets_.begin(); }
  auto end() const { return tickets_.end(); }
  const Ticket& operator[](std::size_t i) const { return tickets_[i]; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  const Ticket* find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &tickets_[it->second];
  }

  const Ticket& at(const std::string& id) const {
    const auto* t = find(id);
    if (t == nullptr) throw not_found_error("unknown ticket id '" + id + "'");
    return *t;
  }

  std::size_t position(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw not_found_error("unknown ticket id '" + id + "'");
    return it->second;
  }

  /// Positions from oldest to newest: by date_open, tickets without one
  /// first, ingestion order breaking ties.
  std::vector<std::size_t> chronological_order() const {
    std::vector<std::size_t> order(tickets_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& da = tickets_[a].date_open;
      const auto& db = tickets_[b].date_open;
      if (!da || !db) return !da && db.has_value();
      return da->instant() < db->instant();
    });
    return order;
  }

  /// recency_rank[i] for ticket position i; 0 is the newest ticket.
  std::vector<std::size_t> recency_ranks() const {
    const auto order = chronological_order();
    std::vector<std::size_t> ranks(tickets_.size());
    for (std::size_t k = 0; k < order.size(); ++k) ranks[order[k]] = order.size() - 1 - k;
    return ranks;
  }

 private:
  std::vector<Ticket> tickets_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline Corpus parse_tickets(std::istream& in, const std::string& source = "<input>") {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      corpus.add(ticket_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw data_error(source + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const Error& e) {
      throw data_error(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

inline Corpus load_tickets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open ticket file '" + path + "'");
  return parse_tickets(in, path);
}

inline void write_tickets(std::ostream& out, const Corpus& corpus) {
  for (const auto& t : corpus) out << ticket_to_json(t).dump() << '\n';
}

inline void save_tickets(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw runtime_error("cannot write ticket file '" + path + "'");
  write_tickets(out, corpus);
  if (!out) throw runtime_error("write failed for '" + path + "'");
}

/// Partition by id. Ingestion order is preserved on both sides.
inline std::pair<Corpus, Corpus> split_train_eval(const Corpus& corpus,
                                                  const std::set<std::string>& eval_ids) {
  for (const auto& id : eval_ids) {
    if (!corpus.contains(id)) throw data_error("eval id '" + id + "' is not in the corpus");
  }
  Corpus train, eval;
  for (const auto& t : corpus) {
    if (eval_ids.count(t.external_id)) eval.add(t);
    else train.add(t);
  }
  return {std::move(train), std::move(eval)};
}

// --- Redaction -------------------------------------------------------------

struct RedactionRule {
  std::string pattern;
  std::string tag;
};

/// Compiled, ordered rule list. Patterns use Perl syntax; each rule is matched
/// leftmost-longest and rules are applied in list order.
class Redactor {
 public:
  Redactor() = default;

  explicit Redactor(std::vector<RedactionRule> rules) : rules_(std::move(rules)) {
    static const boost::regex tag_shape(R"(\[[A-Z_]+\])");
    compiled_.reserve(rules_.size());
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      const auto& rule = rules_[i];
      if (!boost::regex_match(rule.tag, tag_shape)) {
        throw usage_error("redaction rule " + std::to_string(i) + ": tag '" + rule.tag +
                          "' must look like [UPPER_CASE]");
      }
      try {
        compiled_.emplace_back(rule.pattern, boost::regex::perl);
      } catch (const boost::regex_error& e) {
        throw usage_error("redaction rule " + std::to_string(i) + ": invalid pattern '" +
                          rule.pattern + "': " + e.what());
      }
    }
  }

  std::string apply(std::string text) const {
    for (std::size_t i = 0; i < compiled_.size(); ++i) {
      text = boost::regex_replace(text, compiled_[i], rules_[i].tag,
                                  boost::match_posix | boost::regex_constants::format_literal);
    }
    return text;
  }

  Ticket apply(Ticket t) const {
    t.title = apply(std::move(t.title));
    t.description = apply(std::move(t.description));
    if (t.solution) t.solution = apply(std::move(*t.solution));
    if (t.analysts) t.analysts = apply(std::move(*t.analysts));
    return t;
  }

  const std::vector<RedactionRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<RedactionRule> rules_;
  std::vector<boost::regex> compiled_;
};

inline std::string redact(const std::string& text, const std::vector<RedactionRule>& rules) {
  return Redactor(rules).apply(text);
}

/// Rules file: a JSON array of {pattern, tag}.
inline std::vector<RedactionRule> load_redaction_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open redaction rules '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("redaction rules '" + path + "': " + e.what());
  }
  if (!j.is_array()) throw usage_error("redaction rules must be a JSON array");
  std::vector<RedactionRule> rules;
  for (const auto& r : j) {
    if (!r.is_object() || !r.contains("pattern") || !r.contains("tag") ||
        !r["pattern"].is_string() || !r["tag"].is_string()) {
      throw usage_error("each redaction rule needs string fields 'pattern' and 'tag'");
    }
    rules.push_back({r["pattern"].get<std::string>(), r["tag"].get<std::string>()});
  }
  (void)Redactor(rules);  // patterns must fail here, never at apply time
  return rules;
}

}  // namespace ticketsim
