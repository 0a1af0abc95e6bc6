#pragma once

// Text normalization shared by the lexical techniques: lowercase, replace a
// fixed set of punctuation with spaces, fold accents and compatibility
// characters, split on whitespace, drop stopwords.

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "ticketsim/error.hpp"
#include "ticketsim/hash.hpp"

namespace ticketsim {

inline constexpr std::u32string_view kDefaultStripChars = U"-.,!?_*";

struct NormalizationConfig {
  bool lowercase = true;
  std::u32string strip_chars{kDefaultStripChars};
  bool unicode_fold = true;
  bool remove_stopwords = false;
  std::set<std::string> stopword_list;

  void validate() const {
    if (remove_stopwords && stopword_list.empty()) {
      throw usage_error("stopword removal enabled with an empty stopword list");
    }
  }

  friend bool operator==(const NormalizationConfig&, const NormalizationConfig&) = default;
};

struct TokenSequence {
  std::vector<std::string> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  auto begin() const { return tokens.begin(); }
  auto end() const { return tokens.end(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

namespace detail {

inline bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

inline bool is_mark(UChar32 c) {
  const auto type = u_charType(c);
  return type == U_NON_SPACING_MARK || type == U_ENCLOSING_MARK || type == U_COMBINING_SPACING_MARK;
}

inline std::string normalize_ascii(std::string text, const NormalizationConfig& cfg) {
  for (char& c : text) {
    if (cfg.lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (cfg.strip_chars.find(static_cast<char32_t>(static_cast<unsigned char>(c))) !=
        std::u32string::npos) {
      c = ' ';
    }
  }
  return text;
}

inline icu::UnicodeString normalize_pass(const icu::UnicodeString& in, const NormalizationConfig& cfg) {
  icu::UnicodeString s = in;
  if (cfg.lowercase) s.toLower(icu::Locale::getRoot());

  icu::UnicodeString stripped;
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (cfg.strip_chars.find(static_cast<char32_t>(c)) != std::u32string::npos) stripped.append(UChar32{' '});
    else stripped.append(c);
  }
  s = std::move(stripped);

  if (cfg.unicode_fold) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfkd = icu::Normalizer2::getNFKDInstance(status);
    if (U_FAILURE(status)) throw runtime_error("ICU NFKD normalizer unavailable");
    icu::UnicodeString decomposed = nfkd->normalize(s, status);
    if (U_FAILURE(status)) throw runtime_error("ICU NFKD normalization failed");
    icu::UnicodeString folded;
    for (int32_t i = 0; i < decomposed.length();) {
      const UChar32 c = decomposed.char32At(i);
      i += U16_LENGTH(c);
      if (!is_mark(c)) folded.append(c);
    }
    s = std::move(folded);
  }
  return s;
}

}  // namespace detail

/// Lowercase, then strip characters to spaces, then NFKD-fold and drop
/// combining marks. Folding can expose characters the earlier steps act on
/// ("ℌ" folds to "H"), so the three steps repeat until the text is stable.
inline std::string normalize(std::string_view text, const NormalizationConfig& cfg) {
  if (detail::is_ascii(text)) return detail::normalize_ascii(std::string(text), cfg);

  icu::UnicodeString current = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  for (int round = 0; round < 4; ++round) {
    icu::UnicodeString next = detail::normalize_pass(current, cfg);
    if (next == current) break;
    current = std::move(next);
  }
  std::string out;
  current.toUTF8String(out);
  return out;
}

/// Splits on runs of whitespace (ASCII and Unicode White_Space).
inline TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t token_start = -1;
  for (int32_t i = 0; i < length;) {
    const int32_t at = i;
    UChar32 c = 0;
    U8_NEXT(bytes, i, length, c);
    const bool space = c >= 0 && u_isUWhiteSpace(c);
    if (space) {
      if (token_start >= 0) out.tokens.emplace_back(text.substr(token_start, at - token_start));
      token_start = -1;
    } else if (token_start < 0) {
      token_start = at;
    }
  }
  if (token_start >= 0) out.tokens.emplace_back(text.substr(token_start));
  return out;
}

inline TokenSequence remove_stopwords(const TokenSequence& ts, const std::set<std::string>& stopwords) {
  TokenSequence out;
  out.tokens.reserve(ts.size());
  std::copy_if(ts.begin(), ts.end(), std::back_inserter(out.tokens),
               [&](const std::string& t) { return stopwords.count(t) == 0; });
  return out;
}

/// normalize, tokenize, then filter stopwords when the config asks for it.
inline TokenSequence preprocess(std::string_view text, const NormalizationConfig& cfg) {
  auto tokens = tokenize(normalize(text, cfg));
  if (cfg.remove_stopwords) tokens = remove_stopwords(tokens, cfg.stopword_list);
  return tokens;
}

/// One term per line, `#` starts a comment, blank lines ignored.
inline std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open stopword file '" + path + "'");
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    words.insert(line.substr(first, last - first + 1));
  }
  return words;
}

// --- Serialization ---------------------------------------------------------

inline std::string to_utf8(std::u32string_view s) {
  icu::UnicodeString u;
  for (char32_t c : s) u.append(static_cast<UChar32>(c));
  std::string out;
  u.toUTF8String(out);
  return out;
}

inline std::u32string to_utf32(std::string_view s) {
  std::u32string out;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  for (int32_t i = 0; i < length;) {
    UChar32 c = 0;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) throw usage_error("invalid UTF-8 in character set");
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const NormalizationConfig& cfg) {
  nlohmann::ordered_json j;
  j["lowercase"] = cfg.lowercase;
  j["strip_chars"] = to_utf8(cfg.strip_chars);
  j["unicode_fold"] = cfg.unicode_fold;
  j["remove_stopwords"] = cfg.remove_stopwords;
  j["stopword_list"] = cfg.stopword_list;
  return j;
}

inline NormalizationConfig normalization_from_json(const nlohmann::json& j) {
  NormalizationConfig cfg;
  cfg.lowercase = j.at("lowercase").get<bool>();
  cfg.strip_chars = to_utf32(j.at("strip_chars").get<std::string>());
  cfg.unicode_fold = j.at("unicode_fold").get<bool>();
  cfg.remove_stopwords = j.at("remove_stopwords").get<bool>();
  cfg.stopword_list = j.at("stopword_list").get<std::set<std::string>>();
  cfg.validate();
  return cfg;
}

/// Fingerprint of the character-level steps only (no stopwords).
inline std::string base_fingerprint(const NormalizationConfig& cfg) {
  nlohmann::ordered_json j;
  j["lowercase"] = cfg.lowercase;
  j["strip_chars"] = to_utf8(cfg.strip_chars);
  j["unicode_fold"] = cfg.unicode_fold;
  return sha256_hex(j.dump()).substr(0, 16);
}

inline std::string stopword_fingerprint(const NormalizationConfig& cfg) {
  if (!cfg.remove_stopwords) return "none";
  return sha256_hex(nlohmann::json(cfg.stopword_list).dump()).substr(0, 16);
}

}  // namespace ticketsim
