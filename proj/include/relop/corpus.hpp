#pragma once

// Post ingestion: JSON-Lines parsing, keyword and client filters, the
// rule-based tokenizer, state inference from a gazetteer, and vocabulary
// construction.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "relop/common.hpp"
#include "relop/states.hpp"

namespace relop {

struct Post {
  std::string id;
  std::string text;
  std::string user_id;
  std::string client;
  std::optional<std::string> geo_field;
  std::optional<std::string> profile_location;
  std::int64_t timestamp = 0;
};

enum class TokenKind { word, hashtag, mention, url };

struct Token {
  std::string surface;
  TokenKind kind = TokenKind::word;
  bool operator==(const Token&) const = default;
};

struct ParseResult {
  std::vector<Post> posts;
  std::size_t skipped = 0;
  std::vector<std::size_t> skipped_lines;  // 1-based
};

namespace detail {

inline std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

inline std::string required_string(const nlohmann::json& j, const char* key) {
  auto v = optional_string(j, key);
  if (!v) throw DataError(std::string("missing field '") + key + "'");
  return *v;
}

}  // namespace detail

/// Parse one JSON-Lines record. Throws DataError on schema violations.
inline Post parse_post_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record is not an object");
  Post p;
  p.id = detail::required_string(j, "id");
  p.text = detail::required_string(j, "text");
  p.user_id = detail::required_string(j, "user_id");
  p.client = detail::optional_string(j, "client").value_or("");
  p.geo_field = detail::optional_string(j, "geo");
  p.profile_location = detail::optional_string(j, "profile_location");
  if (auto it = j.find("ts"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw DataError("field 'ts' is not an integer");
    p.timestamp = it->get<std::int64_t>();
  }
  if (p.id.empty()) throw DataError("empty id");
  if (trim(p.text).empty()) throw DataError("empty text");
  return p;
}

/// Reads line-delimited records. Malformed lines are counted and skipped;
/// blank lines are ignored.
inline ParseResult parse_posts(std::istream& in) {
  if (!in) throw DataError("unreadable input stream");
  ParseResult out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.posts.push_back(parse_post_line(line));
    } catch (const DataError&) {
      ++out.skipped;
      out.skipped_lines.push_back(lineno);
    }
  }
  if (in.bad()) throw DataError("I/O error while reading posts");
  return out;
}

inline std::string to_json_line(const Post& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["text"] = p.text;
  j["user_id"] = p.user_id;
  j["client"] = p.client;
  j["geo"] = p.geo_field ? nlohmann::ordered_json(*p.geo_field) : nlohmann::ordered_json(nullptr);
  j["profile_location"] = p.profile_location ? nlohmann::ordered_json(*p.profile_location)
                                             : nlohmann::ordered_json(nullptr);
  j["ts"] = p.timestamp;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace detail {

inline bool is_ascii_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u) != 0;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

inline bool looks_like_url(std::string_view piece) {
  // allow a leading bracket or quote before the scheme
  std::size_t b = 0;
  while (b < piece.size() && is_ascii_punct(piece[b])) ++b;
  auto rest = piece.substr(b);
  return starts_with_ci(rest, "http://") || starts_with_ci(rest, "https://") ||
         starts_with_ci(rest, "www.");
}

}  // namespace detail

/// Whitespace split, lowercase, strip surrounding punctuation (a leading '#'
/// or '@' is kept as the token prefix).
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  for (const auto& piece : split_ws(text)) {
    if (detail::looks_like_url(piece)) {
      out.push_back({to_lower_ascii(piece), TokenKind::url});
      continue;
    }
    std::size_t b = 0, e = piece.size();
    while (b < e && detail::is_ascii_punct(piece[b]) && piece[b] != '#' && piece[b] != '@') ++b;
    char prefix = 0;
    if (b < e && (piece[b] == '#' || piece[b] == '@')) {
      prefix = piece[b];
      ++b;
      // "##tag" collapses to "#tag"
      while (b < e && piece[b] == prefix) ++b;
    }
    while (e > b && detail::is_ascii_punct(piece[e - 1])) --e;
    if (b == e) continue;
    std::string body = to_lower_ascii(std::string_view(piece).substr(b, e - b));
    if (prefix == '#') {
      out.push_back({"#" + body, TokenKind::hashtag});
    } else if (prefix == '@') {
      out.push_back({"@" + body, TokenKind::mention});
    } else {
      out.push_back({std::move(body), TokenKind::word});
    }
  }
  return out;
}

/// Tokens that enter downstream streams: mentions and URLs removed.
inline std::vector<Token> content_tokens(const std::vector<Token>& tokens) {
  std::vector<Token> out;
  for (const auto& t : tokens)
    if (t.kind == TokenKind::word || t.kind == TokenKind::hashtag) out.push_back(t);
  return out;
}

inline std::vector<std::string> hashtags_of(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (t.kind == TokenKind::hashtag) out.push_back(t.surface);
  return out;
}

// ---------------------------------------------------------------------------
// Filters

inline const std::vector<std::string>& default_keywords_a() {
  static const std::vector<std::string> kw{"trump", "realdonaldtrump", "donaldtrump"};
  return kw;
}

inline const std::vector<std::string>& default_keywords_b() {
  static const std::vector<std::string> kw{"hillary", "clinton", "hillaryclinton"};
  return kw;
}

inline const std::set<std::string>& default_official_clients() {
  static const std::set<std::string> clients{
      "Twitter for iPhone", "Twitter for Android", "Twitter Web Client",
      "Twitter for iPad",   "TweetDeck",           "Twitter Lite",
      "Twitter for Mac",    "Twitter Web App",     "Mobile Web (M5)",
      "Twitter for Windows Phone"};
  return clients;
}

/// Word tokens match exactly, mentions match on the handle, hashtags match
/// when they contain the keyword.
inline bool keyword_hit(const Token& t, std::string_view keyword) {
  switch (t.kind) {
    case TokenKind::word: return t.surface == keyword;
    case TokenKind::mention: return std::string_view(t.surface).substr(1) == keyword;
    case TokenKind::hashtag: return t.surface.find(keyword) != std::string::npos;
    case TokenKind::url: return false;
  }
  return false;
}

inline bool mentions_any(const std::vector<Token>& tokens, const std::vector<std::string>& keywords) {
  for (const auto& t : tokens)
    for (const auto& k : keywords)
      if (keyword_hit(t, k)) return true;
  return false;
}

inline std::vector<Post> filter_relevant(const std::vector<Post>& posts,
                                         const std::vector<std::string>& group_a,
                                         const std::vector<std::string>& group_b) {
  if (group_a.empty() || group_b.empty())
    throw std::invalid_argument("filter_relevant: keyword groups must be nonempty");
  std::vector<Post> out;
  for (const auto& p : posts) {
    auto toks = tokenize(p.text);
    if (mentions_any(toks, group_a) && mentions_any(toks, group_b)) out.push_back(p);
  }
  return out;
}

struct BotFilterResult {
  std::vector<Post> posts;
  double retained_fraction = 1.0;
};

inline BotFilterResult filter_bots(const std::vector<Post>& posts,
                                   const std::set<std::string>& official_clients) {
  if (official_clients.empty())
    throw std::invalid_argument("filter_bots: official client set must be nonempty");
  BotFilterResult out;
  for (const auto& p : posts)
    if (official_clients.count(p.client)) out.posts.push_back(p);
  out.retained_fraction =
      posts.empty() ? 1.0 : static_cast<double>(out.posts.size()) / static_cast<double>(posts.size());
  return out;
}

// ---------------------------------------------------------------------------
// State inference

/// Lowercased place name -> state code. Loaded from a `name,state_code` CSV.
class Gazetteer {
public:
  Gazetteer() = default;

  /// Full state names and postal codes for all 51 regions.
  static Gazetteer builtin() {
    Gazetteer g;
    for (const auto& s : kStates) {
      g.add(std::string(s.name), std::string(s.code));
      g.add(std::string(s.code), std::string(s.code));
    }
    return g;
  }

  static Gazetteer from_csv(std::istream& in) {
    Gazetteer g;
    std::string line;
    bool header = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (header) {
        header = false;
        continue;
      }
      if (trim(line).empty()) continue;
      auto comma = line.rfind(',');
      if (comma == std::string::npos)
        throw DataError("gazetteer line " + std::to_string(lineno) + ": expected name,state_code");
      auto code = trim(line.substr(comma + 1));
      if (!is_state_code(code))
        throw DataError("gazetteer line " + std::to_string(lineno) + ": unknown state code " + code);
      g.add(line.substr(0, comma), code);
    }
    return g;
  }

  void add(const std::string& name, const std::string& code) {
    entries_[normalize(name)] = StateCode(code);
    auto words = split_ws(normalize(name));
    max_words_ = std::max(max_words_, words.size());
  }

  std::optional<StateCode> lookup(std::string_view name) const {
    auto it = entries_.find(normalize(name));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t max_words() const { return max_words_; }
  std::size_t size() const { return entries_.size(); }

  static std::string normalize(std::string_view s) {
    std::string lower = to_lower_ascii(trim(s));
    std::string out;
    bool space = false;
    for (char c : lower) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        space = true;
        continue;
      }
      if (space && !out.empty()) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
    return out;
  }

private:
  std::map<std::string, StateCode> entries_;
  std::size_t max_words_ = 1;
};

namespace detail {

// Whole string, then comma-separated parts from right to left.
inline std::optional<StateCode> resolve_location_field(std::string_view field, const Gazetteer& gaz) {
  if (auto s = gaz.lookup(field)) return s;
  auto parts = split(field, ',');
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    std::string part = trim(*it);
    while (!part.empty() && is_ascii_punct(part.back())) part.pop_back();
    if (part.empty()) continue;
    if (auto s = gaz.lookup(part)) return s;
  }
  return std::nullopt;
}

// Longest whole-token n-gram match, left to right. Two-letter entries only
// match when written in upper case so that words like "in" or "me" are not
// read as postal codes.
inline std::optional<StateCode> resolve_text_mention(std::string_view text, const Gazetteer& gaz) {
  std::vector<std::string> raw, original;
  for (const auto& piece : split_ws(text)) {
    auto toks = tokenize(piece);
    if (toks.size() != 1 || toks[0].kind != TokenKind::word) continue;
    std::size_t b = 0, e = piece.size();
    while (b < e && is_ascii_punct(piece[b])) ++b;
    while (e > b && is_ascii_punct(piece[e - 1])) --e;
    raw.push_back(toks[0].surface);
    original.push_back(piece.substr(b, e - b));
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t len = std::min(gaz.max_words(), raw.size() - i); len >= 1; --len) {
      std::string cand = raw[i];
      for (std::size_t k = 1; k < len; ++k) cand += " " + raw[i + k];
      auto hit = gaz.lookup(cand);
      if (!hit) continue;
      if (len == 1 && cand.size() == 2) {
        const auto& o = original[i];
        if (!(std::isupper(static_cast<unsigned char>(o[0])) &&
              std::isupper(static_cast<unsigned char>(o[1]))))
          continue;
      }
      return hit;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Priority: geo field, then profile location, then a place mentioned in the text.
inline std::optional<StateCode> infer_state(const Post& post, const Gazetteer& gaz) {
  if (post.geo_field)
    if (auto s = detail::resolve_location_field(*post.geo_field, gaz)) return s;
  if (post.profile_location)
    if (auto s = detail::resolve_location_field(*post.profile_location, gaz)) return s;
  return detail::resolve_text_mention(post.text, gaz);
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() {
    tokens_ = {kPadToken, kUnkToken};
    counts_ = {0, 0};
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  int index(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  const std::string& token(int idx) const { return tokens_.at(static_cast<std::size_t>(idx)); }
  std::int64_t count(int idx) const { return counts_.at(static_cast<std::size_t>(idx)); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(index(t));
    return out;
  }

  /// TSV `index<TAB>token<TAB>count`, one row per entry including specials.
  std::string to_tsv() const {
    std::string out;
    for (std::size_t i = 0; i < tokens_.size(); ++i)
      out += std::to_string(i) + "\t" + tokens_[i] + "\t" + std::to_string(counts_[i]) + "\n";
    return out;
  }

  static Vocabulary from_tsv(std::istream& in) {
    Vocabulary v;
    v.tokens_.clear();
    v.counts_.clear();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 3) throw DataError("vocabulary: expected 3 columns");
      if (parse_int(cols[0]) != static_cast<long long>(v.tokens_.size()))
        throw DataError("vocabulary: indices must be dense and ordered");
      v.push(cols[1], parse_int(cols[2]));
    }
    if (v.tokens_.size() < 2 || v.tokens_[0] != kPadToken || v.tokens_[1] != kUnkToken)
      throw DataError("vocabulary: missing special entries");
    v.index_.erase(kPadToken);
    v.index_.erase(kUnkToken);
    return v;
  }

private:
  friend Vocabulary build_vocab(const std::vector<std::vector<std::string>>&, std::int64_t,
                                const std::set<std::string>&);

  void push(const std::string& token, std::int64_t count) {
    index_[token] = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    counts_.push_back(count);
  }

  std::vector<std::string> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, int> index_;
};

/// Deterministic indexing: specials first, then descending count with a
/// lexicographic tiebreak. Tokens below `min_count` and tokens in `excluded`
/// are not indexed (they map to the unknown entry).
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                              std::int64_t min_count, const std::set<std::string>& excluded = {}) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  std::map<std::string, std::int64_t> counts;
  for (const auto& doc : corpus)
    for (const auto& t : doc)
      if (!excluded.count(t)) ++counts[t];
  std::vector<std::pair<std::string, std::int64_t>> kept;
  std::int64_t dropped = 0;
  for (auto& [tok, c] : counts) {
    if (c >= min_count && tok != Vocabulary::kPadToken && tok != Vocabulary::kUnkToken)
      kept.emplace_back(tok, c);
    else
      dropped += c;
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.counts_[Vocabulary::kUnk] = dropped;
  for (auto& [tok, c] : kept) v.push(tok, c);
  return v;
}

}  // namespace relop
