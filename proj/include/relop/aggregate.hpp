#pragma once

// Centroid aggregation of word vectors to tweet, user and state opinion
// points, plus the per-state variation and representativeness summaries.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relop/common.hpp"
#include "relop/corpus.hpp"
#include "relop/oowe.hpp"

namespace relop {

enum class Level { tweet, user, state };

inline const char* to_string(Level l) {
  switch (l) {
    case Level::tweet: return "tweet";
    case Level::user: return "user";
    case Level::state: return "state";
  }
  return "?";
}

struct OpinionPoint {
  std::string entity_id;
  Level level = Level::tweet;
  Vector vector;
  std::size_t support_count = 1;
};

/// Fixed-tree (pairwise) summation; the tree depends only on the count.
inline Vector pairwise_sum(const std::vector<const Vector*>& vs, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return *vs[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(vs, lo, mid) + pairwise_sum(vs, mid, hi);
}

/// Arithmetic mean of a multiset of vectors, evaluated on a canonical form:
/// values sorted lexicographically, multiplicities divided by their gcd, then
/// summed pairwise. Permuting the inputs or scaling every multiplicity by the
/// same factor leaves the result bit-identical.
inline Vector canonical_mean(const std::vector<Vector>& vs) {
  if (vs.empty()) throw std::invalid_argument("canonical_mean: empty input");
  std::vector<const Vector*> sorted;
  sorted.reserve(vs.size());
  for (const auto& v : vs) sorted.push_back(&v);
  auto lex_less = [](const Vector* a, const Vector* b) {
    return std::lexicographical_compare(a->data(), a->data() + a->size(), b->data(), b->data() + b->size());
  };
  std::stable_sort(sorted.begin(), sorted.end(), lex_less);

  std::vector<std::pair<const Vector*, std::size_t>> groups;
  for (const Vector* v : sorted) {
    if (!groups.empty() && *groups.back().first == *v)
      ++groups.back().second;
    else
      groups.emplace_back(v, 1);
  }
  std::size_t g = 0;
  for (const auto& grp : groups) g = std::gcd(g, grp.second);

  std::vector<const Vector*> expanded;
  for (const auto& [v, c] : groups)
    for (std::size_t i = 0; i < c / g; ++i) expanded.push_back(v);
  return pairwise_sum(expanded, 0, expanded.size()) / static_cast<double>(expanded.size());
}

/// Centroid of the in-vocabulary token rows of one tweet. Mentions, URLs,
/// unknown tokens and `excluded` tokens (labeled hashtags) do not count.
/// Returns nullopt when no usable token remains.
inline std::optional<OpinionPoint> tweet_vector(const OoweModel& model, const Vocabulary& vocab,
                                                const std::string& tweet_id,
                                                const std::vector<std::string>& tokens,
                                                const std::set<std::string>& excluded = {}) {
  std::vector<Vector> rows;
  for (const auto& t : tokens) {
    if (t.empty() || t[0] == '@' || excluded.count(t)) continue;
    const int idx = vocab.index(t);
    if (idx == Vocabulary::kUnk || idx == Vocabulary::kPad) continue;
    rows.push_back(model.E.row(idx).transpose());
  }
  if (rows.empty()) return std::nullopt;
  return OpinionPoint{tweet_id, Level::tweet, canonical_mean(rows), rows.size()};
}

namespace detail {
inline OpinionPoint mean_point(const std::string& id, Level level, const std::vector<OpinionPoint>& parts) {
  if (parts.empty()) throw std::invalid_argument("aggregation needs at least one point");
  std::vector<Vector> vs;
  vs.reserve(parts.size());
  for (const auto& p : parts) vs.push_back(p.vector);
  return OpinionPoint{id, level, canonical_mean(vs), parts.size()};
}
}  // namespace detail

/// One point per user regardless of how many tweets they posted.
inline OpinionPoint user_vector(const std::string& user_id, const std::vector<OpinionPoint>& tweets) {
  return detail::mean_point(user_id, Level::user, tweets);
}

inline OpinionPoint state_vector(const std::string& state, const std::vector<OpinionPoint>& users) {
  return detail::mean_point(state, Level::state, users);
}

/// Mean over dimensions of the per-dimension population standard deviation.
inline double state_variation(const std::vector<OpinionPoint>& users) {
  if (users.empty()) throw std::invalid_argument("state_variation: no users");
  const Eigen::Index d = users.front().vector.size();
  const double n = static_cast<double>(users.size());
  double total = 0.0;
  for (Eigen::Index c = 0; c < d; ++c) {
    double mean = 0.0;
    for (const auto& u : users) mean += u.vector[c];
    mean /= n;
    double ss = 0.0;
    for (const auto& u : users) ss += (u.vector[c] - mean) * (u.vector[c] - mean);
    total += std::sqrt(ss / n);
  }
  return total / static_cast<double>(d);
}

/// user_count / population; absent when the population is unknown.
inline std::optional<double> representativeness(std::size_t user_count, std::optional<double> population) {
  if (!population) return std::nullopt;
  if (!(*population > 0.0)) throw std::invalid_argument("representativeness: population must be positive");
  return static_cast<double>(user_count) / *population;
}

struct StateSummary {
  std::string state;
  Vector vector;
  double user_stddev = 0.0;
  std::size_t user_count = 0;
  std::optional<double> representativeness;
};

/// Majority state over a user's located posts; lexicographic tiebreak.
inline std::optional<std::string> majority_state(const std::vector<std::string>& post_states) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : post_states) ++counts[s];
  std::optional<std::string> best;
  std::size_t best_count = 0;
  for (const auto& [s, c] : counts) {
    if (c > best_count) {
      best = s;
      best_count = c;
    }
  }
  return best;
}

struct AggregationInputTweet {
  std::string id;
  std::string user_id;
  std::optional<std::string> state;
  std::vector<std::string> tokens;
};

struct AggregationResult {
  std::vector<OpinionPoint> tweets;
  std::vector<OpinionPoint> users;   // sorted by id
  std::vector<OpinionPoint> states;  // sorted by code
  std::vector<StateSummary> summaries;
  std::size_t skipped_tweets = 0;
};

/// tweet -> user -> state. Users without any located tweet appear at the
/// user level only.
inline AggregationResult aggregate(const OoweModel& model, const Vocabulary& vocab,
                                   const std::vector<AggregationInputTweet>& corpus,
                                   const std::set<std::string>& excluded,
                                   const std::map<std::string, double>& population = {}) {
  AggregationResult out;
  std::map<std::string, std::vector<OpinionPoint>> by_user;
  std::map<std::string, std::vector<std::string>> user_states;
  for (const auto& tw : corpus) {
    auto p = tweet_vector(model, vocab, tw.id, tw.tokens, excluded);
    if (!p) {
      ++out.skipped_tweets;
      continue;
    }
    by_user[tw.user_id].push_back(*p);
    if (tw.state) user_states[tw.user_id].push_back(*tw.state);
    out.tweets.push_back(std::move(*p));
  }
  std::map<std::string, std::vector<OpinionPoint>> by_state;
  for (const auto& [uid, pts] : by_user) {
    out.users.push_back(user_vector(uid, pts));
    auto it = user_states.find(uid);
    if (it == user_states.end()) continue;
    if (auto s = majority_state(it->second)) by_state[*s].push_back(out.users.back());
  }
  for (const auto& [code, users] : by_state) {
    out.states.push_back(state_vector(code, users));
    StateSummary sum;
    sum.state = code;
    sum.vector = out.states.back().vector;
    sum.user_stddev = state_variation(users);
    sum.user_count = users.size();
    auto pop = population.find(code);
    sum.representativeness = representativeness(
        users.size(), pop == population.end() ? std::nullopt : std::optional<double>(pop->second));
    out.summaries.push_back(std::move(sum));
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

/// TSV `level<TAB>entity_id<TAB>count<TAB>v1...vd`.
inline std::string opinion_points_tsv(const std::vector<OpinionPoint>& points) {
  std::string out;
  for (const auto& p : points) {
    out += std::string(to_string(p.level)) + "\t" + p.entity_id + "\t" + std::to_string(p.support_count);
    for (Eigen::Index c = 0; c < p.vector.size(); ++c) out += "\t" + format_double(p.vector[c]);
    out += "\n";
  }
  return out;
}

/// CSV `state,user_count,stddev,representativeness`; empty ratio when unknown.
inline std::string state_summary_csv(const std::vector<StateSummary>& rows) {
  std::string out = "state,user_count,stddev,representativeness\n";
  for (const auto& r : rows) {
    out += r.state + "," + std::to_string(r.user_count) + "," + format_double(r.user_stddev) + "," +
           (r.representativeness ? format_double(*r.representativeness) : std::string()) + "\n";
  }
  return out;
}

/// Population CSV `state_code,population` with a header row.
inline std::map<std::string, double> read_population_csv(std::istream& in) {
  std::map<std::string, double> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      header = false;
      continue;
    }
    if (trim(line).empty()) continue;
    auto cols = split(line, ',');
    if (cols.size() != 2) throw DataError("population: expected state_code,population");
    auto code = trim(cols[0]);
    if (!is_state_code(code)) throw DataError("population: unknown state code " + code);
    out[code] = parse_double(cols[1]);
  }
  return out;
}

}  // namespace relop
