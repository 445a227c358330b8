#pragma once

// Hashtag co-occurrence network: significance filtering of edges, majority
// label propagation from seed hashtags, pruning, and tweet labeling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "relop/common.hpp"

namespace relop {

enum class OpinionLabel : int {
  ProClinton = 0,
  AntiTrump = 1,
  SupportClinton = 2,
  ProTrump = 3,
  AntiClinton = 4,
  SupportTrump = 5,
  Mixed = 6,
  Unidentified = 7,
};

inline constexpr int kOpinionCategories = 6;

inline constexpr std::array<const char*, 8> kOpinionLabelNames{
    "pro_clinton", "anti_trump", "support_clinton", "pro_trump",
    "anti_clinton", "support_trump", "mixed", "unidentified"};

inline std::string to_string(OpinionLabel l) { return kOpinionLabelNames[static_cast<int>(l)]; }

inline OpinionLabel parse_opinion_label(std::string_view s) {
  std::string t = to_lower_ascii(trim(s));
  for (std::size_t i = 0; i < kOpinionLabelNames.size(); ++i)
    if (t == kOpinionLabelNames[i]) return static_cast<OpinionLabel>(i);
  throw DataError("unknown opinion label: " + t);
}

inline bool is_training_label(OpinionLabel l) { return static_cast<int>(l) < kOpinionCategories; }

/// Side of the two-candidate split: 0 for the Clinton side, 1 for the Trump side.
inline int label_side(OpinionLabel l) {
  switch (l) {
    case OpinionLabel::ProClinton:
    case OpinionLabel::AntiTrump:
    case OpinionLabel::SupportClinton: return 0;
    case OpinionLabel::ProTrump:
    case OpinionLabel::AntiClinton:
    case OpinionLabel::SupportTrump: return 1;
    default: return -1;
  }
}

/// The four hashtag-level categories a propagated label may take.
inline bool is_hashtag_label(OpinionLabel l) {
  return l == OpinionLabel::ProClinton || l == OpinionLabel::AntiTrump ||
         l == OpinionLabel::ProTrump || l == OpinionLabel::AntiClinton;
}

inline const std::map<std::string, OpinionLabel>& default_seed_hashtags() {
  static const std::map<std::string, OpinionLabel> seeds{
      {"#maga", OpinionLabel::ProTrump},
      {"#imwithher", OpinionLabel::ProClinton},
      {"#nevertrump", OpinionLabel::AntiTrump},
      {"#neverhillary", OpinionLabel::AntiClinton}};
  return seeds;
}

// ---------------------------------------------------------------------------
// p-values

namespace detail {
inline void check_pvalue_args(std::int64_t n_i, std::int64_t n_j, std::int64_t k, std::int64_t N) {
  if (N < 0 || n_i < 0 || n_j < 0 || k < 0 || k > std::min(n_i, n_j) || n_i > N || n_j > N)
    throw std::invalid_argument("edge_pvalue: require 0 <= k <= min(n_i, n_j) and n_i, n_j <= N");
}
}  // namespace detail

/// Natural log of the chance co-occurrence probability; -inf when the count
/// configuration is impossible (n_i + n_j - k > N).
///
/// Evaluated as a sum of logs of the product factors
///   prod_{m=0}^{n_j-k-1} (1 - n_i/(N-m)) * prod_{m=0}^{k-1} (n_i-m)(n_j-m) / ((N-n_j+k-m)(k-m))
inline double edge_log_pvalue(std::int64_t n_i, std::int64_t n_j, std::int64_t k, std::int64_t N) {
  detail::check_pvalue_args(n_i, n_j, k, N);
  double log_p = 0.0;
  for (std::int64_t m = 0; m < n_j - k; ++m) {
    // 1 - n_i/(N-m) == (N - m - n_i)/(N - m)
    const double num = static_cast<double>(N - m - n_i);
    if (num <= 0.0) return -std::numeric_limits<double>::infinity();
    log_p += std::log(num) - std::log(static_cast<double>(N - m));
  }
  for (std::int64_t m = 0; m < k; ++m) {
    log_p += std::log(static_cast<double>(n_i - m)) + std::log(static_cast<double>(n_j - m)) -
             std::log(static_cast<double>(N - n_j + k - m)) - std::log(static_cast<double>(k - m));
  }
  return log_p;
}

inline double edge_pvalue(std::int64_t n_i, std::int64_t n_j, std::int64_t k, std::int64_t N) {
  double p = std::exp(edge_log_pvalue(n_i, n_j, k, N));
  // clamp rounding excursions only
  if (p > 1.0 && p < 1.0 + 1e-12) p = 1.0;
  return std::clamp(p, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Graph

struct CoocEdge {
  int i = 0;  // i < j
  int j = 0;
  std::int64_t k = 0;
  double p = 1.0;
  double log_p = 0.0;
  std::optional<double> s;  // set by significance_filter
};

struct HashtagGraph {
  std::vector<std::string> tags;  // sorted
  std::vector<std::int64_t> counts;
  std::int64_t total_tweets = 0;
  std::vector<CoocEdge> edges;  // sorted by (i, j)

  int vertex_count() const { return static_cast<int>(tags.size()); }

  std::optional<int> index(std::string_view tag) const {
    auto it = std::lower_bound(tags.begin(), tags.end(), tag);
    if (it == tags.end() || *it != tag) return std::nullopt;
    return static_cast<int>(it - tags.begin());
  }

  /// (neighbor, edge index) lists.
  std::vector<std::vector<std::pair<int, std::size_t>>> adjacency() const {
    std::vector<std::vector<std::pair<int, std::size_t>>> adj(tags.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      adj[static_cast<std::size_t>(edges[e].i)].emplace_back(edges[e].j, e);
      adj[static_cast<std::size_t>(edges[e].j)].emplace_back(edges[e].i, e);
    }
    return adj;
  }

  const CoocEdge* find_edge(std::string_view a, std::string_view b) const {
    auto ia = index(a), ib = index(b);
    if (!ia || !ib) return nullptr;
    int i = std::min(*ia, *ib), j = std::max(*ia, *ib);
    auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{i, j},
                               [](const CoocEdge& e, const std::pair<int, int>& key) {
                                 return std::pair{e.i, e.j} < key;
                               });
    if (it == edges.end() || it->i != i || it->j != j) return nullptr;
    return &*it;
  }
};

/// One hashtag list per tweet; a pair is counted once per tweet.
/// total_tweets counts every tweet, including those without hashtags.
inline HashtagGraph build_cooccurrence(const std::vector<std::vector<std::string>>& tweet_hashtags) {
  HashtagGraph g;
  g.total_tweets = static_cast<std::int64_t>(tweet_hashtags.size());
  std::map<std::string, std::int64_t> occ;
  std::vector<std::vector<std::string>> uniq;
  uniq.reserve(tweet_hashtags.size());
  for (const auto& tags : tweet_hashtags) {
    std::vector<std::string> u(tags);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    for (const auto& t : u) ++occ[t];
    uniq.push_back(std::move(u));
  }
  for (const auto& [tag, c] : occ) {
    g.tags.push_back(tag);
    g.counts.push_back(c);
  }
  std::map<std::pair<int, int>, std::int64_t> pairs;
  for (const auto& u : uniq) {
    std::vector<int> ids;
    ids.reserve(u.size());
    for (const auto& t : u) ids.push_back(*g.index(t));
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b) ++pairs[{ids[a], ids[b]}];
  }
  g.edges.reserve(pairs.size());
  for (const auto& [ij, k] : pairs) {
    CoocEdge e;
    e.i = ij.first;
    e.j = ij.second;
    e.k = k;
    e.log_p = edge_log_pvalue(g.counts[static_cast<std::size_t>(e.i)],
                              g.counts[static_cast<std::size_t>(e.j)], k, g.total_tweets);
    e.p = std::clamp(std::exp(e.log_p), 0.0, 1.0);
    g.edges.push_back(e);
  }
  return g;
}

/// Keeps edges with p < p_o and weights them by ln(p_o / p). Vertices are kept.
inline HashtagGraph significance_filter(const HashtagGraph& graph, double p_o = 1e-6) {
  if (!(p_o > 0.0 && p_o < 1.0)) throw std::invalid_argument("significance_filter: p_o must be in (0,1)");
  HashtagGraph out;
  out.tags = graph.tags;
  out.counts = graph.counts;
  out.total_tweets = graph.total_tweets;
  const double log_po = std::log(p_o);
  for (const auto& e : graph.edges) {
    // log space keeps underflowed probabilities comparable
    if (e.log_p < log_po) {
      CoocEdge kept = e;
      kept.s = log_po - e.log_p;
      out.edges.push_back(kept);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label propagation over the similarity network

struct LpaOptions {
  int max_sweeps = 100;
  bool weighted = false;  // sum significance weights instead of counting neighbors
};

struct LpaResult {
  std::map<std::string, OpinionLabel> labels;
  int sweeps = 0;
  bool converged = false;
};

/// Asynchronous majority-label updates in a fresh random vertex order each
/// sweep. Seeds are clamped; ties are broken uniformly at random; vertices
/// with no labeled neighbor stay unlabeled.
inline LpaResult propagate_hashtag_labels(const HashtagGraph& graph,
                                          const std::map<std::string, OpinionLabel>& seeds,
                                          Rng& rng, const LpaOptions& opts = {}) {
  const int n = graph.vertex_count();
  constexpr int kNone = -1;
  std::vector<int> label(static_cast<std::size_t>(n), kNone);
  std::vector<char> clamped(static_cast<std::size_t>(n), 0);
  for (const auto& [tag, l] : seeds) {
    if (!is_hashtag_label(l)) throw std::invalid_argument("seed labels must be pro/anti categories");
    if (auto idx = graph.index(tag)) {
      label[static_cast<std::size_t>(*idx)] = static_cast<int>(l);
      clamped[static_cast<std::size_t>(*idx)] = 1;
    }
  }
  const auto adj = graph.adjacency();
  auto tally = [&](int v) {
    std::array<double, 8> score{};
    for (auto [u, e] : adj[static_cast<std::size_t>(v)]) {
      int lu = label[static_cast<std::size_t>(u)];
      if (lu == kNone) continue;
      score[static_cast<std::size_t>(lu)] += opts.weighted ? graph.edges[e].s.value_or(1.0) : 1.0;
    }
    return score;
  };
  auto satisfied = [&](int v) {
    int lv = label[static_cast<std::size_t>(v)];
    auto score = tally(v);
    double best = *std::max_element(score.begin(), score.end());
    if (lv == kNone) return best == 0.0;
    return score[static_cast<std::size_t>(lv)] >= best;
  };

  std::vector<int> order;
  for (int v = 0; v < n; ++v)
    if (!clamped[static_cast<std::size_t>(v)]) order.push_back(v);

  LpaResult result;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int v : order) {
      auto score = tally(v);
      double best = *std::max_element(score.begin(), score.end());
      if (best == 0.0) continue;
      std::vector<int> ties;
      for (int c = 0; c < 8; ++c)
        if (score[static_cast<std::size_t>(c)] == best) ties.push_back(c);
      if (ties.size() == 1) {
        label[static_cast<std::size_t>(v)] = ties[0];
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
        label[static_cast<std::size_t>(v)] = ties[pick(rng)];
      }
    }
    result.sweeps = sweep + 1;
    bool done = true;
    for (int v = 0; v < n && done; ++v)
      if (!clamped[static_cast<std::size_t>(v)] && !satisfied(v)) done = false;
    if (done) {
      result.converged = true;
      break;
    }
  }
  for (int v = 0; v < n; ++v)
    if (label[static_cast<std::size_t>(v)] != kNone)
      result.labels[graph.tags[static_cast<std::size_t>(v)]] =
          static_cast<OpinionLabel>(label[static_cast<std::size_t>(v)]);
  return result;
}

/// Keep hashtag i of class C_m iff n_i > r * max_{j in C_m} n_j.
inline std::map<std::string, OpinionLabel> prune_labels(
    const std::map<std::string, OpinionLabel>& labels,
    const std::map<std::string, std::int64_t>& occurrences, double r = 0.001) {
  if (!(r > 0.0)) throw std::invalid_argument("prune_labels: r must be positive");
  auto count_of = [&](const std::string& tag) -> std::int64_t {
    auto it = occurrences.find(tag);
    return it == occurrences.end() ? 0 : it->second;
  };
  std::map<OpinionLabel, std::int64_t> class_max;
  for (const auto& [tag, l] : labels) class_max[l] = std::max(class_max[l], count_of(tag));
  std::map<std::string, OpinionLabel> out;
  for (const auto& [tag, l] : labels)
    if (static_cast<double>(count_of(tag)) > r * static_cast<double>(class_max[l])) out.emplace(tag, l);
  return out;
}

inline std::map<std::string, std::int64_t> occurrence_map(const HashtagGraph& g) {
  std::map<std::string, std::int64_t> out;
  for (std::size_t i = 0; i < g.tags.size(); ++i) out.emplace(g.tags[i], g.counts[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Tweet labeling

/// Category from the labeled-hashtag counts of one tweet. A strict winner
/// takes the tweet; an exact two-way tie between the two categories of one
/// side gives that side's Support category; any other tie is Mixed.
inline OpinionLabel classify_tweet(const std::vector<std::string>& hashtags,
                                   const std::map<std::string, OpinionLabel>& labels) {
  std::array<int, 8> counts{};
  int total = 0;
  for (const auto& h : hashtags) {
    auto it = labels.find(h);
    if (it == labels.end()) continue;
    ++counts[static_cast<std::size_t>(it->second)];
    ++total;
  }
  if (total == 0) return OpinionLabel::Unidentified;
  int best = *std::max_element(counts.begin(), counts.end());
  std::vector<OpinionLabel> top;
  for (int c = 0; c < 8; ++c)
    if (counts[static_cast<std::size_t>(c)] == best) top.push_back(static_cast<OpinionLabel>(c));
  if (top.size() == 1) return top[0];
  if (top.size() == 2) {
    std::set<OpinionLabel> pair(top.begin(), top.end());
    if (pair == std::set{OpinionLabel::ProTrump, OpinionLabel::AntiClinton}) return OpinionLabel::SupportTrump;
    if (pair == std::set{OpinionLabel::ProClinton, OpinionLabel::AntiTrump}) return OpinionLabel::SupportClinton;
  }
  return OpinionLabel::Mixed;
}

struct TrainingExample {
  std::vector<std::string> tokens;
  OpinionLabel label = OpinionLabel::Unidentified;
};

struct TrainingSet {
  std::vector<TrainingExample> examples;
  std::array<std::size_t, kOpinionCategories> label_counts{};

  /// TSV `label<TAB>space-joined tokens`.
  std::string to_tsv() const {
    std::string out;
    for (const auto& ex : examples) out += to_string(ex.label) + "\t" + join(ex.tokens, " ") + "\n";
    return out;
  }

  static TrainingSet from_tsv(std::istream& in) {
    TrainingSet ts;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw DataError("training set: expected label<TAB>tokens");
      TrainingExample ex;
      ex.label = parse_opinion_label(line.substr(0, tab));
      if (!is_training_label(ex.label)) throw DataError("training set contains a non-training label");
      ex.tokens = split_ws(line.substr(tab + 1));
      ++ts.label_counts[static_cast<std::size_t>(ex.label)];
      ts.examples.push_back(std::move(ex));
    }
    return ts;
  }
};

struct TweetLabeling {
  std::vector<OpinionLabel> per_tweet;
  std::array<std::size_t, 8> category_counts{};
  TrainingSet training;
};

/// `tweets` are content-token sequences (mentions and URLs already removed).
/// Labeled hashtags are stripped from training token sequences unless
/// `keep_labeled_hashtags` is set.
inline TweetLabeling label_tweets(const std::vector<std::vector<std::string>>& tweets,
                                  const std::map<std::string, OpinionLabel>& labels,
                                  bool keep_labeled_hashtags = false) {
  TweetLabeling out;
  out.per_tweet.reserve(tweets.size());
  for (const auto& toks : tweets) {
    std::vector<std::string> tags;
    for (const auto& t : toks)
      if (!t.empty() && t[0] == '#') tags.push_back(t);
    OpinionLabel l = classify_tweet(tags, labels);
    out.per_tweet.push_back(l);
    ++out.category_counts[static_cast<std::size_t>(l)];
    if (!is_training_label(l)) continue;
    TrainingExample ex;
    ex.label = l;
    for (const auto& t : toks)
      if (keep_labeled_hashtags || !labels.count(t)) ex.tokens.push_back(t);
    ++out.training.label_counts[static_cast<std::size_t>(l)];
    out.training.examples.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

/// Seed file: CSV `hashtag,label` with a header row.
inline std::map<std::string, OpinionLabel> read_seed_csv(std::istream& in) {
  std::map<std::string, OpinionLabel> seeds;
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
    if (cols.size() < 2) throw DataError("seed file: expected hashtag,label");
    auto tag = to_lower_ascii(trim(cols[0]));
    if (tag.empty() || tag[0] != '#') throw DataError("seed file: hashtag must start with '#': " + tag);
    auto l = parse_opinion_label(cols[1]);
    if (!is_hashtag_label(l)) throw DataError("seed file: label must be a pro/anti category");
    seeds[tag] = l;
  }
  return seeds;
}

inline std::string seed_csv(const std::map<std::string, OpinionLabel>& seeds) {
  std::string out = "hashtag,label\n";
  for (const auto& [tag, l] : seeds) out += tag + "," + to_string(l) + "\n";
  return out;
}

/// Label map: CSV `hashtag,label,n_i`.
inline std::string label_map_csv(const std::map<std::string, OpinionLabel>& labels,
                                 const std::map<std::string, std::int64_t>& occurrences) {
  std::string out = "hashtag,label,n_i\n";
  for (const auto& [tag, l] : labels) {
    auto it = occurrences.find(tag);
    out += tag + "," + to_string(l) + "," + std::to_string(it == occurrences.end() ? 0 : it->second) + "\n";
  }
  return out;
}

inline std::map<std::string, OpinionLabel> read_label_map_csv(std::istream& in) {
  std::map<std::string, OpinionLabel> labels;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (trim(line).empty()) continue;
    auto cols = split(line, ',');
    if (cols.size() != 3) throw DataError("label map: expected hashtag,label,n_i");
    labels[cols[0]] = parse_opinion_label(cols[1]);
  }
  return labels;
}

/// Edge list TSV `hashtag_i<TAB>hashtag_j<TAB>k<TAB>p<TAB>s`.
inline std::string graph_edges_tsv(const HashtagGraph& g) {
  std::string out = "hashtag_i\thashtag_j\tk\tp\ts\n";
  for (const auto& e : g.edges) {
    out += g.tags[static_cast<std::size_t>(e.i)] + "\t" + g.tags[static_cast<std::size_t>(e.j)] + "\t" +
           std::to_string(e.k) + "\t" + format_double(e.p) + "\t" +
           (e.s ? format_double(*e.s) : std::string("")) + "\n";
  }
  return out;
}

}  // namespace relop
