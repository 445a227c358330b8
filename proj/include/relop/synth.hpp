#pragma once

// Synthetic stand-ins for the real data: a planted-lexicon opinion corpus
// with users spread over the states, and standard manifold samples.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relop/common.hpp"
#include "relop/corpus.hpp"
#include "relop/hashtag_network.hpp"
#include "relop/states.hpp"

namespace relop {

// ---------------------------------------------------------------------------
// Opinion corpus

struct SynthCorpusConfig {
  int classes = 4;
  std::vector<std::string> seed_hashtags{"#imwithher", "#maga", "#nevertrump", "#neverhillary"};
  int lexicon_size = 30;
  int neutral_vocab = 200;
  int tweets_per_class = 250;
  int tokens_per_tweet = 12;
  int planted_per_class = 6;
  int noise_hashtags = 40;
  int users = 300;
  std::uint64_t seed = 1;

  double seed_rate = 0.8;      // class tweets carrying their seed hashtag
  double lexicon_rate = 0.4;   // content tokens drawn from the class lexicon
  double support_rate = 0.1;   // also carry the same-side sibling class's hashtags
  double mixed_rate = 0.03;    // also carry an opposite-side hashtag
  double unlabeled_rate = 0.05;  // no opinion hashtags at all
  double noise_tag_rate = 0.3;
  double bot_rate = 0.1;
  double user_lean = 0.8;      // users agreeing with their state's outcome
  double geo_rate = 0.2;
  double profile_rate = 0.6;
  double text_location_rate = 0.1;
  double mention_rate = 0.2;
  double url_rate = 0.2;

  void validate() const {
    auto positive = [](long v, const char* name) {
      if (v <= 0) throw std::invalid_argument(std::string("synth: ") + name + " must be positive");
    };
    positive(classes, "classes");
    positive(lexicon_size, "lexicon_size");
    positive(neutral_vocab, "neutral_vocab");
    positive(tweets_per_class, "tweets_per_class");
    positive(tokens_per_tweet, "tokens_per_tweet");
    positive(planted_per_class, "planted_per_class");
    positive(users, "users");
    if (classes > 4) throw std::invalid_argument("synth: at most 4 opinion classes");
    if (static_cast<int>(seed_hashtags.size()) < classes)
      throw std::invalid_argument("synth: need one seed hashtag per class");
  }
};

/// Class c sits on side c % 2 (0 = Clinton, 1 = Trump) and maps to the
/// hashtag categories in the order of the default seeds.
inline int synth_side(int cls) { return cls % 2; }

inline OpinionLabel synth_class_label(int cls) {
  static constexpr std::array<OpinionLabel, 4> order{OpinionLabel::ProClinton, OpinionLabel::ProTrump,
                                                     OpinionLabel::AntiTrump, OpinionLabel::AntiClinton};
  return order.at(static_cast<std::size_t>(cls));
}

/// 2016 winner per state: 1 where Trump carried it.
inline const std::set<std::string>& trump_states_2016() {
  static const std::set<std::string> s{"AL", "AK", "AZ", "AR", "FL", "GA", "ID", "IN", "IA", "KS",
                                       "KY", "LA", "MI", "MS", "MO", "MT", "NE", "NC", "ND", "OH",
                                       "OK", "PA", "SC", "SD", "TN", "TX", "UT", "WV", "WI", "WY"};
  return s;
}

inline int outcome_side_2016(std::string_view code) {
  return trump_states_2016().count(std::string(code)) ? 1 : 0;
}

enum class SynthKind { plain, support, mixed, unlabeled };

inline const char* to_string(SynthKind k) {
  switch (k) {
    case SynthKind::plain: return "plain";
    case SynthKind::support: return "support";
    case SynthKind::mixed: return "mixed";
    case SynthKind::unlabeled: return "unlabeled";
  }
  return "?";
}

struct SynthTruth {
  std::string id;
  int cls = 0;
  int side = 0;
  SynthKind kind = SynthKind::plain;
  OpinionLabel expected = OpinionLabel::Unidentified;
};

struct SynthUser {
  std::string id;
  std::string state;
  int side = 0;
  bool bot = false;
};

struct SynthCorpus {
  std::vector<Post> posts;
  std::vector<SynthTruth> truth;                // aligned with posts
  std::map<std::string, int> planted;           // hashtag -> class, seeds included
  std::vector<std::vector<std::string>> lexicons;
  std::vector<std::string> neutral;
  std::vector<SynthUser> users;
};

inline std::string planted_hashtag(int cls, int i) { return "#camp" + std::to_string(cls) + "x" + std::to_string(i); }
inline std::string lexicon_word(int cls, int i) { return "lex" + std::to_string(cls) + "w" + std::to_string(i); }

namespace detail {

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

inline bool coin(double p, Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

inline std::string place_for(const std::string& code, Rng& rng) {
  const auto& info = *std::find_if(kStates.begin(), kStates.end(), [&](const StateInfo& s) { return s.code == code; });
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return "Downtown, " + code;
    case 1: return std::string(info.name);
    default: return "Somewhere, " + std::string(info.name);
  }
}

}  // namespace detail

/// Every tweet names both candidates so it passes the relevance filter,
/// mixes class lexicon and neutral tokens, and carries hashtags from its
/// class pool (seed plus planted). Support tweets add the same-side sibling
/// class's pool, mixed tweets add one opposite-side hashtag.
inline SynthCorpus gen_opinion_corpus(const SynthCorpusConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SynthCorpus out;
  const int C = cfg.classes;

  std::vector<std::vector<std::string>> pools(static_cast<std::size_t>(C));
  out.lexicons.resize(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    out.planted[cfg.seed_hashtags[static_cast<std::size_t>(c)]] = c;
    for (int i = 0; i < cfg.planted_per_class; ++i) {
      pools[static_cast<std::size_t>(c)].push_back(planted_hashtag(c, i));
      out.planted[planted_hashtag(c, i)] = c;
    }
    for (int i = 0; i < cfg.lexicon_size; ++i) out.lexicons[static_cast<std::size_t>(c)].push_back(lexicon_word(c, i));
  }
  for (int i = 0; i < cfg.neutral_vocab; ++i) out.neutral.push_back("word" + std::to_string(i));
  std::vector<std::string> noise_tags;
  for (int i = 0; i < cfg.noise_hashtags; ++i) noise_tags.push_back("#misc" + std::to_string(i));

  std::vector<std::string> codes;
  for (const auto& s : kStates) codes.emplace_back(s.code);
  std::array<std::vector<int>, 2> by_side;
  std::vector<std::optional<std::string>> profiles;
  for (int u = 0; u < cfg.users; ++u) {
    SynthUser user;
    user.id = "u" + std::to_string(u);
    user.state = detail::pick(codes, rng);
    const int lean = outcome_side_2016(user.state);
    user.side = detail::coin(cfg.user_lean, rng) ? lean : 1 - lean;
    user.bot = detail::coin(cfg.bot_rate, rng);
    profiles.push_back(detail::coin(cfg.profile_rate, rng) ? std::optional(detail::place_for(user.state, rng))
                                                           : std::nullopt);
    by_side[static_cast<std::size_t>(user.side)].push_back(u);
    out.users.push_back(user);
  }
  for (auto& side : by_side)
    if (side.empty()) side.push_back(0);  // tiny configs: borrow a user

  static const std::vector<std::string> bot_clients{"AutoPoster", "bulk-sender", "TweetFarm"};
  std::vector<std::string> official(default_official_clients().begin(), default_official_clients().end());

  std::int64_t ts = 1475280000;  // 2016-10-01
  for (int c = 0; c < C; ++c) {
    const auto& pool = pools[static_cast<std::size_t>(c)];
    const std::string& seed_tag = cfg.seed_hashtags[static_cast<std::size_t>(c)];
    const int sibling = c + 2 < C ? c + 2 : (c - 2 >= 0 ? c - 2 : -1);
    for (int t = 0; t < cfg.tweets_per_class; ++t) {
      SynthTruth truth;
      truth.cls = c;
      truth.side = synth_side(c);
      const double roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (roll < cfg.unlabeled_rate)
        truth.kind = SynthKind::unlabeled;
      else if (roll < cfg.unlabeled_rate + cfg.mixed_rate)
        truth.kind = SynthKind::mixed;
      else if (sibling >= 0 && roll < cfg.unlabeled_rate + cfg.mixed_rate + cfg.support_rate)
        truth.kind = SynthKind::support;

      std::vector<std::string> pieces;
      std::vector<std::string> tags;
      if (truth.kind != SynthKind::unlabeled) {
        if (detail::coin(cfg.seed_rate, rng)) tags.push_back(seed_tag);
        tags.push_back(detail::pick(pool, rng));
        if (detail::coin(0.5, rng)) tags.push_back(detail::pick(pool, rng));
      }
      if (truth.kind == SynthKind::support) {
        const auto& sp = pools[static_cast<std::size_t>(sibling)];
        if (detail::coin(cfg.seed_rate, rng)) tags.push_back(cfg.seed_hashtags[static_cast<std::size_t>(sibling)]);
        tags.push_back(detail::pick(sp, rng));
      } else if (truth.kind == SynthKind::mixed) {
        std::vector<int> others;
        for (int o = 0; o < C; ++o)
          if (synth_side(o) != synth_side(c)) others.push_back(o);
        if (others.empty()) {
          truth.kind = SynthKind::plain;
        } else {
          const int o = detail::pick(others, rng);
          tags.push_back(detail::pick(pools[static_cast<std::size_t>(o)], rng));
          tags.push_back(cfg.seed_hashtags[static_cast<std::size_t>(o)]);
        }
      }
      if (!noise_tags.empty() && detail::coin(cfg.noise_tag_rate, rng)) tags.push_back(detail::pick(noise_tags, rng));
      std::sort(tags.begin(), tags.end());
      tags.erase(std::unique(tags.begin(), tags.end()), tags.end());

      pieces.push_back("trump");
      pieces.push_back("clinton");
      const int content = std::max(0, cfg.tokens_per_tweet - 2);
      for (int w = 0; w < content; ++w) {
        const bool lex = detail::coin(cfg.lexicon_rate, rng);
        pieces.push_back(lex ? detail::pick(out.lexicons[static_cast<std::size_t>(c)], rng)
                             : detail::pick(out.neutral, rng));
      }
      std::shuffle(pieces.begin(), pieces.end(), rng);
      for (const auto& h : tags) pieces.push_back(h);

      const int u = detail::pick(by_side[static_cast<std::size_t>(truth.side)], rng);
      const auto& user = out.users[static_cast<std::size_t>(u)];
      if (detail::coin(cfg.mention_rate, rng))
        pieces.insert(pieces.begin(), "@u" + std::to_string(std::uniform_int_distribution<int>(0, cfg.users - 1)(rng)));
      if (detail::coin(cfg.text_location_rate, rng)) {
        const auto& info =
            *std::find_if(kStates.begin(), kStates.end(), [&](const StateInfo& s) { return s.code == user.state; });
        pieces.push_back("from");
        pieces.push_back(std::string(info.name));
      }
      if (detail::coin(cfg.url_rate, rng)) pieces.push_back("https://t.co/" + hex64(rng()).substr(0, 10));

      Post p;
      p.user_id = user.id;
      p.text = join(pieces, " ");
      p.client = user.bot ? detail::pick(bot_clients, rng) : detail::pick(official, rng);
      if (detail::coin(cfg.geo_rate, rng)) p.geo_field = "Downtown, " + user.state;
      p.profile_location = profiles[static_cast<std::size_t>(u)];
      p.timestamp = ts + std::uniform_int_distribution<std::int64_t>(0, 40 * 86400)(rng);

      switch (truth.kind) {
        case SynthKind::plain: truth.expected = synth_class_label(c); break;
        case SynthKind::support:
          truth.expected = truth.side == 0 ? OpinionLabel::SupportClinton : OpinionLabel::SupportTrump;
          break;
        case SynthKind::mixed: truth.expected = OpinionLabel::Mixed; break;
        case SynthKind::unlabeled: truth.expected = OpinionLabel::Unidentified; break;
      }
      out.posts.push_back(std::move(p));
      out.truth.push_back(truth);
    }
  }

  // Interleave classes and assign ids in the final order.
  std::vector<std::size_t> perm(out.posts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Post> posts;
  std::vector<SynthTruth> truth;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    posts.push_back(std::move(out.posts[perm[i]]));
    truth.push_back(out.truth[perm[i]]);
    posts.back().id = "t" + std::to_string(i);
    truth.back().id = posts.back().id;
  }
  out.posts = std::move(posts);
  out.truth = std::move(truth);
  return out;
}

/// TSV `id<TAB>class<TAB>side<TAB>kind<TAB>expected_label`.
inline std::string synth_truth_tsv(const std::vector<SynthTruth>& truth) {
  std::string out;
  for (const auto& t : truth)
    out += t.id + "\t" + std::to_string(t.cls) + "\t" + std::to_string(t.side) + "\t" + to_string(t.kind) + "\t" +
           to_string(t.expected) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Manifolds

enum class ManifoldKind { two_moons, swiss_roll, blobs, flat_grid, arc };

inline const char* to_string(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::two_moons: return "two_moons";
    case ManifoldKind::swiss_roll: return "swiss_roll";
    case ManifoldKind::blobs: return "blobs";
    case ManifoldKind::flat_grid: return "flat_grid";
    case ManifoldKind::arc: return "arc";
  }
  return "?";
}

inline ManifoldKind parse_manifold_kind(std::string_view s) {
  for (auto k : {ManifoldKind::two_moons, ManifoldKind::swiss_roll, ManifoldKind::blobs, ManifoldKind::flat_grid,
                 ManifoldKind::arc})
    if (s == to_string(k)) return k;
  throw DataError("unknown manifold kind: " + std::string(s));
}

struct ManifoldSample {
  Eigen::MatrixXd points;
  Eigen::MatrixXd intrinsic;  // per-point intrinsic coordinates
  std::vector<int> classes;
};

/// Arc length of the spiral (t cos t, t sin t) from 0 to t.
inline double spiral_arc_length(double t) { return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t)); }

/// two_moons: sklearn-style interleaved half circles, classes = moon, intrinsic = angle.
/// swiss_roll: t in [1.5pi, 4.5pi], height in [0, 21]; intrinsic = (arc length, height, t);
///   classes split at t = 3pi.
/// blobs: two isotropic Gaussians of stddev `noise` (1 when zero) whose centers are 10 stddevs apart.
/// flat_grid: unit-spaced collinear lattice in R^3; intrinsic = lattice position.
/// arc: half unit circle in R^2; intrinsic = arc length.
inline ManifoldSample gen_manifold(ManifoldKind kind, int n, double noise, std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("gen_manifold: n must be >= 10");
  if (noise < 0.0) throw std::invalid_argument("gen_manifold: noise must be nonnegative");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double pi = std::numbers::pi;
  ManifoldSample s;
  s.classes.assign(static_cast<std::size_t>(n), 0);
  switch (kind) {
    case ManifoldKind::two_moons: {
      s.points.resize(n, 2);
      s.intrinsic.resize(n, 1);
      const int outer = n / 2;
      for (int i = 0; i < n; ++i) {
        const bool in = i >= outer;
        const int m = in ? n - outer : outer;
        const int j = in ? i - outer : i;
        const double t = m > 1 ? pi * j / (m - 1) : 0.0;
        s.points(i, 0) = in ? 1.0 - std::cos(t) : std::cos(t);
        s.points(i, 1) = in ? 0.5 - std::sin(t) : std::sin(t);
        s.intrinsic(i, 0) = t;
        s.classes[static_cast<std::size_t>(i)] = in ? 1 : 0;
      }
      break;
    }
    case ManifoldKind::swiss_roll: {
      s.points.resize(n, 3);
      s.intrinsic.resize(n, 3);
      for (int i = 0; i < n; ++i) {
        const double t = 1.5 * pi * (1.0 + 2.0 * unif(rng));
        const double h = 21.0 * unif(rng);
        s.points(i, 0) = t * std::cos(t);
        s.points(i, 1) = h;
        s.points(i, 2) = t * std::sin(t);
        s.intrinsic(i, 0) = spiral_arc_length(t);
        s.intrinsic(i, 1) = h;
        s.intrinsic(i, 2) = t;
        s.classes[static_cast<std::size_t>(i)] = t < 3.0 * pi ? 0 : 1;
      }
      break;
    }
    case ManifoldKind::blobs: {
      const double sigma = noise > 0.0 ? noise : 1.0;
      s.points.resize(n, 2);
      s.intrinsic.resize(n, 2);
      for (int i = 0; i < n; ++i) {
        const int c = i < n / 2 ? 0 : 1;
        const double cx = c == 0 ? -5.0 * sigma : 5.0 * sigma;
        s.points(i, 0) = cx + sigma * gauss(rng);
        s.points(i, 1) = sigma * gauss(rng);
        s.intrinsic.row(i) = s.points.row(i);
        s.classes[static_cast<std::size_t>(i)] = c;
      }
      return s;  // noise already applied
    }
    case ManifoldKind::flat_grid: {
      Eigen::Vector3d dir(1.0, 2.0, 2.0);
      dir /= 3.0;
      s.points.resize(n, 3);
      s.intrinsic.resize(n, 1);
      for (int i = 0; i < n; ++i) {
        s.points.row(i) = (static_cast<double>(i) * dir).transpose();
        s.intrinsic(i, 0) = i;
        s.classes[static_cast<std::size_t>(i)] = i < n / 2 ? 0 : 1;
      }
      break;
    }
    case ManifoldKind::arc: {
      s.points.resize(n, 2);
      s.intrinsic.resize(n, 1);
      for (int i = 0; i < n; ++i) {
        const double t = pi * i / (n - 1);
        s.points(i, 0) = std::cos(t);
        s.points(i, 1) = std::sin(t);
        s.intrinsic(i, 0) = t;
        s.classes[static_cast<std::size_t>(i)] = i < n / 2 ? 0 : 1;
      }
      break;
    }
  }
  if (noise > 0.0)
    for (Eigen::Index i = 0; i < s.points.rows(); ++i)
      for (Eigen::Index c = 0; c < s.points.cols(); ++c) s.points(i, c) += noise * gauss(rng);
  return s;
}

}  // namespace relop
