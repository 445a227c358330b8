#pragma once

// Flat `key = value` configuration with command-line overrides and a single
// canonical dump. Every key has a default; unknown keys are usage errors.

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "relop/common.hpp"

namespace relop {

class Config {
  template <class F>
  static auto wrap(const std::string& key, F f) -> decltype(f()) {
    try {
      return f();
    } catch (const DataError& e) {
      throw UsageError(key + ": " + e.what());
    }
  }

public:
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d{
        {"seed", "1"},
        {"work_dir", "work"},

        {"synth.classes", "4"},
        {"synth.tweets_per_class", "250"},
        {"synth.users", "300"},
        {"synth.lexicon_size", "30"},
        {"synth.neutral_vocab", "200"},
        {"synth.tokens_per_tweet", "12"},
        {"synth.planted_per_class", "6"},
        {"synth.noise_hashtags", "40"},
        {"synth.manifold", "two_moons"},
        {"synth.manifold_n", "100"},
        {"synth.manifold_noise", "0.08"},

        {"ingest.posts", ""},
        {"ingest.gazetteer", ""},
        {"ingest.keywords_a", "trump,realdonaldtrump,donaldtrump"},
        {"ingest.keywords_b", "hillary,clinton,hillaryclinton"},
        {"ingest.official_clients", ""},
        {"ingest.min_count", "5"},

        {"hashtag.p_o", "1e-06"},
        {"hashtag.r", "0.001"},
        {"hashtag.seeds", ""},
        {"hashtag.max_sweeps", "100"},
        {"hashtag.weighted", "false"},

        {"label.keep_labeled_hashtags", "false"},

        {"oowe.window", "3"},
        {"oowe.embed_dim", "50"},
        {"oowe.hidden_dim", "20"},
        {"oowe.learning_rate", "0.1"},
        {"oowe.alpha", "0.5"},
        {"oowe.epochs", "10"},

        {"aggregate.population", ""},

        {"mds.max_iters", "500"},
        {"mds.tol", "1e-09"},

        {"embed.dim", "2"},

        {"predict.points", ""},
        {"predict.labels", "data/initial_labels_8.csv"},
        {"predict.truth", "data/outcome_2016.csv"},
        {"predict.k", "10"},
        {"predict.metric", "geodesic"},
        {"predict.classes", "2"},
        {"lnp.nonnegative", "true"},

        {"sweep.points", ""},
        {"sweep.truth", "data/outcome_2016.csv"},
        {"sweep.label_counts", "4,8,12,16"},
        {"sweep.k_min", "2"},
        {"sweep.k_max", "25"},
        {"sweep.runs", "50"},
        {"sweep.metrics", "euclidean,geodesic"},

        {"metrics.points", ""},
        {"metrics.metric", "geodesic"},
        {"metrics.k_min", "2"},
        {"metrics.k_max", "25"},
        {"metrics.runs", "50"},
        {"metrics.dim", "2"},

        {"plot.size", "stddev"},
        {"plot.min_radius", "3"},
        {"plot.max_radius", "12"},

        {"verify.model", ""},
    };
    return d;
  }

  Config() : values_(defaults()) {}

  /// Parses `key = value` lines; `#` starts a comment line. Returns the
  /// number of keys read.
  std::size_t load(std::string_view text, const std::string& origin = "config") {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0, count = 0;
    std::map<std::string, bool> seen;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(std::string_view(t).substr(0, eq));
      if (seen[key]) throw UsageError(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
      seen[key] = true;
      set(key, trim(std::string_view(t).substr(eq + 1)));
      ++count;
    }
    return count;
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key: " + key);
    it->second = value;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key: " + key);
    return it->second;
  }

  double num(const std::string& key) const { return wrap(key, [&] { return parse_double(str(key)); }); }
  long long integer(const std::string& key) const { return wrap(key, [&] { return parse_int(str(key)); }); }
  std::uint64_t u64(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw UsageError(key + ": must be nonnegative");
    return static_cast<std::uint64_t>(v);
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError(key + ": expected true or false, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    for (auto& p : split(str(key), ','))
      if (auto t = trim(p); !t.empty()) out.push_back(t);
    return out;
  }

  std::vector<int> int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& p : list(key)) out.push_back(static_cast<int>(wrap(key, [&] { return parse_int(p); })));
    return out;
  }

  /// Sorted `key = value` lines; the bit-exact form hashed into manifests.
  std::string dump() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  std::string hash() const { return hex64(fnv1a(dump())); }

  /// Per-stage seed derived from the master seed and the stage name.
  std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(u64("seed"), stage); }

private:
  std::map<std::string, std::string> values_;
};

}  // namespace relop
