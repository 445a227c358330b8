#pragma once

// Stage runner behind the `relop` command. Each stage reads declared inputs
// from the work directory (or configured paths), writes its outputs there,
// and appends one JSON line to manifest.jsonl.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "relop/aggregate.hpp"
#include "relop/checks.hpp"
#include "relop/config.hpp"
#include "relop/corpus.hpp"
#include "relop/hashtag_network.hpp"
#include "relop/lnp.hpp"
#include "relop/manifold.hpp"
#include "relop/oowe.hpp"
#include "relop/svg.hpp"
#include "relop/synth.hpp"

namespace relop::cli {

namespace fs = std::filesystem;

/// Raised when `verify` finds a failing check (exit code 3).
struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> s{"synth", "ingest", "hashtag-net", "label-tweets", "train", "aggregate",
                                          "embed", "predict", "sweep", "metrics", "plot", "verify"};
  return s;
}

class Stage {
public:
  Stage(std::string name, const Config& cfg, std::ostream& log)
      : name_(std::move(name)), cfg_(cfg), log_(log), work_(cfg.str("work_dir")) {}

  const Config& cfg() const { return cfg_; }
  std::ostream& log() { return log_; }
  std::uint64_t seed() const { return cfg_.stage_seed(name_); }

  std::string path(const std::string& file) const { return (fs::path(work_) / file).string(); }

  /// Configured path when set, else the work-directory default.
  std::string input_path(const std::string& key, const std::string& file) const {
    const auto& v = cfg_.str(key);
    return v.empty() ? path(file) : v;
  }

  std::string read(const std::string& p) {
    if (!fs::exists(p)) throw DataError("missing input: " + p);
    std::string content = read_file(p);
    inputs_[p] = hex64(fnv1a(content));
    return content;
  }

  std::istringstream open(const std::string& p) { return std::istringstream(read(p)); }

  void write(const std::string& file, const std::string& content) {
    const std::string p = path(file);
    outputs_.push_back(p);
    write_file(p, content);
    output_hashes_[p] = hex64(fnv1a(content));
  }

  template <class T>
  void count(const std::string& key, const T& value) {
    counts_[key] = value;
  }

  void remove_outputs() {
    std::error_code ec;
    for (const auto& p : outputs_) fs::remove(p, ec);
  }

  nlohmann::ordered_json manifest(double millis) const {
    nlohmann::ordered_json j;
    j["stage"] = name_;
    j["config_hash"] = cfg_.hash();
    j["seed"] = seed();
    j["duration_ms"] = millis;
    j["counts"] = counts_;
    j["inputs"] = nlohmann::ordered_json::object();
    for (const auto& [p, h] : inputs_) j["inputs"][p] = h;
    j["outputs"] = nlohmann::ordered_json::object();
    for (const auto& [p, h] : output_hashes_) j["outputs"][p] = h;
    return j;
  }

private:
  std::string name_;
  const Config& cfg_;
  std::ostream& log_;
  std::string work_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::map<std::string, std::string> output_hashes_;
  nlohmann::ordered_json counts_ = nlohmann::ordered_json::object();
};

// ---------------------------------------------------------------------------
// Shared readers

struct TweetRow {
  std::string id;
  std::string user_id;
  std::optional<std::string> state;
  std::vector<std::string> tokens;
};

inline std::string tweets_tsv(const std::vector<TweetRow>& rows) {
  std::string out = "id\tuser_id\tstate\ttokens\n";
  for (const auto& r : rows) out += r.id + "\t" + r.user_id + "\t" + r.state.value_or("") + "\t" + join(r.tokens, " ") + "\n";
  return out;
}

inline std::vector<TweetRow> read_tweets_tsv(std::istream& in) {
  std::vector<TweetRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    auto c = split(line, '\t');
    if (c.size() != 4) throw DataError("tweets table: expected id, user_id, state, tokens");
    TweetRow r{c[0], c[1], c[2].empty() ? std::nullopt : std::optional(c[2]), split_ws(c[3])};
    rows.push_back(std::move(r));
  }
  return rows;
}

inline SmacofOptions smacof_options(const Config& cfg) {
  SmacofOptions o;
  o.max_iters = static_cast<int>(cfg.integer("mds.max_iters"));
  o.tol = cfg.num("mds.tol");
  return o;
}

/// Truth or label CSV restricted to the ids of a point set, aligned by row.
inline std::vector<int> align_labels(const PointSet& ps, const std::map<std::string, int>& labels, bool require_all,
                                     const std::string& what) {
  std::vector<int> out;
  for (const auto& id : ps.ids) {
    auto it = labels.find(id);
    if (it == labels.end()) {
      if (require_all) throw DataError(what + ": no entry for " + id);
      out.push_back(kUnlabeled);
    } else {
      out.push_back(it->second);
    }
  }
  return out;
}

inline std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Stages

inline void stage_synth(Stage& st) {
  const auto& cfg = st.cfg();
  SynthCorpusConfig sc;
  sc.classes = static_cast<int>(cfg.integer("synth.classes"));
  sc.tweets_per_class = static_cast<int>(cfg.integer("synth.tweets_per_class"));
  sc.users = static_cast<int>(cfg.integer("synth.users"));
  sc.lexicon_size = static_cast<int>(cfg.integer("synth.lexicon_size"));
  sc.neutral_vocab = static_cast<int>(cfg.integer("synth.neutral_vocab"));
  sc.tokens_per_tweet = static_cast<int>(cfg.integer("synth.tokens_per_tweet"));
  sc.planted_per_class = static_cast<int>(cfg.integer("synth.planted_per_class"));
  sc.noise_hashtags = static_cast<int>(cfg.integer("synth.noise_hashtags"));
  sc.seed = st.seed();
  SynthCorpus corpus;
  try {
    corpus = gen_opinion_corpus(sc);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::string posts;
  for (const auto& p : corpus.posts) posts += to_json_line(p) + "\n";
  st.write("posts.jsonl", posts);
  st.write("synth_truth.tsv", synth_truth_tsv(corpus.truth));

  const auto kind = parse_manifold_kind(cfg.str("synth.manifold"));
  const auto sample = gen_manifold(kind, static_cast<int>(cfg.integer("synth.manifold_n")),
                                   cfg.num("synth.manifold_noise"), derive_seed(st.seed(), "manifold"));
  PointSet ps{sample.points, {}};
  std::map<std::string, int> truth;
  for (Eigen::Index i = 0; i < sample.points.rows(); ++i) {
    ps.ids.push_back("p" + std::to_string(i));
    truth[ps.ids.back()] = sample.classes[static_cast<std::size_t>(i)];
  }
  st.write("manifold_points.tsv", point_set_tsv(ps));
  st.write("manifold_truth.csv", labels_csv(truth));
  st.count("posts", corpus.posts.size());
  st.count("users", corpus.users.size());
  st.count("manifold_points", ps.size());
}

inline void stage_ingest(Stage& st) {
  const auto& cfg = st.cfg();
  auto in = st.open(st.input_path("ingest.posts", "posts.jsonl"));
  const ParseResult parsed = parse_posts(in);
  Gazetteer gaz = Gazetteer::builtin();
  if (!cfg.str("ingest.gazetteer").empty()) {
    auto g = st.open(cfg.str("ingest.gazetteer"));
    gaz = Gazetteer::from_csv(g);
  }
  auto kw_a = cfg.list("ingest.keywords_a"), kw_b = cfg.list("ingest.keywords_b");
  if (kw_a.empty() || kw_b.empty()) throw UsageError("ingest: keyword groups must be nonempty");
  const auto relevant = filter_relevant(parsed.posts, kw_a, kw_b);
  std::set<std::string> clients = default_official_clients();
  if (!cfg.str("ingest.official_clients").empty()) {
    auto l = cfg.list("ingest.official_clients");
    clients = std::set<std::string>(l.begin(), l.end());
  }
  const auto kept = filter_bots(relevant, clients);

  std::vector<TweetRow> rows;
  std::vector<std::vector<std::string>> docs;
  std::size_t located = 0;
  for (const auto& p : kept.posts) {
    TweetRow r;
    r.id = p.id;
    r.user_id = p.user_id;
    if (auto s = infer_state(p, gaz)) {
      r.state = s->str();
      ++located;
    }
    for (const auto& t : content_tokens(tokenize(p.text))) r.tokens.push_back(t.surface);
    docs.push_back(r.tokens);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("ingest: no posts survive filtering");
  const Vocabulary vocab = build_vocab(docs, cfg.integer("ingest.min_count"));
  st.write("tweets.tsv", tweets_tsv(rows));
  st.write("vocab.tsv", vocab.to_tsv());
  st.count("parsed", parsed.posts.size());
  st.count("skipped_lines", parsed.skipped);
  st.count("relevant", relevant.size());
  st.count("retained", kept.posts.size());
  st.count("retained_fraction", kept.retained_fraction);
  st.count("located", located);
  st.count("vocab_size", vocab.size());
}

inline std::vector<std::vector<std::string>> hashtags_per_tweet(const std::vector<TweetRow>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    std::vector<std::string> tags;
    for (const auto& t : r.tokens)
      if (t.size() > 1 && t[0] == '#') tags.push_back(t);
    out.push_back(std::move(tags));
  }
  return out;
}

inline void stage_hashtag_net(Stage& st) {
  const auto& cfg = st.cfg();
  auto in = st.open(st.path("tweets.tsv"));
  const auto rows = read_tweets_tsv(in);
  auto seeds = default_seed_hashtags();
  if (!cfg.str("hashtag.seeds").empty()) {
    auto s = st.open(cfg.str("hashtag.seeds"));
    seeds = read_seed_csv(s);
  }
  const auto graph = build_cooccurrence(hashtags_per_tweet(rows));
  const auto sig = significance_filter(graph, cfg.num("hashtag.p_o"));
  Rng rng(st.seed());
  LpaOptions lo;
  lo.max_sweeps = static_cast<int>(cfg.integer("hashtag.max_sweeps"));
  lo.weighted = cfg.flag("hashtag.weighted");
  const auto lpa = propagate_hashtag_labels(sig, seeds, rng, lo);
  const auto occ = occurrence_map(sig);
  const auto kept = prune_labels(lpa.labels, occ, cfg.num("hashtag.r"));
  if (!lpa.converged) st.log() << "warning: hashtag label propagation stopped before convergence\n";
  st.write("hashtag_edges.tsv", graph_edges_tsv(sig));
  st.write("hashtag_labels.csv", label_map_csv(kept, occ));
  st.count("vertices", graph.tags.size());
  st.count("edges", graph.edges.size());
  st.count("significant_edges", sig.edges.size());
  st.count("labeled", lpa.labels.size());
  st.count("kept_after_pruning", kept.size());
  st.count("sweeps", lpa.sweeps);
  st.count("converged", lpa.converged);
}

inline std::map<std::string, OpinionLabel> read_hashtag_labels(Stage& st) {
  auto in = st.open(st.path("hashtag_labels.csv"));
  return read_label_map_csv(in);
}

inline void stage_label_tweets(Stage& st) {
  auto in = st.open(st.path("tweets.tsv"));
  const auto rows = read_tweets_tsv(in);
  const auto labels = read_hashtag_labels(st);
  std::vector<std::vector<std::string>> docs;
  for (const auto& r : rows) docs.push_back(r.tokens);
  const auto lab = label_tweets(docs, labels, st.cfg().flag("label.keep_labeled_hashtags"));
  std::string per;
  for (std::size_t i = 0; i < rows.size(); ++i) per += rows[i].id + "\t" + to_string(lab.per_tweet[i]) + "\n";
  st.write("training.tsv", lab.training.to_tsv());
  st.write("tweet_labels.tsv", per);
  nlohmann::ordered_json counts;
  for (std::size_t c = 0; c < lab.category_counts.size(); ++c)
    counts[kOpinionLabelNames[c]] = lab.category_counts[c];
  st.count("categories", counts);
  st.count("training_examples", lab.training.examples.size());
}

inline OoweConfig oowe_config(const Stage& st) {
  const auto& cfg = st.cfg();
  OoweConfig oc;
  oc.window = static_cast<int>(cfg.integer("oowe.window"));
  oc.embed_dim = static_cast<int>(cfg.integer("oowe.embed_dim"));
  oc.hidden_dim = static_cast<int>(cfg.integer("oowe.hidden_dim"));
  oc.learning_rate = cfg.num("oowe.learning_rate");
  oc.alpha = cfg.num("oowe.alpha");
  oc.epochs = static_cast<int>(cfg.integer("oowe.epochs"));
  oc.categories = kOpinionCategories;
  oc.seed = st.seed();
  try {
    oc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return oc;
}

inline Vocabulary read_vocab(Stage& st) {
  auto in = st.open(st.path("vocab.tsv"));
  return Vocabulary::from_tsv(in);
}

inline OoweModel read_model(Stage& st, const std::string& p) {
  auto in = st.open(p);
  return load_model(in);
}

inline void stage_train(Stage& st) {
  auto in = st.open(st.path("training.tsv"));
  const auto ts = TrainingSet::from_tsv(in);
  const auto vocab = read_vocab(st);
  const auto report = train(ts, vocab, oowe_config(st));
  std::ostringstream model;
  save_model(report.model, model);
  st.write("model.bin", model.str());
  st.write("embeddings.tsv", embeddings_tsv(report.model, vocab));
  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
    loss += std::to_string(e + 1) + "," + format_double(report.epoch_loss[e]) + "\n";
  st.write("train_loss.csv", loss);
  st.count("examples", ts.examples.size());
  st.count("epochs", report.epoch_loss.size());
  if (!report.epoch_loss.empty()) st.count("final_loss", report.epoch_loss.back());
}

inline void stage_aggregate(Stage& st) {
  const auto& cfg = st.cfg();
  auto in = st.open(st.path("tweets.tsv"));
  const auto rows = read_tweets_tsv(in);
  const auto vocab = read_vocab(st);
  const auto model = read_model(st, st.path("model.bin"));
  std::set<std::string> excluded;
  if (!cfg.flag("label.keep_labeled_hashtags"))
    for (const auto& [tag, l] : read_hashtag_labels(st)) excluded.insert(tag);
  std::map<std::string, double> population;
  if (!cfg.str("aggregate.population").empty()) {
    auto p = st.open(cfg.str("aggregate.population"));
    population = read_population_csv(p);
  }
  std::vector<AggregationInputTweet> corpus;
  for (const auto& r : rows) corpus.push_back({r.id, r.user_id, r.state, r.tokens});
  const auto res = aggregate(model, vocab, corpus, excluded, population);
  if (res.states.empty()) throw DataError("aggregate: no located users");
  std::vector<OpinionPoint> all = res.tweets;
  all.insert(all.end(), res.users.begin(), res.users.end());
  all.insert(all.end(), res.states.begin(), res.states.end());
  PointSet ps;
  ps.coords.resize(static_cast<Eigen::Index>(res.states.size()), model.dim());
  for (std::size_t i = 0; i < res.states.size(); ++i) {
    ps.ids.push_back(res.states[i].entity_id);
    ps.coords.row(static_cast<Eigen::Index>(i)) = res.states[i].vector.transpose();
  }
  st.write("opinion_points.tsv", opinion_points_tsv(all));
  st.write("state_summary.csv", state_summary_csv(res.summaries));
  st.write("state_points.tsv", point_set_tsv(ps));
  st.count("tweets", res.tweets.size());
  st.count("skipped_tweets", res.skipped_tweets);
  st.count("users", res.users.size());
  st.count("states", res.states.size());
}

inline PointSet read_points(Stage& st, const std::string& key, const std::string& fallback) {
  auto in = st.open(st.input_path(key, fallback));
  return read_point_set_tsv(in);
}

inline std::map<std::string, int> read_labels(Stage& st, const std::string& p) {
  auto in = st.open(p);
  return read_labels_csv(in);
}

inline void stage_embed(Stage& st) {
  const auto ps = read_points(st, "predict.points", "state_points.tsv");
  const int dim = static_cast<int>(st.cfg().integer("embed.dim"));
  if (dim < 1 || dim >= ps.size()) throw UsageError("embed.dim must be in [1, n-1]");
  const auto de = pairwise_euclidean(ps.coords);
  const auto dg = geodesic_distances(ps.coords);
  const auto mds = classical_mds(de.values, dim);
  for (const auto& w : mds.warnings) st.log() << "warning: " << w << "\n";
  st.write("state_mds.tsv", point_set_tsv(PointSet{mds.coords, ps.ids}));
  st.write("distances_euclidean.tsv", distance_matrix_tsv(de.values, ps.ids));
  st.write("distances_geodesic.tsv", distance_matrix_tsv(dg.values, ps.ids));
  st.count("entities", ps.size());
  st.count("geodesic_neighborhood", dg.neighborhood);
}

inline void stage_predict(Stage& st) {
  const auto& cfg = st.cfg();
  LnpProblem prob;
  prob.points = read_points(st, "predict.points", "state_points.tsv");
  const auto labels = read_labels(st, cfg.str("predict.labels"));
  prob.initial = align_labels(prob.points, labels, false, "labels");
  std::size_t unused = 0;
  for (const auto& [id, c] : labels)
    if (std::find(prob.points.ids.begin(), prob.points.ids.end(), id) == prob.points.ids.end()) ++unused;
  prob.classes = static_cast<int>(cfg.integer("predict.classes"));
  prob.k = static_cast<int>(cfg.integer("predict.k"));
  prob.metric = parse_metric(cfg.str("predict.metric"));
  prob.seed = st.seed();
  prob.weights.nonnegative = cfg.flag("lnp.nonnegative");
  prob.smacof = smacof_options(cfg);
  try {
    validate(prob);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto pred = predict(prob);
  if (pred.diagnostics.diverged) st.log() << "warning: label propagation diverged\n";
  else if (!pred.diagnostics.converged) st.log() << "warning: label propagation hit max_iters\n";
  st.write("predictions.csv", predictions_csv(prob.points.ids, pred));
  st.count("entities", prob.points.size());
  st.count("labeled", std::count_if(prob.initial.begin(), prob.initial.end(), [](int c) { return c != kUnlabeled; }));
  st.count("labels_without_point", unused);
  st.count("iterations", pred.diagnostics.iterations);
  st.count("converged", pred.diagnostics.converged);

  if (!cfg.str("predict.truth").empty()) {
    const auto truth_all = read_labels(st, cfg.str("predict.truth"));
    std::map<std::string, int> predicted, truth;
    for (std::size_t i = 0; i < prob.points.ids.size(); ++i) {
      const auto& id = prob.points.ids[i];
      auto it = truth_all.find(id);
      if (it == truth_all.end()) continue;
      truth[id] = it->second;
      predicted[id] = pred.classes[i];
    }
    const auto ev = evaluate_fixture(predicted, truth);
    nlohmann::ordered_json j;
    j["evaluated"] = truth.size();
    j["errors"] = ev.errors;
    j["misses"] = ev.misses;
    st.write("prediction_eval.json", json_text(j));
    st.count("errors", ev.errors);
  }
}

inline std::vector<Metric> metrics_list(const Config& cfg, const std::string& key) {
  std::vector<Metric> out;
  for (const auto& m : cfg.list(key)) {
    try {
      out.push_back(parse_metric(m));
    } catch (const DataError& e) {
      throw UsageError(key + ": " + e.what());
    }
  }
  if (out.empty()) throw UsageError(key + ": no metrics");
  return out;
}

inline void stage_sweep(Stage& st) {
  const auto& cfg = st.cfg();
  const auto ps = read_points(st, "sweep.points", "state_points.tsv");
  const auto truth = align_labels(ps, read_labels(st, cfg.str("sweep.truth")), true, "truth");
  SweepConfig sc;
  sc.label_counts = cfg.int_list("sweep.label_counts");
  sc.ks = k_range(static_cast<int>(cfg.integer("sweep.k_min")), static_cast<int>(cfg.integer("sweep.k_max")));
  sc.metrics = metrics_list(cfg, "sweep.metrics");
  sc.runs = static_cast<int>(cfg.integer("sweep.runs"));
  sc.seed = st.seed();
  sc.classes = 1 + *std::max_element(truth.begin(), truth.end());
  sc.weights.nonnegative = cfg.flag("lnp.nonnegative");
  sc.smacof = smacof_options(cfg);
  if (sc.runs < 1) throw UsageError("sweep.runs must be >= 1");
  const auto rows = sensitivity_sweep(ps.coords, truth, sc);
  std::string summary = "metric,label_count,k,median,lower,upper\n";
  const auto sums = summarize(rows);
  for (const auto& s : sums)
    summary += std::string(to_string(s.metric)) + "," + std::to_string(s.label_count) + "," + std::to_string(s.k) +
               "," + format_double(s.median) + "," + format_double(s.lower) + "," + format_double(s.upper) + "\n";
  st.write("sweep.csv", sweep_csv(rows));
  st.write("sweep_summary.csv", summary);
  st.count("rows", rows.size());
  st.count("entities", ps.size());
}

inline void stage_metrics(Stage& st) {
  const auto& cfg = st.cfg();
  const auto ps = read_points(st, "metrics.points", "state_points.tsv");
  const Metric metric = metrics_list(cfg, "metrics.metric").front();
  const int dim = static_cast<int>(cfg.integer("metrics.dim"));
  std::vector<int> ks;
  for (int k : k_range(static_cast<int>(cfg.integer("metrics.k_min")), static_cast<int>(cfg.integer("metrics.k_max"))))
    if (k >= 2 && k < ps.size()) ks.push_back(k);
  if (ks.empty()) throw UsageError("metrics: empty k range for this point set");
  const int runs = static_cast<int>(cfg.integer("metrics.runs"));
  if (runs < 1) throw UsageError("metrics.runs must be >= 1");
  WeightOptions wopts;
  wopts.nonnegative = cfg.flag("lnp.nonnegative");
  const auto sel = select_k_lle(ps.coords, metric, ks, runs, st.seed(), dim, wopts, smacof_options(cfg));

  // NP and ST on the first run's geometry.
  Rng rng(unfold_seed(st.seed(), 0));
  const Geometry geo = prepare_geometry(ps.coords, metric, rng, smacof_options(cfg));
  const Matrix d_orig = normalize_distances(pairwise_euclidean(ps.coords).values);
  std::string table = "k,np,st,pne_median,pne_lower,pne_upper\n";
  for (std::size_t a = 0; a < ks.size(); ++a) {
    const int k = ks[a];
    const auto W = reconstruction_weights(geo.coords, geo.neighbor_distances, k, wopts);
    const Matrix d_emb = normalize_distances(pairwise_euclidean(lle_embedding(W, std::max(1, std::min(dim, k - 1)))).values);
    table += std::to_string(k) + "," + format_double(neighborhood_preservation(d_orig, d_emb, k)) + "," +
             format_double(stress_measure(d_orig, d_emb)) + "," + format_double(sel.median[a]) + "," +
             format_double(sel.lower[a]) + "," + format_double(sel.upper[a]) + "\n";
  }
  nlohmann::ordered_json j;
  j["metric"] = to_string(metric);
  j["best_k"] = sel.best_k;
  st.write("quality.csv", table);
  st.write("k_selection.json", json_text(j));
  st.count("best_k", sel.best_k);
}

inline void stage_plot(Stage& st) {
  const auto& cfg = st.cfg();
  auto in = st.open(st.path("state_mds.tsv"));
  const auto mds = read_point_set_tsv(in);
  if (mds.coords.cols() < 2) throw DataError("plot: need 2-D coordinates in state_mds.tsv");
  std::map<std::string, int> cls;
  {
    auto p = st.open(st.path("predictions.csv"));
    std::string line;
    std::getline(p, line);
    while (std::getline(p, line)) {
      if (line.empty()) continue;
      auto c = split(line, ',');
      if (c.size() < 2) throw DataError("predictions: malformed row");
      cls[c[0]] = static_cast<int>(parse_int(c[1]));
    }
  }
  std::map<std::string, double> size;
  const std::string channel = cfg.str("plot.size");
  if (channel != "none" && channel != "stddev" && channel != "representativeness")
    throw UsageError("plot.size must be none, stddev or representativeness");
  if (channel != "none" && fs::exists(st.path("state_summary.csv"))) {
    auto s = st.open(st.path("state_summary.csv"));
    std::string line;
    std::getline(s, line);
    while (std::getline(s, line)) {
      if (line.empty()) continue;
      auto c = split(line, ',');
      if (c.size() != 4) throw DataError("state summary: malformed row");
      const std::string& v = channel == "stddev" ? c[2] : c[3];
      if (!v.empty()) size[c[0]] = parse_double(v);
    }
  }
  std::vector<ScatterPoint> pts;
  for (Eigen::Index i = 0; i < mds.size(); ++i) {
    const auto& id = mds.ids[static_cast<std::size_t>(i)];
    ScatterPoint p{id, mds.coords(i, 0), mds.coords(i, 1), cls.count(id) ? cls[id] : 0, std::nullopt};
    if (auto it = size.find(id); it != size.end()) p.size = it->second;
    pts.push_back(p);
  }
  PlotStyle style;
  style.min_radius = cfg.num("plot.min_radius");
  style.max_radius = cfg.num("plot.max_radius");
  st.write("state_scatter.svg", plot_scatter(pts, style));
  std::size_t curves = 0;
  if (fs::exists(st.path("sweep.csv"))) {
    auto s = st.open(st.path("sweep.csv"));
    const auto sums = summarize(read_sweep_csv(s));
    std::set<int> lcs;
    for (const auto& r : sums) lcs.insert(r.label_count);
    for (int lc : lcs) {
      PlotStyle cs;
      cs.title = std::to_string(lc) + " initial labels";
      st.write("error_curves_L" + std::to_string(lc) + ".svg", plot_error_curves(sums, lc, cs));
      ++curves;
    }
  }
  st.count("points", pts.size());
  st.count("error_curve_plots", curves);
}

inline void stage_verify(Stage& st) {
  const auto& cfg = st.cfg();
  Rng rng(st.seed());
  std::vector<oracle::CheckResult> results;
  results.push_back(oracle::check_hypergeometric(40));

  std::string model_path = cfg.str("verify.model");
  if (model_path.empty() && fs::exists(st.path("model.bin"))) model_path = st.path("model.bin");
  if (!model_path.empty()) {
    oracle::CheckResult r{"oowe_gradients", false, INFINITY, 1e-4, ""};
    try {
      const auto model = read_model(st, model_path);
      r = oracle::check_gradients(model, 5, rng);
      r.detail += " model=" + fs::path(model_path).filename().string();
    } catch (const DataError& e) {
      r.detail = std::string("cannot load model: ") + e.what();
    }
    results.push_back(r);
  } else {
    OoweConfig oc;
    oc.embed_dim = 8;
    oc.hidden_dim = 6;
    oc.categories = 4;
    const auto model = OoweModel::random(30, oc, rng);
    auto r = oracle::check_gradients(model, 10, rng);
    r.detail += " model=random";
    results.push_back(r);
  }
  results.push_back(oracle::check_weights(20, rng));
  results.push_back(oracle::check_harmonic(10, rng));
  results.push_back(oracle::check_procrustes_mds(10, rng, 1e-8, 60));

  std::string report;
  bool ok = true;
  for (const auto& r : results) {
    report += r.line() + "\n";
    ok = ok && r.passed;
  }
  st.log() << report;
  st.write("verify_report.txt", report);
  st.count("checks", results.size());
  st.count("passed", std::count_if(results.begin(), results.end(), [](const auto& r) { return r.passed; }));
  if (!ok) throw VerificationFailure("verification failed");
}

// ---------------------------------------------------------------------------
// Runner

class WorkLock {
public:
  explicit WorkLock(const std::string& dir) : path_((fs::path(dir) / ".relop.lock").string()) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw DataError("work directory is locked by another run: " + path_);
  }
  ~WorkLock() {
    ::close(fd_);
    ::unlink(path_.c_str());
  }
  WorkLock(const WorkLock&) = delete;
  WorkLock& operator=(const WorkLock&) = delete;

private:
  std::string path_;
  int fd_ = -1;
};

/// Runs one stage. Throws UsageError, DataError or VerificationFailure; on any
/// failure other than a verification verdict the stage's outputs are removed.
inline void run_stage(const std::string& name, const Config& cfg, std::ostream& log) {
  static const std::map<std::string, std::function<void(Stage&)>> table{
      {"synth", stage_synth},       {"ingest", stage_ingest},   {"hashtag-net", stage_hashtag_net},
      {"label-tweets", stage_label_tweets}, {"train", stage_train}, {"aggregate", stage_aggregate},
      {"embed", stage_embed},       {"predict", stage_predict}, {"sweep", stage_sweep},
      {"metrics", stage_metrics},   {"plot", stage_plot},       {"verify", stage_verify}};
  auto it = table.find(name);
  if (it == table.end()) throw UsageError("unknown stage: " + name);
  const std::string work = cfg.str("work_dir");
  std::error_code ec;
  fs::create_directories(work, ec);
  if (ec) throw DataError("cannot create work directory " + work + ": " + ec.message());
  WorkLock lock(work);
  Stage st(name, cfg, log);
  const auto t0 = std::chrono::steady_clock::now();
  bool verdict_failed = false;
  try {
    it->second(st);
  } catch (const VerificationFailure&) {
    verdict_failed = true;
  } catch (...) {
    st.remove_outputs();
    throw;
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream manifest(fs::path(work) / "manifest.jsonl", std::ios::app);
  manifest << st.manifest(ms).dump() << "\n";
  if (verdict_failed) throw VerificationFailure("verification failed");
}

}  // namespace relop::cli
