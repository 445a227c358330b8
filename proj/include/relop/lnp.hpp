#pragma once

// Linear neighborhood propagation: each point is reconstructed from its k
// nearest neighbors with sum-to-one weights, and the same weights carry
// labels from the labeled points to the rest until a fixed point.
//
// The geodesic variant first replaces the points with an MDS unfolding of
// their graph-geodesic distances and picks neighbors by geodesic distance.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "relop/common.hpp"
#include "relop/manifold.hpp"

namespace relop {

/// Sparse row-stochastic weights: row i reconstructs point i from neighbors[i].
struct WeightMatrix {
  std::vector<std::vector<int>> neighbors;
  std::vector<std::vector<double>> weights;

  int size() const { return static_cast<int>(neighbors.size()); }

  Matrix dense() const {
    const int n = size();
    Matrix W = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (std::size_t a = 0; a < neighbors[static_cast<std::size_t>(i)].size(); ++a)
        W(i, neighbors[static_cast<std::size_t>(i)][a]) += weights[static_cast<std::size_t>(i)][a];
    return W;
  }
};

struct WeightOptions {
  double regularization = 1e-3;
  // false gives the plain sum-to-one solve, whose weights may be negative
  bool nonnegative = true;
};

namespace detail {

inline Eigen::VectorXd solve_sum_to_one(const Matrix& G) {
  const Eigen::Index k = G.rows();
  Eigen::VectorXd w = G.ldlt().solve(Eigen::VectorXd::Ones(k));
  if (!w.allFinite()) w = G.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(k));
  return w / w.sum();
}

// Drops the most negative weight and re-solves on the remaining support until
// all weights are nonnegative.
inline Eigen::VectorXd solve_nonnegative(const Matrix& G) {
  const Eigen::Index k = G.rows();
  std::vector<Eigen::Index> active(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) active[static_cast<std::size_t>(i)] = i;
  while (true) {
    const auto m = static_cast<Eigen::Index>(active.size());
    Matrix sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = G(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(b)]);
    Eigen::VectorXd ws = solve_sum_to_one(sub);
    Eigen::Index worst = 0;
    for (Eigen::Index a = 1; a < m; ++a)
      if (ws[a] < ws[worst]) worst = a;
    if (ws[worst] >= 0.0 || m == 1) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
      for (Eigen::Index a = 0; a < m; ++a) w[active[static_cast<std::size_t>(a)]] = std::max(0.0, ws[a]);
      return w / w.sum();
    }
    active.erase(active.begin() + worst);
  }
}

}  // namespace detail

/// Regularized local Gram matrix of point i: G_jm = (x_i - x_j).(x_i - x_m)
/// plus eps * trace(G)/k on the diagonal (eps alone when the trace is zero).
inline Matrix local_gram(const Matrix& X, int i, const std::vector<int>& nbrs, double eps) {
  const auto k = static_cast<Eigen::Index>(nbrs.size());
  Matrix Z(k, X.cols());
  for (Eigen::Index a = 0; a < k; ++a) Z.row(a) = X.row(i) - X.row(nbrs[static_cast<std::size_t>(a)]);
  Matrix G = Z * Z.transpose();
  const double tr = G.trace();
  G.diagonal().array() += tr > 0.0 ? eps * tr / static_cast<double>(k) : eps;
  return G;
}

/// Sum-to-one reconstruction weights over the k nearest neighbors, where
/// neighbors are ranked by `neighbor_distances` and reconstruction happens
/// in the coordinates `X`.
inline WeightMatrix reconstruction_weights(const Matrix& X, const Matrix& neighbor_distances, int k,
                                           const WeightOptions& opts = {}) {
  const int n = static_cast<int>(X.rows());
  if (neighbor_distances.rows() != n || neighbor_distances.cols() != n)
    throw std::invalid_argument("reconstruction_weights: distance matrix shape mismatch");
  if (k < 1 || k >= n) throw std::invalid_argument("reconstruction_weights: require 1 <= k < n");
  WeightMatrix W;
  W.neighbors = knn_from_distances(neighbor_distances, k);
  W.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Matrix G = local_gram(X, i, W.neighbors[static_cast<std::size_t>(i)], opts.regularization);
    const Eigen::VectorXd w = opts.nonnegative ? detail::solve_nonnegative(G) : detail::solve_sum_to_one(G);
    W.weights[static_cast<std::size_t>(i)].assign(w.data(), w.data() + w.size());
  }
  return W;
}

inline WeightMatrix reconstruction_weights(const Matrix& X, int k, const WeightOptions& opts = {}) {
  return reconstruction_weights(X, pairwise_euclidean(X).values, k, opts);
}

// ---------------------------------------------------------------------------
// Propagation

inline constexpr int kUnlabeled = -1;

struct PropagateOptions {
  double tol = 1e-9;
  int max_iters = 10000;
  double divergence_limit = 1e6;
};

struct PropagationResult {
  Matrix labels;  // n x C soft scores
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

/// Synchronous sweeps l_i <- sum_j w_ij l_j over unlabeled rows; labeled rows
/// stay one-hot. Unlabeled rows start at zero. Stops when the largest entry
/// change drops below tol, after max_iters, or when an entry exceeds the
/// divergence limit in magnitude.
inline PropagationResult propagate(const WeightMatrix& W, const std::vector<int>& initial, int classes,
                                   const PropagateOptions& opts = {}) {
  const int n = W.size();
  if (static_cast<int>(initial.size()) != n) throw std::invalid_argument("propagate: label vector size mismatch");
  if (classes < 1) throw std::invalid_argument("propagate: need at least one class");
  PropagationResult out;
  out.labels = Matrix::Zero(n, classes);
  std::vector<int> unlabeled;
  for (int i = 0; i < n; ++i) {
    const int c = initial[static_cast<std::size_t>(i)];
    if (c == kUnlabeled) {
      unlabeled.push_back(i);
    } else {
      if (c < 0 || c >= classes) throw std::invalid_argument("propagate: class index out of range");
      out.labels(i, c) = 1.0;
    }
  }
  if (unlabeled.empty()) {
    out.converged = true;
    return out;
  }
  Matrix next = out.labels;
  for (int it = 0; it < opts.max_iters; ++it) {
    double change = 0.0, magnitude = 0.0;
    for (int i : unlabeled) {
      const auto& nb = W.neighbors[static_cast<std::size_t>(i)];
      const auto& wt = W.weights[static_cast<std::size_t>(i)];
      for (int c = 0; c < classes; ++c) {
        double v = 0.0;
        for (std::size_t a = 0; a < nb.size(); ++a) v += wt[a] * out.labels(nb[a], c);
        change = std::max(change, std::abs(v - out.labels(i, c)));
        magnitude = std::max(magnitude, std::abs(v));
        next(i, c) = v;
      }
    }
    out.labels.swap(next);
    for (int i : unlabeled) next.row(i) = out.labels.row(i);
    out.iterations = it + 1;
    if (!(magnitude <= opts.divergence_limit)) {
      out.diverged = true;
      break;
    }
    if (change < opts.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Row argmax; ties go to the lowest class index.
inline std::vector<int> discretize(const Matrix& labels) {
  std::vector<int> out(static_cast<std::size_t>(labels.rows()), 0);
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < labels.cols(); ++c)
      if (labels(i, c) > labels(i, best)) best = static_cast<int>(c);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline Matrix one_hot(const std::vector<int>& classes, int C) {
  Matrix M = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), C);
  for (std::size_t i = 0; i < classes.size(); ++i) M(static_cast<Eigen::Index>(i), classes[i]) = 1.0;
  return M;
}

// ---------------------------------------------------------------------------
// Geometry

struct Unfolding {
  Matrix coords;            // X', same dimensionality as the input
  DistanceMatrix geodesic;  // of the input points
  SmacofResult smacof;
};

/// MDS reconstruction of the geodesic distances at the input dimensionality.
inline Unfolding unfold(const Matrix& X, Rng& rng, const SmacofOptions& opts = {}) {
  Unfolding u;
  u.geodesic = geodesic_distances(X);
  u.smacof = smacof_mds(u.geodesic.values, static_cast<int>(X.cols()), rng, opts);
  u.coords = u.smacof.coords;
  return u;
}

/// Coordinates used for reconstruction plus the distances used to rank neighbors.
struct Geometry {
  Matrix coords;
  Matrix neighbor_distances;
};

inline Geometry prepare_geometry(const Matrix& X, Metric metric, Rng& rng, const SmacofOptions& opts = {}) {
  if (metric == Metric::euclidean) return {X, pairwise_euclidean(X).values};
  Unfolding u = unfold(X, rng, opts);
  return {std::move(u.coords), std::move(u.geodesic.values)};
}

/// Bottom non-constant eigenvectors of (I - W)^T (I - W).
inline Matrix lle_embedding(const WeightMatrix& W, int dim) {
  const int n = W.size();
  if (dim < 1 || dim >= n) throw std::invalid_argument("lle_embedding: require 1 <= dim < n");
  const Matrix IW = Matrix::Identity(n, n) - W.dense();
  const Matrix M = IW.transpose() * IW;
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success) throw std::runtime_error("lle_embedding: eigendecomposition failed");
  return es.eigenvectors().middleCols(1, dim);
}

// ---------------------------------------------------------------------------
// Prediction

struct LnpProblem {
  PointSet points;
  std::vector<int> initial;  // class index per point, kUnlabeled if unknown
  int classes = 2;
  int k = 5;
  Metric metric = Metric::geodesic;
  std::uint64_t seed = 1;
  WeightOptions weights;
  PropagateOptions propagation;
  SmacofOptions smacof;
};

struct Prediction {
  std::vector<int> classes;
  Matrix scores;
  PropagationResult diagnostics;
  WeightMatrix weights;
};

inline Prediction predict_with_geometry(const Geometry& geo, const std::vector<int>& initial, int classes, int k,
                                        const WeightOptions& wopts, const PropagateOptions& popts) {
  Prediction p;
  p.weights = reconstruction_weights(geo.coords, geo.neighbor_distances, k, wopts);
  p.diagnostics = propagate(p.weights, initial, classes, popts);
  p.scores = p.diagnostics.labels;
  p.classes = discretize(p.scores);
  return p;
}

inline void validate(const LnpProblem& prob) {
  const auto n = static_cast<std::size_t>(prob.points.size());
  if (prob.initial.size() != n) throw std::invalid_argument("lnp: one initial label per point required");
  if (prob.k < 2) throw std::invalid_argument("lnp: k must be >= 2");
  if (static_cast<std::size_t>(prob.k) >= n) throw std::invalid_argument("lnp: k must be < n");
  if (prob.classes < 1) throw std::invalid_argument("lnp: classes must be >= 1");
  for (int c : prob.initial)
    if (c != kUnlabeled && (c < 0 || c >= prob.classes)) throw std::invalid_argument("lnp: class out of range");
}

/// Neighbors, optional unfolding, weights, propagation, discretization.
inline Prediction predict(const LnpProblem& prob) {
  validate(prob);
  Rng rng(prob.seed);
  const Geometry geo = prepare_geometry(prob.points.coords, prob.metric, rng, prob.smacof);
  return predict_with_geometry(geo, prob.initial, prob.classes, prob.k, prob.weights, prob.propagation);
}

// ---------------------------------------------------------------------------
// Sensitivity protocol

/// Balanced random labels: label_count / C entities per class drawn from the
/// truth, or every entity when label_count >= n.
inline std::vector<int> draw_initial_labels(const std::vector<int>& truth, int classes, int label_count, Rng& rng) {
  const int n = static_cast<int>(truth.size());
  if (label_count >= n) return truth;
  std::vector<int> out(truth.size(), kUnlabeled);
  const int quota = label_count / classes;
  for (int c = 0; c < classes; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (truth[static_cast<std::size_t>(i)] == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (int a = 0; a < std::min<int>(quota, static_cast<int>(members.size())); ++a)
      out[static_cast<std::size_t>(members[static_cast<std::size_t>(a)])] = c;
  }
  return out;
}

/// Errors over the unlabeled entities only.
inline int count_errors(const std::vector<int>& predicted, const std::vector<int>& truth, const std::vector<int>& initial) {
  int errors = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (initial[i] == kUnlabeled && predicted[i] != truth[i]) ++errors;
  return errors;
}

struct SweepRow {
  Metric metric = Metric::euclidean;
  int label_count = 0;
  int k = 0;
  int run = 0;
  int errors = 0;
};

struct SweepSummary {
  Metric metric = Metric::euclidean;
  int label_count = 0;
  int k = 0;
  double median = 0.0;
  double lower = 0.0;  // 2.5th percentile
  double upper = 0.0;  // 97.5th percentile
};

struct SweepConfig {
  std::vector<int> label_counts{4, 8, 12, 16};
  std::vector<int> ks;  // default 2..25
  std::vector<Metric> metrics{Metric::euclidean, Metric::geodesic};
  int runs = 50;
  std::uint64_t seed = 1;
  int classes = 2;
  WeightOptions weights;
  PropagateOptions propagation;
  SmacofOptions smacof;
};

inline std::vector<int> k_range(int lo, int hi) {
  std::vector<int> ks;
  for (int k = lo; k <= hi; ++k) ks.push_back(k);
  return ks;
}

/// Seed of the random unfolding for one run.
inline std::uint64_t unfold_seed(std::uint64_t seed, int run) {
  return derive_seed(seed, static_cast<std::uint64_t>(run), 1);
}

/// Seed of the initial-label draw for one (run, label count) cell.
inline std::uint64_t label_seed(std::uint64_t seed, int run, int label_count) {
  return derive_seed(seed, static_cast<std::uint64_t>(run), 1000 + static_cast<std::uint64_t>(label_count));
}

/// Every (metric, label count, k, run) cell: random balanced labels from the
/// truth, prediction, and the error count over unlabeled entities. The
/// unfolding of a run is shared across its k and label-count cells.
inline std::vector<SweepRow> sensitivity_sweep(const Matrix& X, const std::vector<int>& truth, const SweepConfig& cfg) {
  std::vector<int> ks = cfg.ks.empty() ? k_range(2, 25) : cfg.ks;
  const int n = static_cast<int>(X.rows());
  ks.erase(std::remove_if(ks.begin(), ks.end(), [n](int k) { return k < 2 || k >= n; }), ks.end());
  std::vector<SweepRow> rows;
  for (Metric metric : cfg.metrics) {
    for (int run = 0; run < cfg.runs; ++run) {
      Rng geo_rng(unfold_seed(cfg.seed, run));
      const Geometry geo = prepare_geometry(X, metric, geo_rng, cfg.smacof);
      std::vector<std::vector<int>> initial;
      for (int lc : cfg.label_counts) {
        Rng lrng(label_seed(cfg.seed, run, lc));
        initial.push_back(draw_initial_labels(truth, cfg.classes, lc, lrng));
      }
      for (int k : ks) {
        const WeightMatrix W = reconstruction_weights(geo.coords, geo.neighbor_distances, k, cfg.weights);
        for (std::size_t a = 0; a < cfg.label_counts.size(); ++a) {
          const auto res = propagate(W, initial[a], cfg.classes, cfg.propagation);
          const auto pred = discretize(res.labels);
          rows.push_back({metric, cfg.label_counts[a], k, run, count_errors(pred, truth, initial[a])});
        }
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tuple(static_cast<int>(a.metric), a.label_count, a.k, a.run) <
           std::tuple(static_cast<int>(b.metric), b.label_count, b.k, b.run);
  });
  return rows;
}

inline std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
  std::map<std::tuple<int, int, int>, std::vector<double>> cells;
  for (const auto& r : rows) cells[{static_cast<int>(r.metric), r.label_count, r.k}].push_back(r.errors);
  std::vector<SweepSummary> out;
  for (const auto& [key, vals] : cells) {
    SweepSummary s;
    s.metric = static_cast<Metric>(std::get<0>(key));
    s.label_count = std::get<1>(key);
    s.k = std::get<2>(key);
    s.median = median(vals);
    s.lower = quantile(vals, 0.025);
    s.upper = quantile(vals, 0.975);
    out.push_back(s);
  }
  return out;
}

/// CSV `metric,label_count,k,run,errors`.
inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "metric,label_count,k,run,errors\n";
  for (const auto& r : rows)
    out += std::string(to_string(r.metric)) + "," + std::to_string(r.label_count) + "," + std::to_string(r.k) + "," +
           std::to_string(r.run) + "," + std::to_string(r.errors) + "\n";
  return out;
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::vector<SweepRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (trim(line).empty()) continue;
    auto c = split(line, ',');
    if (c.size() != 5) throw DataError("sweep table: expected metric,label_count,k,run,errors");
    rows.push_back({parse_metric(c[0]), static_cast<int>(parse_int(c[1])), static_cast<int>(parse_int(c[2])),
                    static_cast<int>(parse_int(c[3])), static_cast<int>(parse_int(c[4]))});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Neighborhood size selection

/// Original-space Euclidean distances against the distances of a
/// low-dimensional embedding built from the reconstruction weights (bottom
/// eigenvectors), both mean-normalized. The embedding has min(dim, k - 1)
/// axes. With the geodesic metric each run uses its own unfolding.
inline KSelection select_k_lle(const Matrix& X, Metric metric, const std::vector<int>& ks, int runs,
                               std::uint64_t seed, int dim = 2, const WeightOptions& wopts = {},
                               const SmacofOptions& sopts = {}) {
  const Matrix d_orig = normalize_distances(pairwise_euclidean(X).values);
  std::map<int, Geometry> geometry;
  auto geo_for = [&](int run) -> const Geometry& {
    const int key = metric == Metric::euclidean ? 0 : run;
    auto it = geometry.find(key);
    if (it == geometry.end()) {
      Rng rng(unfold_seed(seed, key));
      it = geometry.emplace(key, prepare_geometry(X, metric, rng, sopts)).first;
    }
    return it->second;
  };
  auto d_embed = [&](int k, int run) -> Matrix {
    const Geometry& g = geo_for(run);
    const WeightMatrix W = reconstruction_weights(g.coords, g.neighbor_distances, k, wopts);
    const Matrix Y = lle_embedding(W, std::max(1, std::min(dim, k - 1)));
    return normalize_distances(pairwise_euclidean(Y).values);
  };
  // Euclidean runs are identical; one suffices.
  return select_k([&](int, int) { return d_orig; }, d_embed, ks, metric == Metric::euclidean ? 1 : runs);
}

// ---------------------------------------------------------------------------
// Fixtures

struct FixtureEvaluation {
  int errors = 0;
  std::vector<std::string> misses;  // sorted entity ids
};

inline FixtureEvaluation evaluate_fixture(const std::map<std::string, int>& predictions,
                                          const std::map<std::string, int>& truth) {
  if (predictions.size() != truth.size()) throw DataError("evaluate_fixture: entity sets differ in size");
  FixtureEvaluation out;
  for (const auto& [id, c] : truth) {
    auto it = predictions.find(id);
    if (it == predictions.end()) throw DataError("evaluate_fixture: no prediction for " + id);
    if (it->second != c) {
      ++out.errors;
      out.misses.push_back(id);
    }
  }
  return out;
}

/// Labels CSV `entity,class` with a header row.
inline std::map<std::string, int> read_labels_csv(std::istream& in) {
  std::map<std::string, int> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      header = false;
      continue;
    }
    if (trim(line).empty()) continue;
    auto c = split(line, ',');
    if (c.size() != 2) throw DataError("labels: expected entity,class");
    const auto cls = parse_int(c[1]);
    if (cls < 0) throw DataError("labels: class must be nonnegative");
    if (!out.emplace(trim(c[0]), static_cast<int>(cls)).second) throw DataError("labels: duplicate entity " + c[0]);
  }
  return out;
}

inline std::string labels_csv(const std::map<std::string, int>& labels) {
  std::string out = "entity,class\n";
  for (const auto& [id, c] : labels) out += id + "," + std::to_string(c) + "\n";
  return out;
}

/// Predictions CSV `entity,class,score_1..score_C`.
inline std::string predictions_csv(const std::vector<std::string>& ids, const Prediction& p) {
  std::string out = "entity,class";
  for (Eigen::Index c = 0; c < p.scores.cols(); ++c) out += ",score_" + std::to_string(c + 1);
  out += "\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i] + "," + std::to_string(p.classes[i]);
    for (Eigen::Index c = 0; c < p.scores.cols(); ++c)
      out += "," + format_double(p.scores(static_cast<Eigen::Index>(i), c));
    out += "\n";
  }
  return out;
}

}  // namespace relop
