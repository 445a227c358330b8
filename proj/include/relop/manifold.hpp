#pragma once

// Distances (Euclidean, graph geodesic), MDS (classical and SMACOF) and the
// embedding quality measures NP, ST and PNE.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relop/common.hpp"

namespace relop {

using Matrix = Eigen::MatrixXd;

enum class Metric { euclidean, geodesic };

inline const char* to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "geodesic"; }

inline Metric parse_metric(std::string_view s) {
  std::string t = to_lower_ascii(trim(s));
  if (t == "euclidean" || t == "euc") return Metric::euclidean;
  if (t == "geodesic" || t == "geo") return Metric::geodesic;
  throw UsageError("unknown metric: " + t);
}

/// n points (rows) by d coordinates, with optional entity ids.
struct PointSet {
  Matrix coords;
  std::vector<std::string> ids;

  Eigen::Index size() const { return coords.rows(); }
  Eigen::Index dim() const { return coords.cols(); }
};

struct DistanceMatrix {
  Matrix values;
  Metric metric = Metric::euclidean;
  int neighborhood = 0;  // geodesic only: neighbor count used for the graph
};

inline DistanceMatrix pairwise_euclidean(const Matrix& X) {
  const Eigen::Index n = X.rows();
  DistanceMatrix D{Matrix::Zero(n, n), Metric::euclidean, 0};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (X.row(i) - X.row(j)).norm();
      D.values(i, j) = v;
      D.values(j, i) = v;
    }
  return D;
}

/// k nearest neighbors of every row of a distance matrix, excluding the
/// point itself. Equal distances are ordered by index.
inline std::vector<std::vector<int>> knn_from_distances(const Matrix& D, int k) {
  const int n = static_cast<int>(D.rows());
  if (k < 1 || k >= n) throw std::invalid_argument("knn: require 1 <= k < n");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  std::vector<int> idx;
  for (int i = 0; i < n; ++i) {
    idx.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) idx.push_back(j);
    auto less = [&](int a, int b) {
      const double da = D(i, a), db = D(i, b);
      return da < db || (da == db && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), less);
    out[static_cast<std::size_t>(i)].assign(idx.begin(), idx.begin() + k);
  }
  return out;
}

namespace detail {

struct WeightedGraph {
  std::vector<std::vector<std::pair<int, double>>> adj;
};

// Symmetrized m-NN graph with Euclidean edge lengths.
inline WeightedGraph knn_graph(const Matrix& D, int m) {
  const int n = static_cast<int>(D.rows());
  auto nn = knn_from_distances(D, m);
  std::vector<std::vector<char>> linked(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  WeightedGraph g;
  g.adj.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j : nn[static_cast<std::size_t>(i)]) {
      if (linked[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      linked[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
      linked[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = 1;
      g.adj[static_cast<std::size_t>(i)].emplace_back(j, D(i, j));
      g.adj[static_cast<std::size_t>(j)].emplace_back(i, D(i, j));
    }
  return g;
}

inline bool connected(const WeightedGraph& g) {
  const std::size_t n = g.adj.size();
  if (n == 0) return true;
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (auto [u, w] : g.adj[static_cast<std::size_t>(v)]) {
      if (seen[static_cast<std::size_t>(u)]) continue;
      seen[static_cast<std::size_t>(u)] = 1;
      ++count;
      stack.push_back(u);
    }
  }
  return count == n;
}

inline std::vector<double> dijkstra(const WeightedGraph& g, int source) {
  std::vector<double> dist(g.adj.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(v)]) continue;
    for (auto [u, w] : g.adj[static_cast<std::size_t>(v)]) {
      const double nd = d + w;
      if (nd < dist[static_cast<std::size_t>(u)]) {
        dist[static_cast<std::size_t>(u)] = nd;
        heap.emplace(nd, u);
      }
    }
  }
  return dist;
}

}  // namespace detail

/// Shortest-path lengths in the m-NN graph, with m the smallest neighbor
/// count (starting at 2) that makes the graph connected.
inline DistanceMatrix geodesic_distances(const Matrix& X) {
  const int n = static_cast<int>(X.rows());
  if (n < 2) throw std::invalid_argument("geodesic_distances: need at least two points");
  const Matrix E = pairwise_euclidean(X).values;
  int m = std::min(2, n - 1);
  detail::WeightedGraph g = detail::knn_graph(E, m);
  while (!detail::connected(g)) {
    ++m;
    g = detail::knn_graph(E, m);
  }
  DistanceMatrix D{Matrix::Zero(n, n), Metric::geodesic, m};
  for (int s = 0; s < n; ++s) {
    auto dist = detail::dijkstra(g, s);
    for (int t = 0; t < n; ++t) D.values(s, t) = dist[static_cast<std::size_t>(t)];
  }
  // symmetrize against rounding in path sums
  D.values = 0.5 * (D.values + D.values.transpose()).eval();
  return D;
}

// ---------------------------------------------------------------------------
// MDS

struct MdsResult {
  Matrix coords;
  std::vector<double> eigenvalues;  // top `dim`, descending
  std::vector<std::string> warnings;
};

/// Torgerson scaling: B = -1/2 J D^2 J, coordinates from the top eigenpairs.
/// Each axis is oriented so that its largest-magnitude coordinate is positive.
inline MdsResult classical_mds(const Matrix& D, int dim) {
  const Eigen::Index n = D.rows();
  if (D.cols() != n) throw std::invalid_argument("classical_mds: distance matrix must be square");
  if (dim < 1 || dim > n - 1) throw std::invalid_argument("classical_mds: require 1 <= dim <= n-1");
  const Matrix D2 = D.array().square().matrix();
  const Eigen::VectorXd row_mean = D2.rowwise().mean();
  const Eigen::RowVectorXd col_mean = D2.colwise().mean();
  const double grand = D2.mean();
  Matrix B(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) B(i, j) = -0.5 * (D2(i, j) - row_mean[i] - col_mean[j] + grand);
  B = 0.5 * (B + B.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> es(B);
  if (es.info() != Eigen::Success) throw std::runtime_error("classical_mds: eigendecomposition failed");
  MdsResult out;
  out.coords = Matrix::Zero(n, dim);
  for (int a = 0; a < dim; ++a) {
    const Eigen::Index col = n - 1 - a;  // eigenvalues ascend
    const double lambda = es.eigenvalues()[col];
    out.eigenvalues.push_back(lambda);
    if (!(lambda > 0.0)) {
      out.warnings.push_back("axis " + std::to_string(a) + " has non-positive eigenvalue; padded with zeros");
      continue;
    }
    Eigen::VectorXd axis = es.eigenvectors().col(col) * std::sqrt(lambda);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(axis[i]) > std::abs(axis[arg])) arg = i;
    if (axis[arg] < 0.0) axis = -axis;
    out.coords.col(a) = axis;
  }
  return out;
}

/// Raw stress sum_{i<j} (delta_ij - d_ij(X))^2.
inline double raw_stress(const Matrix& D, const Matrix& X) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      const double r = D(i, j) - (X.row(i) - X.row(j)).norm();
      s += r * r;
    }
  return s;
}

struct SmacofOptions {
  int max_iters = 500;
  double tol = 1e-9;  // relative stress decrease
  const Matrix* init = nullptr;
};

struct SmacofResult {
  Matrix coords;
  std::vector<double> stress;  // initial configuration first, then one per iteration
  int iterations = 0;
  bool converged = false;
};

/// Stress majorization (Guttman transform, unit weights) from a random start
/// scaled to the mean dissimilarity, or from `opts.init`.
inline SmacofResult smacof_mds(const Matrix& D, int dim, Rng& rng, const SmacofOptions& opts = {}) {
  const Eigen::Index n = D.rows();
  if (D.cols() != n) throw std::invalid_argument("smacof_mds: distance matrix must be square");
  if (dim < 1) throw std::invalid_argument("smacof_mds: dim must be >= 1");
  SmacofResult out;
  if (opts.init) {
    if (opts.init->rows() != n || opts.init->cols() != dim)
      throw std::invalid_argument("smacof_mds: init has the wrong shape");
    out.coords = *opts.init;
  } else {
    double mean = 0.0;
    if (n > 1) mean = D.sum() / static_cast<double>(n * (n - 1));
    const double scale = mean > 0.0 ? mean : 1.0;
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    out.coords.resize(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < dim; ++c) out.coords(i, c) = scale * u(rng);
  }
  double stress = raw_stress(D, out.coords);
  out.stress.push_back(stress);
  if (stress <= 0.0) {
    out.converged = true;
    return out;
  }
  Matrix B(n, n);
  for (int it = 0; it < opts.max_iters; ++it) {
    B.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dij = (out.coords.row(i) - out.coords.row(j)).norm();
        const double b = dij > 0.0 ? -D(i, j) / dij : 0.0;
        B(i, j) = b;
        B(j, i) = b;
      }
    for (Eigen::Index i = 0; i < n; ++i) B(i, i) = -B.row(i).sum();
    out.coords = (B * out.coords) / static_cast<double>(n);
    const double next = raw_stress(D, out.coords);
    out.stress.push_back(next);
    out.iterations = it + 1;
    const double prev = stress;
    stress = next;
    if (next <= 0.0 || prev - next < opts.tol * prev) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quality measures

/// Mean fraction of each point's k nearest neighbors that survive the embedding.
inline double neighborhood_preservation(const Matrix& D_orig, const Matrix& D_embed, int k) {
  const auto a = knn_from_distances(D_orig, k);
  const auto b = knn_from_distances(D_embed, k);
  const std::size_t n = a.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> x = a[i], y = b[i];
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::vector<int> common;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / k;
  }
  return total / static_cast<double>(n);
}

/// sum (delta - tau)^2 / sum tau^2 over all ordered pairs.
inline double stress_measure(const Matrix& D_orig, const Matrix& D_embed) {
  if (D_orig.rows() != D_embed.rows() || D_orig.cols() != D_embed.cols())
    throw std::invalid_argument("stress_measure: shape mismatch");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < D_orig.rows(); ++i)
    for (Eigen::Index j = i + 1; j < D_orig.cols(); ++j) {
      const double r = D_orig(i, j) - D_embed(i, j);
      num += 2.0 * r * r;
      den += 2.0 * D_embed(i, j) * D_embed(i, j);
    }
  if (den == 0.0) throw std::invalid_argument("stress_measure: embedding distances are all zero");
  return num / den;
}

/// Preservation neighborhood error: squared distance distortion over the
/// original-space neighbors (misses) plus over the embedding-space neighbors
/// (false positives), each divided by k, averaged with 1/(2n).
inline double pne(const Matrix& D_orig, const Matrix& D_embed, int k) {
  const auto kh = knn_from_distances(D_orig, k);
  const auto kl = knn_from_distances(D_embed, k);
  const Eigen::Index n = D_orig.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double misses = 0.0, false_pos = 0.0;
    for (int j : kh[static_cast<std::size_t>(i)]) {
      const double r = D_orig(i, j) - D_embed(i, j);
      misses += r * r;
    }
    for (int j : kl[static_cast<std::size_t>(i)]) {
      const double r = D_orig(i, j) - D_embed(i, j);
      false_pos += r * r;
    }
    total += misses / k + false_pos / k;
  }
  return total / (2.0 * static_cast<double>(n));
}

struct KSelection {
  int best_k = 0;
  std::vector<int> ks;
  std::vector<std::vector<double>> pne_runs;  // [k index][run]
  std::vector<double> median;
  std::vector<double> lower;  // 2.5th percentile
  std::vector<double> upper;  // 97.5th percentile
};

using DistanceFn = std::function<Matrix(int k, int run)>;

/// Argmin over k of the median PNE across runs; ties go to the smaller k.
inline KSelection select_k(const DistanceFn& d_orig, const DistanceFn& d_embed, const std::vector<int>& ks,
                           int runs) {
  if (ks.empty()) throw std::invalid_argument("select_k: empty k range");
  if (runs < 1) throw std::invalid_argument("select_k: runs must be >= 1");
  KSelection sel;
  sel.ks = ks;
  double best = std::numeric_limits<double>::infinity();
  for (int k : ks) {
    std::vector<double> vals;
    for (int r = 0; r < runs; ++r) vals.push_back(pne(d_orig(k, r), d_embed(k, r), k));
    const double med = median(vals);
    sel.median.push_back(med);
    sel.lower.push_back(quantile(vals, 0.025));
    sel.upper.push_back(quantile(vals, 0.975));
    sel.pne_runs.push_back(std::move(vals));
    if (med < best || (med == best && k < sel.best_k)) {
      best = med;
      sel.best_k = k;
    }
  }
  return sel;
}

/// Distances divided by their mean off-diagonal value, so configurations on
/// different scales can be compared.
inline Matrix normalize_distances(const Matrix& D) {
  const Eigen::Index n = D.rows();
  if (n < 2) return D;
  const double mean = D.sum() / static_cast<double>(n * (n - 1));
  return mean > 0.0 ? Matrix(D / mean) : D;
}

// ---------------------------------------------------------------------------
// File formats

/// PointSet TSV: `id<TAB>x1<TAB>...<TAB>xd` per row, no header.
inline std::string point_set_tsv(const PointSet& ps) {
  std::string out;
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    out += ps.ids.empty() ? std::to_string(i) : ps.ids[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < ps.dim(); ++c) out += "\t" + format_double(ps.coords(i, c));
    out += "\n";
  }
  return out;
}

inline PointSet read_point_set_tsv(std::istream& in) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() < 2) throw DataError("point set: expected id and coordinates");
    ids.push_back(cols[0]);
    std::vector<double> r;
    for (std::size_t c = 1; c < cols.size(); ++c) r.push_back(parse_double(cols[c]));
    if (!rows.empty() && r.size() != rows.front().size()) throw DataError("point set: ragged rows");
    rows.push_back(std::move(r));
  }
  PointSet ps;
  ps.ids = std::move(ids);
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  ps.coords.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < d; ++c) ps.coords(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  if (!ps.coords.allFinite()) throw DataError("point set: non-finite coordinate");
  return ps;
}

/// Distance matrix TSV with a header row of ids.
inline std::string distance_matrix_tsv(const Matrix& D, const std::vector<std::string>& ids) {
  std::string out = "id";
  for (const auto& id : ids) out += "\t" + id;
  out += "\n";
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    out += ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < D.cols(); ++j) out += "\t" + format_double(D(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace relop
