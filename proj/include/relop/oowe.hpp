#pragma once

// Opinion-oriented word embedding. A window network
//   lookup -> concat -> W1,b1 -> hard-tanh -> W2,b2
// with C+1 outputs: index 0 scores the n-gram as language (f_s) and index
// 1+c scores opinion category c (f_o). Trained with AdaGrad on
//   (1-alpha) * max(0, 1 + f_s(t_r) - f_s(t))
//     + alpha/(C-1) * sum_{j != P} max(0, 1 + f_o^j(t) - f_o^P(t))
// where t_r is t with its center word replaced.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relop/common.hpp"
#include "relop/corpus.hpp"
#include "relop/hashtag_network.hpp"

namespace relop {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct OoweConfig {
  int window = 3;
  int embed_dim = 50;
  int hidden_dim = 20;
  double learning_rate = 0.1;
  double alpha = 0.5;
  int categories = kOpinionCategories;
  int epochs = 10;
  std::uint64_t seed = 1;

  void validate() const {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("oowe: window must be odd and >= 1");
    if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("oowe: dimensions must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("oowe: alpha must be in [0,1]");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("oowe: learning rate must be positive");
    if (categories < 1) throw std::invalid_argument("oowe: need at least one category");
    if (categories == 1 && alpha > 0.0)
      throw std::invalid_argument("oowe: opinion hinge needs C >= 2 when alpha > 0");
    if (epochs < 0) throw std::invalid_argument("oowe: epochs must be >= 0");
  }
};

struct OoweModel {
  int window = 3;
  RowMatrix E;   // V x d
  RowMatrix W1;  // h x (w*d)
  Vector b1;     // h
  RowMatrix W2;  // (C+1) x h
  Vector b2;     // C+1

  // AdaGrad accumulators, same shapes as the parameters
  RowMatrix acc_E, acc_W1, acc_W2;
  Vector acc_b1, acc_b2;

  int vocab_size() const { return static_cast<int>(E.rows()); }
  int dim() const { return static_cast<int>(E.cols()); }
  int hidden() const { return static_cast<int>(W1.rows()); }
  int categories() const { return static_cast<int>(W2.rows()) - 1; }

  /// Zero parameters of the given shape.
  static OoweModel zeros(int vocab, int window, int dim, int hidden, int categories) {
    OoweModel m;
    m.window = window;
    m.E = RowMatrix::Zero(vocab, dim);
    m.W1 = RowMatrix::Zero(hidden, window * dim);
    m.b1 = Vector::Zero(hidden);
    m.W2 = RowMatrix::Zero(categories + 1, hidden);
    m.b2 = Vector::Zero(categories + 1);
    m.reset_accumulators();
    return m;
  }

  /// Embeddings uniform in [-0.01, 0.01]; W1, W2 uniform in +-1/sqrt(fan_in); zero biases.
  static OoweModel random(int vocab, const OoweConfig& cfg, Rng& rng) {
    cfg.validate();
    OoweModel m = zeros(vocab, cfg.window, cfg.embed_dim, cfg.hidden_dim, cfg.categories);
    std::uniform_real_distribution<double> emb(-0.01, 0.01);
    for (Eigen::Index i = 0; i < m.E.size(); ++i) m.E.data()[i] = emb(rng);
    const double r1 = 1.0 / std::sqrt(static_cast<double>(m.W1.cols()));
    std::uniform_real_distribution<double> u1(-r1, r1);
    for (Eigen::Index i = 0; i < m.W1.size(); ++i) m.W1.data()[i] = u1(rng);
    const double r2 = 1.0 / std::sqrt(static_cast<double>(m.W2.cols()));
    std::uniform_real_distribution<double> u2(-r2, r2);
    for (Eigen::Index i = 0; i < m.W2.size(); ++i) m.W2.data()[i] = u2(rng);
    return m;
  }

  void reset_accumulators() {
    acc_E = RowMatrix::Zero(E.rows(), E.cols());
    acc_W1 = RowMatrix::Zero(W1.rows(), W1.cols());
    acc_W2 = RowMatrix::Zero(W2.rows(), W2.cols());
    acc_b1 = Vector::Zero(b1.size());
    acc_b2 = Vector::Zero(b2.size());
  }

  bool all_finite() const {
    return E.allFinite() && W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
  }
};

struct Ngram {
  std::vector<int> tokens;  // window positions, center in the middle
  int category = 0;         // 0-based; opinion output index is category + 1
  bool corrupted = false;

  int center_pos() const { return static_cast<int>(tokens.size()) / 2; }
  int center() const { return tokens[static_cast<std::size_t>(center_pos())]; }
};

/// Windows centered on every position of a token sequence, padded at the edges.
inline std::vector<Ngram> make_ngrams(const std::vector<int>& doc, int window, int category) {
  std::vector<Ngram> out;
  const int half = window / 2;
  const int n = static_cast<int>(doc.size());
  for (int i = 0; i < n; ++i) {
    Ngram g;
    g.category = category;
    g.tokens.reserve(static_cast<std::size_t>(window));
    for (int o = -half; o <= half; ++o) {
      int p = i + o;
      g.tokens.push_back(p < 0 || p >= n ? Vocabulary::kPad : doc[static_cast<std::size_t>(p)]);
    }
    out.push_back(std::move(g));
  }
  return out;
}

struct ForwardPass {
  Vector x;    // concatenated lookups
  Vector pre;  // W1 x + b1
  Vector h;    // htanh(pre)
  Vector out;  // W2 h + b2
};

namespace detail {

inline void check_ngram(const OoweModel& m, const Ngram& g) {
  if (static_cast<int>(g.tokens.size()) != m.window)
    throw std::invalid_argument("ngram length does not match the model window");
  for (int t : g.tokens)
    if (t < 0 || t >= m.vocab_size()) throw std::out_of_range("ngram token index out of range");
}

}  // namespace detail

inline ForwardPass forward_pass(const OoweModel& m, const Ngram& g) {
  detail::check_ngram(m, g);
  ForwardPass f;
  const int d = m.dim();
  f.x.resize(static_cast<Eigen::Index>(m.window) * d);
  for (int p = 0; p < m.window; ++p)
    f.x.segment(static_cast<Eigen::Index>(p) * d, d) = m.E.row(g.tokens[static_cast<std::size_t>(p)]).transpose();
  f.pre = m.W1 * f.x + m.b1;
  f.h = f.pre.cwiseMax(-1.0).cwiseMin(1.0);
  f.out = m.W2 * f.h + m.b2;
  return f;
}

/// Scores: index 0 is the language score, 1..C the opinion scores.
inline Vector forward(const OoweModel& m, const Ngram& g) { return forward_pass(m, g).out; }

/// Replace the center word with a different word drawn uniformly from [0, V).
inline Ngram corrupt(const Ngram& g, int vocab_size, Rng& rng) {
  if (vocab_size < 2) throw std::invalid_argument("corrupt: vocabulary needs at least two entries");
  Ngram r = g;
  const int orig = g.center();
  std::uniform_int_distribution<int> pick(0, vocab_size - 2);
  int w = pick(rng);
  if (w >= orig) ++w;
  r.tokens[static_cast<std::size_t>(r.center_pos())] = w;
  r.corrupted = true;
  return r;
}

namespace detail {

inline void check_loss_args(const OoweModel& m, int category, double alpha) {
  const int C = m.categories();
  if (category < 0 || category >= C) throw std::invalid_argument("loss: category out of range");
  if (C == 1 && alpha > 0.0) throw std::invalid_argument("loss: C = 1 with alpha > 0 divides by C - 1");
}

inline double loss_from_scores(const Vector& out_t, const Vector& out_r, int category, double alpha) {
  const int C = static_cast<int>(out_t.size()) - 1;
  double total = 0.0;
  if (alpha < 1.0) total += (1.0 - alpha) * std::max(0.0, 1.0 + out_r[0] - out_t[0]);
  if (alpha > 0.0) {
    double s = 0.0;
    for (int j = 0; j < C; ++j) {
      if (j == category) continue;
      s += std::max(0.0, 1.0 + out_t[1 + j] - out_t[1 + category]);
    }
    total += alpha * s / static_cast<double>(C - 1);
  }
  return total;
}

}  // namespace detail

inline double loss(const OoweModel& m, const Ngram& t, const Ngram& t_r, int category, double alpha) {
  detail::check_loss_args(m, category, alpha);
  return detail::loss_from_scores(forward(m, t), forward(m, t_r), category, alpha);
}

/// Dense parameter gradients plus the touched embedding rows.
struct OoweGradients {
  RowMatrix W1;
  Vector b1;
  RowMatrix W2;
  Vector b2;
  std::map<int, Vector> E;
  double loss = 0.0;

  bool is_zero() const {
    if (!W1.isZero(0.0) || !b1.isZero(0.0) || !W2.isZero(0.0) || !b2.isZero(0.0)) return false;
    for (const auto& [row, g] : E)
      if (!g.isZero(0.0)) return false;
    return true;
  }
};

namespace detail {

// Accumulate the gradient of dL/d(out) back through one forward pass.
inline void backprop(const OoweModel& m, const Ngram& g, const ForwardPass& f, const Vector& d_out,
                     OoweGradients& grads) {
  grads.W2.noalias() += d_out * f.h.transpose();
  grads.b2 += d_out;
  Vector d_h = m.W2.transpose() * d_out;
  Vector d_pre(d_h.size());
  for (Eigen::Index i = 0; i < d_h.size(); ++i)
    d_pre[i] = (f.pre[i] > -1.0 && f.pre[i] < 1.0) ? d_h[i] : 0.0;
  grads.W1.noalias() += d_pre * f.x.transpose();
  grads.b1 += d_pre;
  Vector d_x = m.W1.transpose() * d_pre;
  const int d = m.dim();
  for (int p = 0; p < m.window; ++p) {
    const int row = g.tokens[static_cast<std::size_t>(p)];
    auto seg = d_x.segment(static_cast<Eigen::Index>(p) * d, d);
    auto it = grads.E.find(row);
    if (it == grads.E.end())
      grads.E.emplace(row, seg);
    else
      it->second += seg;
  }
}

}  // namespace detail

/// Exact subgradients of the composite hinge loss. Hinges exactly at the kink
/// and hard-tanh units at +-1 contribute zero.
inline OoweGradients gradients(const OoweModel& m, const Ngram& t, const Ngram& t_r, int category,
                               double alpha) {
  detail::check_loss_args(m, category, alpha);
  const int C = m.categories();
  OoweGradients grads;
  grads.W1 = RowMatrix::Zero(m.W1.rows(), m.W1.cols());
  grads.b1 = Vector::Zero(m.b1.size());
  grads.W2 = RowMatrix::Zero(m.W2.rows(), m.W2.cols());
  grads.b2 = Vector::Zero(m.b2.size());

  const ForwardPass ft = forward_pass(m, t);
  const ForwardPass fr = forward_pass(m, t_r);
  grads.loss = detail::loss_from_scores(ft.out, fr.out, category, alpha);

  Vector d_out_t = Vector::Zero(C + 1);
  Vector d_out_r = Vector::Zero(C + 1);
  if (alpha < 1.0 && 1.0 + fr.out[0] - ft.out[0] > 0.0) {
    d_out_t[0] -= 1.0 - alpha;
    d_out_r[0] += 1.0 - alpha;
  }
  if (alpha > 0.0) {
    const double scale = alpha / static_cast<double>(C - 1);
    for (int j = 0; j < C; ++j) {
      if (j == category) continue;
      if (1.0 + ft.out[1 + j] - ft.out[1 + category] > 0.0) {
        d_out_t[1 + j] += scale;
        d_out_t[1 + category] -= scale;
      }
    }
  }
  if (!d_out_t.isZero(0.0)) detail::backprop(m, t, ft, d_out_t, grads);
  if (!d_out_r.isZero(0.0)) detail::backprop(m, t_r, fr, d_out_r, grads);
  return grads;
}

inline constexpr double kAdagradEpsilon = 1e-8;

namespace detail {
template <typename P, typename G, typename A>
void adagrad_update(P&& param, const G& grad, A&& acc, double eta) {
  acc.array() += grad.array().square();
  param.array() -= eta * grad.array() / (acc.array().sqrt() + kAdagradEpsilon);
}
}  // namespace detail

/// G += g^2; theta -= eta * g / (sqrt(G) + 1e-8). Only touched embedding rows move.
inline void adagrad_step(OoweModel& m, const OoweGradients& g, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("adagrad_step: eta must be positive");
  detail::adagrad_update(m.W1, g.W1, m.acc_W1, eta);
  detail::adagrad_update(m.b1, g.b1, m.acc_b1, eta);
  detail::adagrad_update(m.W2, g.W2, m.acc_W2, eta);
  detail::adagrad_update(m.b2, g.b2, m.acc_b2, eta);
  for (const auto& [row, grad] : g.E) {
    detail::adagrad_update(m.E.row(row), grad.transpose(), m.acc_E.row(row), eta);
  }
}

// ---------------------------------------------------------------------------
// Training

struct TrainReport {
  OoweModel model;
  std::vector<double> epoch_loss;  // mean loss per n-gram visit
};

/// `docs` are token-index sequences with one 0-based category each.
inline TrainReport train(const std::vector<std::vector<int>>& docs, const std::vector<int>& categories,
                         int vocab_size, const OoweConfig& cfg) {
  cfg.validate();
  if (docs.empty()) throw DataError("train: empty training set");
  if (docs.size() != categories.size()) throw std::invalid_argument("train: docs/categories size mismatch");
  if (vocab_size < 2) throw DataError("train: vocabulary too small");

  Rng rng(cfg.seed);
  TrainReport report{OoweModel::random(vocab_size, cfg, rng), {}};
  std::vector<Ngram> ngrams;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (categories[i] < 0 || categories[i] >= cfg.categories)
      throw DataError("train: category index out of range");
    auto g = make_ngrams(docs[i], cfg.window, categories[i]);
    ngrams.insert(ngrams.end(), std::make_move_iterator(g.begin()), std::make_move_iterator(g.end()));
  }
  if (ngrams.empty()) throw DataError("train: training set has no tokens");

  std::vector<std::size_t> order(ngrams.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      const Ngram& t = ngrams[idx];
      Ngram t_r = corrupt(t, vocab_size, rng);
      auto g = gradients(report.model, t, t_r, t.category, cfg.alpha);
      total += g.loss;
      if (g.loss > 0.0) adagrad_step(report.model, g, cfg.learning_rate);
    }
    report.epoch_loss.push_back(total / static_cast<double>(ngrams.size()));
  }
  return report;
}

inline TrainReport train(const TrainingSet& ts, const Vocabulary& vocab, const OoweConfig& cfg) {
  std::vector<std::vector<int>> docs;
  std::vector<int> cats;
  for (const auto& ex : ts.examples) {
    docs.push_back(vocab.encode(ex.tokens));
    cats.push_back(static_cast<int>(ex.label));
  }
  return train(docs, cats, vocab.size(), cfg);
}

/// Embedding row of a token; out-of-vocabulary tokens get the unknown row.
inline Vector embed_word(const OoweModel& m, const Vocabulary& vocab, std::string_view token) {
  return m.E.row(vocab.index(token)).transpose();
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr std::array<char, 8> kModelMagic{'R', 'E', 'L', 'O', 'P', 'O', 'W', 'E'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw DataError("model file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

template <typename M>
void write_block(std::ostream& out, const M& mat) {
  // row-major order regardless of storage
  for (Eigen::Index r = 0; r < mat.rows(); ++r)
    for (Eigen::Index c = 0; c < mat.cols(); ++c) write_le<double>(out, mat(r, c));
}

template <typename M>
void read_block(std::istream& in, M& mat) {
  for (Eigen::Index r = 0; r < mat.rows(); ++r)
    for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = read_le<double>(in);
}

}  // namespace detail

/// Header: magic, version (u32), V, d, h, C (u64); then E, W1, b1, W2, b2 as
/// row-major little-endian doubles. The window is implied by the payload size.
inline void save_model(const OoweModel& m, std::ostream& out) {
  out.write(kModelMagic.data(), kModelMagic.size());
  detail::write_le<std::uint32_t>(out, kModelVersion);
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.vocab_size()));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.dim()));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.hidden()));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.categories()));
  detail::write_block(out, m.E);
  detail::write_block(out, m.W1);
  detail::write_block(out, m.b1);
  detail::write_block(out, m.W2);
  detail::write_block(out, m.b2);
  if (!out) throw DataError("model write failed");
}

inline OoweModel load_model(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kModelMagic) throw DataError("model file: bad magic");
  if (detail::read_le<std::uint32_t>(in) != kModelVersion) throw DataError("model file: unsupported version");
  const auto V = detail::read_le<std::uint64_t>(in);
  const auto d = detail::read_le<std::uint64_t>(in);
  const auto h = detail::read_le<std::uint64_t>(in);
  const auto C = detail::read_le<std::uint64_t>(in);
  constexpr std::uint64_t kLimit = 1ULL << 31;
  if (V < 1 || d < 1 || h < 1 || C < 1 || V > kLimit || d > kLimit || h > kLimit || C > kLimit)
    throw DataError("model file: implausible dimensions");

  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (here < 0 || end < here) throw DataError("model file: cannot determine payload size");
  const auto payload = static_cast<std::uint64_t>(end - here);
  if (payload % 8 != 0) throw DataError("model file: payload is not a whole number of doubles");
  const std::uint64_t doubles = payload / 8;
  const std::uint64_t fixed = V * d + h + (C + 1) * h + (C + 1);
  if (doubles <= fixed || (doubles - fixed) % (h * d) != 0) throw DataError("model file: inconsistent payload size");
  const std::uint64_t w = (doubles - fixed) / (h * d);
  if (w % 2 == 0) throw DataError("model file: implied window is even");

  OoweModel m = OoweModel::zeros(static_cast<int>(V), static_cast<int>(w), static_cast<int>(d),
                                 static_cast<int>(h), static_cast<int>(C));
  detail::read_block(in, m.E);
  detail::read_block(in, m.W1);
  detail::read_block(in, m.b1);
  detail::read_block(in, m.W2);
  detail::read_block(in, m.b2);
  return m;
}

/// TSV `token<TAB>v1<TAB>...<TAB>vd` for every vocabulary entry.
inline std::string embeddings_tsv(const OoweModel& m, const Vocabulary& vocab) {
  std::string out;
  for (int i = 0; i < vocab.size(); ++i) {
    out += vocab.token(i);
    for (int c = 0; c < m.dim(); ++c) {
      out += '\t';
      out += format_double(m.E(i, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace relop
