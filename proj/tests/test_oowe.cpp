#include <gtest/gtest.h>

#include <sstream>

#include "relop/checks.hpp"
#include "relop/oowe.hpp"
#include "relop/oracles.hpp"
#include "relop/synth.hpp"

using namespace relop;

namespace {

OoweModel random_model(Rng& rng, int V = 40, int window = 3, int d = 6, int h = 5, int C = 4) {
  OoweConfig oc;
  oc.window = window;
  oc.embed_dim = d;
  oc.hidden_dim = h;
  oc.categories = C;
  auto m = OoweModel::random(V, oc, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index i = 0; i < m.E.size(); ++i) m.E.data()[i] = u(rng);
  return m;
}

Ngram random_ngram(const OoweModel& m, Rng& rng) {
  std::uniform_int_distribution<int> tok(0, m.vocab_size() - 1), cat(0, m.categories() - 1);
  Ngram g;
  for (int p = 0; p < m.window; ++p) g.tokens.push_back(tok(rng));
  g.category = cat(rng);
  return g;
}

}  // namespace

TEST(Forward, ZeroWeightsGiveZeroScores) {
  auto m = OoweModel::zeros(10, 3, 4, 3, 6);
  m.E.setRandom();
  Ngram g{{1, 2, 3}, 0, false};
  auto out = forward(m, g);
  ASSERT_EQ(out.size(), 7);
  EXPECT_TRUE(out.isZero(0.0));
}

TEST(Forward, HandArithmetic) {
  auto m = OoweModel::zeros(2, 3, 1, 1, 1);
  m.E.setOnes();
  m.W1.setOnes();
  m.W2.setOnes();
  auto f = forward_pass(m, Ngram{{0, 1, 0}, 0, false});
  EXPECT_DOUBLE_EQ(f.pre[0], 3.0);
  EXPECT_DOUBLE_EQ(f.h[0], 1.0);
  EXPECT_DOUBLE_EQ(f.out[0], 1.0);
  EXPECT_DOUBLE_EQ(f.out[1], 1.0);
}

TEST(Forward, MatchesScalarReference) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_model(rng, 30, trial % 2 ? 5 : 3);
    auto g = random_ngram(m, rng);
    auto out = forward(m, g);
    auto ref = oracle::oowe_scores(m, g.tokens);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[static_cast<Eigen::Index>(i)], ref[i], 1e-12);
  }
}

TEST(Forward, RejectsBadInput) {
  Rng rng(1);
  auto m = random_model(rng);
  EXPECT_THROW(forward(m, Ngram{{1, 2}, 0, false}), std::invalid_argument);
  EXPECT_THROW(forward(m, Ngram{{1, 2, 400}, 0, false}), std::out_of_range);
}

TEST(MakeNgrams, PaddedWindows) {
  auto gs = make_ngrams({5, 6, 7}, 3, 2);
  ASSERT_EQ(gs.size(), 3u);
  EXPECT_EQ(gs[0].tokens, (std::vector<int>{Vocabulary::kPad, 5, 6}));
  EXPECT_EQ(gs[2].tokens, (std::vector<int>{6, 7, Vocabulary::kPad}));
  EXPECT_EQ(gs[1].center(), 6);
  EXPECT_EQ(gs[1].category, 2);
}

TEST(Corrupt, ForcedWithTwoWords) {
  Rng rng(2);
  Ngram g{{1, 0, 1}, 0, false};
  for (int i = 0; i < 50; ++i) EXPECT_EQ(corrupt(g, 2, rng).center(), 1);
  EXPECT_THROW(corrupt(g, 1, rng), std::invalid_argument);
}

TEST(Corrupt, ExactlyOnePositionChanges) {
  Rng rng(3);
  Ngram g{{4, 5, 6, 7, 8}, 1, false};
  for (int i = 0; i < 200; ++i) {
    auto r = corrupt(g, 20, rng);
    EXPECT_TRUE(r.corrupted);
    int diff = 0;
    for (std::size_t p = 0; p < g.tokens.size(); ++p) diff += g.tokens[p] != r.tokens[p];
    EXPECT_EQ(diff, 1);
    EXPECT_NE(r.center(), 6);
  }
}

TEST(Corrupt, UniformReplacement) {
  Rng rng(4);
  const int V = 11;
  Ngram g{{0, 3, 0}, 0, false};
  std::vector<int> counts(V, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(corrupt(g, V, rng).center())];
  EXPECT_EQ(counts[3], 0);
  double chi2 = 0.0;
  const double expected = static_cast<double>(draws) / (V - 1);
  for (int w = 0; w < V; ++w)
    if (w != 3) chi2 += (counts[static_cast<std::size_t>(w)] - expected) * (counts[static_cast<std::size_t>(w)] - expected) / expected;
  // chi-square, 9 degrees of freedom, upper 1% point
  EXPECT_LT(chi2, 21.666);
}

TEST(Loss, HandCases) {
  // scores injected through the output bias of a zero model
  auto m = OoweModel::zeros(3, 1, 1, 1, 2);
  Ngram t{{0}, 0, false}, tr{{1}, 0, true};
  m.b2 << 0.0, 0.2, 0.5;
  EXPECT_NEAR(loss(m, t, tr, 0, 1.0), 1.3, 1e-15);

  auto z = OoweModel::zeros(3, 1, 1, 1, 2);
  z.E << 1.0, -1.0, 0.0;
  z.W1 << 1.0;
  z.W2 << 1.0, 0.0, 0.0;
  z.b2 << 1.0, 3.0, 0.0;
  // f_s(t)=2, f_s(t_r)=0, opinion margin 3
  EXPECT_DOUBLE_EQ(loss(z, t, tr, 0, 0.5), 0.0);
}

TEST(Loss, AlphaZeroIsLanguageHingeOnly) {
  Rng rng(5);
  auto m = random_model(rng);
  for (int i = 0; i < 20; ++i) {
    auto t = random_ngram(m, rng);
    auto tr = corrupt(t, m.vocab_size(), rng);
    const double lm = std::max(0.0, 1.0 + forward(m, tr)[0] - forward(m, t)[0]);
    EXPECT_DOUBLE_EQ(loss(m, t, tr, t.category, 0.0), lm);
    EXPECT_GE(loss(m, t, tr, t.category, 0.5), 0.0);
    EXPECT_NEAR(loss(m, t, tr, t.category, 0.3), oracle::oowe_loss(m, t.tokens, tr.tokens, t.category, 0.3), 1e-12);
  }
}

TEST(Loss, SingleCategoryNeedsAlphaZero) {
  auto m = OoweModel::zeros(3, 1, 1, 1, 1);
  Ngram t{{0}, 0, false}, tr{{1}, 0, true};
  EXPECT_THROW(loss(m, t, tr, 0, 0.5), std::invalid_argument);
  EXPECT_NO_THROW(loss(m, t, tr, 0, 0.0));
  EXPECT_THROW(loss(m, t, tr, 1, 0.0), std::invalid_argument);
}

TEST(Gradients, ZeroWhenLossIsZero) {
  auto z = OoweModel::zeros(3, 1, 1, 1, 2);
  z.E << 1.0, -1.0, 0.0;
  z.W1 << 1.0;
  z.W2 << 1.0, 0.0, 0.0;
  z.b2 << 1.0, 3.0, 0.0;
  auto g = gradients(z, Ngram{{0}, 0, false}, Ngram{{1}, 0, true}, 0, 0.5);
  EXPECT_EQ(g.loss, 0.0);
  EXPECT_TRUE(g.is_zero());
}

TEST(Gradients, MatchFiniteDifferences) {
  Rng rng(6);
  for (double alpha : {0.0, 0.5, 1.0}) {
    auto m = random_model(rng, 25, 3, 5, 4, 3);
    auto r = oracle::check_gradients(m, 20, rng, alpha, 1e-4, 1e-4);
    EXPECT_TRUE(r.passed) << r.line();
  }
}

TEST(Gradients, LanguageHingeTouchesOnlyWindowRows) {
  Rng rng(7);
  auto m = random_model(rng, 30, 3, 4, 4, 3);
  for (int i = 0; i < 30; ++i) {
    auto t = random_ngram(m, rng);
    auto tr = corrupt(t, m.vocab_size(), rng);
    auto g = gradients(m, t, tr, t.category, 0.0);
    std::set<int> allowed(t.tokens.begin(), t.tokens.end());
    allowed.insert(tr.center());
    for (const auto& [row, grad] : g.E) EXPECT_TRUE(allowed.count(row)) << row;
    if (g.loss == 0.0) continue;
    auto fd = oracle::finite_diff_grads(m, t.tokens, tr.tokens, t.category, 0.0);
    for (const auto& [row, grad] : fd.E)
      if (!allowed.count(row)) EXPECT_LT(grad.norm(), 1e-9);
  }
}

TEST(Adagrad, ClosedFormSteps) {
  auto m = OoweModel::zeros(2, 1, 1, 1, 1);
  OoweGradients g;
  g.W1 = RowMatrix::Ones(1, 1);
  g.b1 = Vector::Zero(1);
  g.W2 = RowMatrix::Zero(2, 1);
  g.b2 = Vector::Zero(2);
  adagrad_step(m, g, 0.1);
  EXPECT_NEAR(m.W1(0, 0), -0.1, 1e-8);
  adagrad_step(m, g, 0.1);
  EXPECT_NEAR(m.W1(0, 0), -0.1 - 0.1 / std::sqrt(2.0), 1e-8);
  EXPECT_EQ(m.b1[0], 0.0);
  EXPECT_EQ(m.acc_b1[0], 0.0);
  EXPECT_EQ(m.acc_W1(0, 0), 2.0);
  EXPECT_THROW(adagrad_step(m, g, 0.0), std::invalid_argument);
}

TEST(Adagrad, QuadraticDecreasesMonotonically) {
  // minimize 0.5 * (w - 3)^2 through the b1 slot
  auto m = OoweModel::zeros(2, 1, 1, 1, 1);
  double prev = 4.5;
  for (int s = 0; s < 100; ++s) {
    OoweGradients g;
    g.W1 = RowMatrix::Zero(1, 1);
    g.b1 = Vector::Constant(1, m.b1[0] - 3.0);
    g.W2 = RowMatrix::Zero(2, 1);
    g.b2 = Vector::Zero(2);
    adagrad_step(m, g, 0.5);
    const double obj = 0.5 * (m.b1[0] - 3.0) * (m.b1[0] - 3.0);
    EXPECT_LE(obj, prev + 1e-15);
    prev = obj;
  }
  EXPECT_LT(prev, 1e-3);
}

namespace {

struct SmallCorpus {
  Vocabulary vocab;
  std::vector<std::vector<int>> docs;
  std::vector<int> cats;
  SynthCorpus corpus;
};

SmallCorpus small_corpus(int per_class) {
  SynthCorpusConfig sc;
  sc.classes = 2;
  sc.tweets_per_class = per_class;
  SmallCorpus out;
  out.corpus = gen_opinion_corpus(sc);
  std::vector<std::vector<std::string>> docs;
  for (const auto& p : out.corpus.posts) {
    std::vector<std::string> toks;
    for (const auto& t : content_tokens(tokenize(p.text))) toks.push_back(t.surface);
    docs.push_back(toks);
  }
  out.vocab = build_vocab(docs, 1);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out.docs.push_back(out.vocab.encode(docs[i]));
    out.cats.push_back(out.corpus.truth[i].cls);
  }
  return out;
}

}  // namespace

TEST(Train, LossDecreasesAndIsDeterministic) {
  auto sc = small_corpus(200);
  OoweConfig oc;
  oc.categories = 2;
  oc.embed_dim = 16;
  oc.epochs = 5;
  auto a = train(sc.docs, sc.cats, sc.vocab.size(), oc);
  auto b = train(sc.docs, sc.cats, sc.vocab.size(), oc);
  ASSERT_EQ(a.epoch_loss.size(), 5u);
  EXPECT_LT(a.epoch_loss.back(), a.epoch_loss.front());
  EXPECT_TRUE(a.model.all_finite());
  EXPECT_EQ(std::memcmp(a.model.E.data(), b.model.E.data(), sizeof(double) * static_cast<std::size_t>(a.model.E.size())), 0);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(Train, SingleExampleReachesMargin) {
  const std::vector<std::vector<int>> docs{{2, 3, 4}};
  OoweConfig oc;
  oc.categories = 3;
  oc.alpha = 1.0;
  oc.embed_dim = 4;
  oc.hidden_dim = 4;
  oc.epochs = 300;
  auto r = train(docs, {1}, 6, oc);
  EXPECT_EQ(r.epoch_loss.back(), 0.0);
  for (const auto& g : make_ngrams(docs[0], 3, 1)) {
    auto out = forward(r.model, g);
    for (int j = 0; j < 3; ++j)
      if (j != 1) EXPECT_GE(out[2] - out[1 + j], 1.0 - 1e-12);
  }
}

TEST(Train, AlphaZeroLeavesOpinionHeadUntouched) {
  auto sc = small_corpus(40);
  OoweConfig oc;
  oc.categories = 2;
  oc.alpha = 0.0;
  oc.embed_dim = 8;
  oc.epochs = 2;
  Rng rng(oc.seed);
  const auto init = OoweModel::random(sc.vocab.size(), oc, rng);
  auto r = train(sc.docs, sc.cats, sc.vocab.size(), oc);
  EXPECT_EQ(r.model.W2.bottomRows(2), init.W2.bottomRows(2));
  EXPECT_EQ(r.model.b2.tail(2), init.b2.tail(2));
  EXPECT_NE(r.model.W2.row(0), init.W2.row(0));
}

TEST(Train, Errors) {
  OoweConfig oc;
  EXPECT_THROW(train(std::vector<std::vector<int>>{}, {}, 10, oc), DataError);
  EXPECT_THROW(train({{2, 3}}, {9}, 10, oc), DataError);
  EXPECT_THROW(train({{}}, {0}, 10, oc), DataError);
  oc.window = 2;
  EXPECT_THROW(train({{2, 3}}, {0}, 10, oc), std::invalid_argument);
}

TEST(EmbedWord, RowsAndUnknown) {
  auto sc = small_corpus(20);
  Rng rng(8);
  OoweConfig oc;
  oc.categories = 2;
  auto m = OoweModel::random(sc.vocab.size(), oc, rng);
  const auto& word = sc.vocab.token(5);
  EXPECT_EQ(embed_word(m, sc.vocab, word), m.E.row(5).transpose());
  EXPECT_EQ(embed_word(m, sc.vocab, "never-seen-token"), m.E.row(Vocabulary::kUnk).transpose());
}

TEST(EmbedWord, PlantedLexiconsSeparate) {
  auto sc = small_corpus(600);
  OoweConfig oc;
  oc.categories = 2;
  oc.embed_dim = 20;
  oc.epochs = 5;
  auto m = train(sc.docs, sc.cats, sc.vocab.size(), oc).model;
  auto cos = [&](const std::string& a, const std::string& b) {
    auto x = embed_word(m, sc.vocab, a), y = embed_word(m, sc.vocab, b);
    return x.dot(y) / (x.norm() * y.norm());
  };
  double within = 0.0, cross = 0.0;
  int nw = 0, nc = 0;
  const auto& lex = sc.corpus.lexicons;
  for (std::size_t i = 0; i < lex[0].size(); ++i)
    for (std::size_t j = 0; j < lex[0].size(); ++j) {
      if (i < j) {
        within += cos(lex[0][i], lex[0][j]) + cos(lex[1][i], lex[1][j]);
        nw += 2;
      }
      cross += cos(lex[0][i], lex[1][j]);
      ++nc;
    }
  EXPECT_GT(within / nw, cross / nc);
}

TEST(Invariants, OpinionArgmaxInvariantUnderUniformBiasShift) {
  Rng rng(9);
  auto m = random_model(rng);
  for (int i = 0; i < 20; ++i) {
    auto g = random_ngram(m, rng);
    auto a = forward(m, g);
    auto shifted = m;
    shifted.b2.tail(m.categories()).array() += 7.25;
    auto b = forward(shifted, g);
    Eigen::Index ia, ib;
    a.tail(m.categories()).maxCoeff(&ia);
    b.tail(m.categories()).maxCoeff(&ib);
    EXPECT_EQ(ia, ib);
  }
}

TEST(ModelFile, RoundTripAndCorruption) {
  Rng rng(10);
  auto m = random_model(rng, 12, 5, 3, 2, 4);
  std::stringstream buf;
  save_model(m, buf);
  auto back = load_model(buf);
  EXPECT_EQ(back.window, 5);
  EXPECT_EQ(back.E, m.E);
  EXPECT_EQ(back.W1, m.W1);
  EXPECT_EQ(back.b2, m.b2);

  std::string bytes = buf.str();
  std::stringstream bad_magic(std::string("XXXXXXXX") + bytes.substr(8));
  EXPECT_THROW(load_model(bad_magic), DataError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(load_model(truncated), DataError);
}
