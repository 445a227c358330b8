#include <gtest/gtest.h>

#include <sstream>

#include "relop/aggregate.hpp"

using namespace relop;

namespace {

struct Fixture {
  Vocabulary vocab;
  OoweModel model;
};

Fixture fixture(int words = 20, int dim = 4, std::uint64_t seed = 1) {
  std::vector<std::string> doc;
  for (int w = 0; w < words; ++w) doc.push_back("w" + std::to_string(w));
  Fixture f{build_vocab({doc}, 1), OoweModel::zeros(words + 2, 1, dim, 1, 2)};
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index i = 0; i < f.model.E.size(); ++i) f.model.E.data()[i] = nd(rng);
  return f;
}

OpinionPoint point(std::string id, std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return {std::move(id), Level::user, x, 1};
}

Vector row(const Fixture& f, const std::string& w) { return f.model.E.row(f.vocab.index(w)).transpose(); }

}  // namespace

TEST(TweetVector, SingleToken) {
  auto f = fixture();
  auto p = tweet_vector(f.model, f.vocab, "t", {"w3"});
  ASSERT_TRUE(p);
  EXPECT_EQ(p->vector, row(f, "w3"));
  EXPECT_EQ(p->support_count, 1u);
}

TEST(TweetVector, OppositeVectorsCancel) {
  auto f = fixture();
  f.model.E.row(f.vocab.index("w1")) = -f.model.E.row(f.vocab.index("w0"));
  auto p = tweet_vector(f.model, f.vocab, "t", {"w0", "w1"});
  EXPECT_TRUE(p->vector.isZero(0.0));
}

TEST(TweetVector, MatchesBruteForceMean) {
  auto f = fixture();
  std::vector<std::string> toks{"w0", "w5", "w5", "w9", "w2", "w17", "w11", "w3", "w8", "w0"};
  Vector want = Vector::Zero(4);
  for (const auto& t : toks) want += row(f, t);
  want /= 10.0;
  auto p = tweet_vector(f.model, f.vocab, "t", toks);
  EXPECT_EQ(p->support_count, 10u);
  EXPECT_LT((p->vector - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TweetVector, ExclusionsAndSkip) {
  auto f = fixture();
  auto p = tweet_vector(f.model, f.vocab, "t", {"w1", "@bob", "#maga", "unknownword"}, {"#maga"});
  ASSERT_TRUE(p);
  EXPECT_EQ(p->vector, row(f, "w1"));
  EXPECT_FALSE(tweet_vector(f.model, f.vocab, "t", {"@bob", "zzz"}));
}

TEST(UserVector, VolumeInvariance) {
  auto one = point("t", {0.1, 0.7, -0.3});
  std::vector<OpinionPoint> many(1000, one);
  EXPECT_EQ(user_vector("u", {one}).vector, one.vector);
  EXPECT_EQ(user_vector("u", many).vector, one.vector);
  EXPECT_EQ(user_vector("u", many).support_count, 1000u);
}

TEST(StateVector, TrivialCases) {
  auto a = point("a", {1.0, -2.0});
  EXPECT_EQ(state_vector("CA", {a}).vector, a.vector);
  auto b = point("b", {-1.0, 2.0});
  EXPECT_TRUE(state_vector("CA", {a, b}).vector.isZero(0.0));
  EXPECT_THROW(state_vector("CA", {}), std::invalid_argument);
}

TEST(StateVector, MatchesBruteForceMean) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<OpinionPoint> users;
  Vector want = Vector::Zero(3);
  for (int i = 0; i < 37; ++i) {
    users.push_back(point("u", {u(rng), u(rng), u(rng)}));
    want += users.back().vector;
  }
  want /= 37.0;
  auto s = state_vector("TX", users);
  EXPECT_EQ(s.support_count, 37u);
  EXPECT_LT((s.vector - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CanonicalMean, PermutationAndMultiplicityInvariantBitwise) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vector> vs;
  for (int i = 0; i < 23; ++i) vs.push_back(Vector::NullaryExpr(5, [&] { return u(rng); }));
  const Vector base = canonical_mean(vs);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = vs;
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_EQ(canonical_mean(p), base);
    std::vector<Vector> scaled;
    for (const auto& v : p)
      for (int k = 0; k < 3 + trial; ++k) scaled.push_back(v);
    EXPECT_EQ(canonical_mean(scaled), base);
  }
}

TEST(StateVariation, Cases) {
  auto a = point("a", {0.5, 0.5});
  EXPECT_EQ(state_variation({a, a, a}), 0.0);
  EXPECT_DOUBLE_EQ(state_variation({point("a", {1.0}), point("b", {-1.0})}), 1.0);
}

TEST(StateVariation, MatchesTwoPassOracle) {
  Rng rng(4);
  std::normal_distribution<double> nd(2.0, 3.0);
  std::vector<OpinionPoint> users;
  for (int i = 0; i < 20; ++i) users.push_back(point("u", {nd(rng), nd(rng), nd(rng), nd(rng)}));
  double total = 0.0;
  for (int c = 0; c < 4; ++c) {
    // E[x^2] - E[x]^2 computed in long double as an independent route
    long double s = 0, s2 = 0;
    for (const auto& u : users) {
      s += u.vector[c];
      s2 += static_cast<long double>(u.vector[c]) * u.vector[c];
    }
    const long double m = s / 20;
    total += std::sqrt(static_cast<double>(s2 / 20 - m * m));
  }
  EXPECT_NEAR(state_variation(users), total / 4.0, 1e-10);
}

TEST(Representativeness, Cases) {
  EXPECT_EQ(representativeness(0, 5000.0), 0.0);
  EXPECT_DOUBLE_EQ(*representativeness(100, 1000000.0), 1e-4);
  EXPECT_FALSE(representativeness(100, std::nullopt));
  EXPECT_THROW(representativeness(1, 0.0), std::invalid_argument);
}

TEST(Representativeness, PopulationTable) {
  std::istringstream in("state_code,population\nCA,39250017\nWY,585501\nDC,681170\n");
  auto pop = read_population_csv(in);
  ASSERT_EQ(pop.size(), 3u);
  for (const auto& [code, p] : pop) {
    const std::size_t users = code.size() * 1000;
    EXPECT_DOUBLE_EQ(*representativeness(users, p), static_cast<double>(users) / p);
  }
  std::istringstream bad("state_code,population\nZZ,10\n");
  EXPECT_THROW(read_population_csv(bad), DataError);
}

TEST(MajorityState, LexicographicTiebreak) {
  EXPECT_EQ(majority_state({"TX", "CA", "TX"}), "TX");
  EXPECT_EQ(majority_state({"TX", "CA"}), "CA");
  EXPECT_FALSE(majority_state({}));
}

TEST(Aggregate, NestingUsesUserMeansNotTweetMeans) {
  auto f = fixture(4, 1);
  f.model.E.row(f.vocab.index("w0")) << 1.0;
  f.model.E.row(f.vocab.index("w1")) << -1.0;
  // u1 tweets three times at +1, u2 once at -1, both in OH
  std::vector<AggregationInputTweet> corpus{{"a", "u1", "OH", {"w0"}},
                                            {"b", "u1", "OH", {"w0"}},
                                            {"c", "u1", "OH", {"w0"}},
                                            {"d", "u2", "OH", {"w1"}}};
  auto r = aggregate(f.model, f.vocab, corpus, {});
  ASSERT_EQ(r.states.size(), 1u);
  EXPECT_EQ(r.states[0].vector[0], 0.0);
  EXPECT_EQ(r.states[0].support_count, 2u);
  EXPECT_NE(r.states[0].vector[0], 0.5);  // the tweet-level mean
  EXPECT_DOUBLE_EQ(r.summaries[0].user_stddev, 1.0);
}

TEST(Aggregate, VolumeAndPermutationInvariance) {
  auto f = fixture();
  Rng rng(5);
  std::uniform_int_distribution<int> w(0, 19), len(1, 6), st(0, 3), nt(1, 5);
  const std::vector<std::string> states{"CA", "NY", "OH", "TX"};
  std::vector<AggregationInputTweet> corpus;
  for (int u = 0; u < 40; ++u) {
    const auto s = states[static_cast<std::size_t>(st(rng))];
    const int n = nt(rng);
    for (int t = 0; t < n; ++t) {
      AggregationInputTweet tw{"u" + std::to_string(u) + "_" + std::to_string(t), "u" + std::to_string(u),
                               u % 7 == 0 ? std::optional<std::string>() : std::optional(s), {}};
      const int l = len(rng);
      for (int k = 0; k < l; ++k) tw.tokens.push_back("w" + std::to_string(w(rng)));
      corpus.push_back(tw);
    }
  }
  const auto base = aggregate(f.model, f.vocab, corpus, {});
  auto shuffled = corpus;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto dup = corpus;
  for (const auto& tw : corpus)
    if (tw.user_id == "u3")
      for (int k = 0; k < 9; ++k) dup.push_back(tw);
  for (const auto& other : {aggregate(f.model, f.vocab, shuffled, {}), aggregate(f.model, f.vocab, dup, {})}) {
    ASSERT_EQ(other.states.size(), base.states.size());
    for (std::size_t s = 0; s < base.states.size(); ++s) {
      EXPECT_EQ(other.states[s].entity_id, base.states[s].entity_id);
      EXPECT_EQ(other.states[s].vector, base.states[s].vector);
    }
    ASSERT_EQ(other.users.size(), base.users.size());
    for (std::size_t u = 0; u < base.users.size(); ++u) EXPECT_EQ(other.users[u].vector, base.users[u].vector);
  }
  // users without a located tweet stay at the user level only
  std::size_t located = 0;
  for (const auto& s : base.summaries) located += s.user_count;
  EXPECT_LT(located, base.users.size());
}

TEST(Aggregate, SkipsEmptyTweetsAndFillsRepresentativeness) {
  auto f = fixture();
  std::vector<AggregationInputTweet> corpus{{"a", "u1", "CA", {"w0"}}, {"b", "u2", "CA", {"@x"}}, {"c", "u3", "WY", {"w2"}}};
  auto r = aggregate(f.model, f.vocab, corpus, {}, {{"CA", 1000.0}});
  EXPECT_EQ(r.skipped_tweets, 1u);
  ASSERT_EQ(r.summaries.size(), 2u);
  EXPECT_DOUBLE_EQ(*r.summaries[0].representativeness, 1e-3);
  EXPECT_FALSE(r.summaries[1].representativeness);
  const auto csv = state_summary_csv(r.summaries);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "state,user_count,stddev,representativeness");
  EXPECT_NE(csv.find("\nWY,1,0,\n"), std::string::npos);
}

TEST(Aggregate, PointsTsvFormat) {
  auto tsv = opinion_points_tsv({point("u1", {0.5, -1.0})});
  EXPECT_EQ(tsv, "user\tu1\t1\t0.5\t-1\n");
}
