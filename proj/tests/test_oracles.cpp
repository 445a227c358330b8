// Sanity checks of the reference implementations against hand-computed values.

#include <gtest/gtest.h>

#include "relop/checks.hpp"
#include "relop/oracles.hpp"

using namespace relop;

TEST(Oracle, BinomialTable) {
  EXPECT_EQ(static_cast<unsigned long long>(oracle::binom(5, 2)), 10ull);
  EXPECT_EQ(static_cast<unsigned long long>(oracle::binom(60, 30)), 118264581564861424ull);
  EXPECT_EQ(oracle::binom(7, 8), 0u);
  unsigned __int128 row = 0;
  for (int k = 0; k <= 120; ++k) row += oracle::binom(120, k);
  EXPECT_TRUE(row == (static_cast<unsigned __int128>(1) << 120));
  EXPECT_THROW(oracle::binom(121, 3), std::out_of_range);
}

TEST(Oracle, HypergeometricPmf) {
  EXPECT_DOUBLE_EQ(oracle::hypergeom_pmf(10, 4, 3, 2), 0.3);
  EXPECT_EQ(oracle::hypergeom_pmf(10, 4, 3, 4), 0.0);
  for (long N : {20L, 60L, 200L}) {
    double s = 0.0;
    for (long k = 0; k <= 15; ++k) s += oracle::hypergeom_pmf(N, 15, N / 2, k);
    EXPECT_NEAR(s, 1.0, 1e-10) << N;
  }
}

TEST(Oracle, ScalarForwardPass) {
  auto m = OoweModel::zeros(3, 1, 1, 1, 2);
  m.E(2, 0) = 2.0;
  m.W1(0, 0) = 1.0;
  m.W2(0, 0) = 3.0;
  m.b2[2] = 0.5;
  // hidden clips at 1
  const auto s = oracle::oowe_scores(m, {2});
  EXPECT_EQ(s, (std::vector<double>{3.0, 0.0, 0.5}));
  // the second category outscores the true one
  EXPECT_DOUBLE_EQ(oracle::oowe_loss(m, {2}, {2}, 0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(oracle::oowe_loss(m, {2}, {2}, 0, 0.0), 1.0);
}

TEST(Oracle, HarmonicSolveOnAPath) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(4, 4);
  W(1, 0) = W(1, 2) = 0.5;
  W(2, 1) = W(2, 3) = 0.5;
  const auto L = oracle::harmonic_solve(W, {0, -1, -1, 1}, 2);
  EXPECT_NEAR(L(1, 0), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(L(2, 1), 2.0 / 3.0, 1e-14);
}

TEST(Oracle, Procrustes) {
  Eigen::MatrixXd A(3, 2);
  A << 0, 0, 1, 0, 0, 2;
  Eigen::Matrix2d R;
  R << 0, -1, 1, 0;
  Eigen::MatrixXd B = (A * R).rowwise() + Eigen::RowVector2d(5, 5);
  EXPECT_LT(oracle::procrustes_residual(A, B), 1e-15);
  Eigen::MatrixXd F = A;
  F.col(0) *= -1.0;
  EXPECT_LT(oracle::procrustes_residual(A, F), 1e-15);
  EXPECT_GT(oracle::procrustes_residual(A, 2.0 * A), 0.3);
}

TEST(Oracle, Ranks) {
  EXPECT_EQ(oracle::average_ranks({3, 1, 3, 0}), (std::vector<double>{3.5, 2, 3.5, 1}));
  EXPECT_DOUBLE_EQ(oracle::spearman({1, 2, 3, 4}, {10, 20, 25, 100}), 1.0);
  EXPECT_DOUBLE_EQ(oracle::spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
}

TEST(Oracle, Separability) {
  Eigen::MatrixXd xo(4, 2);
  xo << 0, 0, 1, 1, 0, 1, 1, 0;
  EXPECT_FALSE(oracle::linearly_separable_2d(xo, {0, 0, 1, 1}));
  EXPECT_TRUE(oracle::linearly_separable_2d(xo, {0, 1, 1, 1}));
  // only a tilted line separates these
  Eigen::MatrixXd tilt(4, 2);
  tilt << 0, 0, 10, 1, 0, 1.5, 10, 2.5;
  EXPECT_TRUE(oracle::linearly_separable_2d(tilt, {0, 0, 1, 1}));
  // touching sets are not strictly separable
  Eigen::MatrixXd touch(3, 2);
  touch << 0, 0, 1, 0, 1, 0;
  EXPECT_FALSE(oracle::linearly_separable_2d(touch, {0, 0, 1}));
}

TEST(Oracle, GridSearchWeights) {
  Eigen::VectorXd x(1), a(1), b(1);
  x << 0.0;
  a << -1.0;
  b << 1.0;
  const auto w = oracle::brute_force_lnp_weights(x, {a, b});
  EXPECT_NEAR(w[0], 0.5, 1e-6);
  EXPECT_NEAR(w[1], 0.5, 1e-6);
}

TEST(Oracle, ChecksPassOnTheImplementation) {
  Rng rng(3);
  for (const auto& r : {oracle::check_hypergeometric(25), oracle::check_weights(10, rng), oracle::check_harmonic(10, rng),
                        oracle::check_procrustes_mds(5, rng, 1e-8, 40)}) {
    EXPECT_TRUE(r.passed) << r.line();
    EXPECT_EQ(r.line().rfind("PASS ", 0), 0u);
  }
}
