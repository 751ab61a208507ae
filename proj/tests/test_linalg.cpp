#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tractsparse/linalg.hpp"

using namespace tractsparse;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Linalg, SymEigResidual) {
  std::mt19937_64 rng(1);
  for (int n : {1, 5, 40}) {
    MatrixXd a = oracle::random_matrix(rng, n, n);
    a = (a + a.transpose()).eval();
    const auto e = linalg::sym_eig(a);
    EXPECT_LE((a * e.vectors - e.vectors * e.values.asDiagonal()).norm(), 1e-10 * a.norm());
    EXPECT_LE((e.vectors.transpose() * e.vectors - MatrixXd::Identity(n, n)).norm(), 1e-10);
    for (int i = 1; i < n; ++i) EXPECT_LE(e.values(i - 1), e.values(i));
  }
}

TEST(Linalg, SymEigRejectsAsymmetric) {
  MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  EXPECT_THROW(linalg::sym_eig(a), Error);
}

TEST(Linalg, PowerIterationFindsSmallestEigenvalue) {
  std::mt19937_64 rng(2);
  MatrixXd a = oracle::random_matrix(rng, 30, 30);
  a = (a + a.transpose()).eval();
  const double exact = linalg::sym_eig(a).values(0);
  EXPECT_NEAR(linalg::smallest_eigenvalue_power(a, 1e-12, 200000), exact, 1e-4 * std::abs(exact));
}

TEST(Linalg, SchurReconstructs) {
  std::mt19937_64 rng(3);
  const MatrixXd a = oracle::random_matrix(rng, 12, 12);
  const auto s = linalg::schur(a);
  EXPECT_LE((s.q * s.t * s.q.transpose() - a).norm(), 1e-10 * a.norm());
  for (Eigen::Index i = 2; i < 12; ++i)
    for (Eigen::Index j = 0; j + 1 < i; ++j) EXPECT_EQ(s.t(i, j), 0.0);
}

TEST(Linalg, SylvesterResidualGeneral) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd p = oracle::random_spd(rng, 6);
    const MatrixXd q = oracle::random_matrix(rng, 15, 15) + 8.0 * MatrixXd::Identity(15, 15);
    const MatrixXd r = oracle::random_matrix(rng, 6, 15);
    const MatrixXd w = linalg::sylvester_solve(p, q, r);
    EXPECT_LE((p * w + w * q - r).norm(), 1e-10 * r.norm());
  }
}

TEST(Linalg, SylvesterWithPrecomputedSymmetricSchur) {
  std::mt19937_64 rng(5);
  const MatrixXd p = oracle::random_spd(rng, 4);
  MatrixXd q = oracle::random_matrix(rng, 20, 20);
  q = (q * q.transpose()).eval();
  const auto sq = linalg::schur_symmetric(q);
  const MatrixXd r = oracle::random_matrix(rng, 4, 20);
  const MatrixXd w = linalg::sylvester_solve(p, q, r, &sq);
  EXPECT_LE((p * w + w * q - r).norm(), 1e-8 * r.norm());
}

TEST(Linalg, SylvesterSingularPencil) {
  MatrixXd p(1, 1), q(1, 1), r(1, 1);
  p << 1.0;
  q << -1.0;
  r << 1.0;
  EXPECT_THROW(linalg::sylvester_solve(p, q, r), Error);
}

TEST(Linalg, RidgeSolveMatchesNormalEquations) {
  std::mt19937_64 rng(6);
  const MatrixXd a = oracle::random_spd(rng, 8);
  const MatrixXd b = oracle::random_matrix(rng, 8, 3);
  const MatrixXd x = linalg::ridge_solve(a, b, 0.5);
  EXPECT_LE(((a + 0.5 * MatrixXd::Identity(8, 8)) * x - b).norm(), 1e-10 * b.norm());
}

TEST(Linalg, RidgeSolveSingular) {
  const MatrixXd zero = MatrixXd::Zero(3, 3);
  try {
    linalg::ridge_solve(zero, MatrixXd::Ones(3, 1), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularAfterRidge);
  }
}

TEST(Linalg, NnlsMatchesSupportEnumeration) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const int s = size(rng);
    const MatrixXd g = oracle::random_spd(rng, s, 0.05);
    const VectorXd r = oracle::random_matrix(rng, s, 1);
    const VectorXd w = linalg::nnls(g, r);
    const VectorXd ref = oracle::brute_nnls(g, r);
    EXPECT_TRUE((w.array() >= 0).all());
    EXPECT_LE((w - ref).norm(), 1e-9 * std::max(1.0, ref.norm())) << "trial " << trial;
  }
}

TEST(Linalg, NnlsNegativeRhsGivesZero) {
  const MatrixXd g = MatrixXd::Identity(3, 3);
  const VectorXd r = -VectorXd::Ones(3);
  EXPECT_EQ(linalg::nnls(g, r), VectorXd::Zero(3));
}
