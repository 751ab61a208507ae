#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tractsparse/kernel.hpp"
#include "tractsparse/synth.hpp"

using namespace tractsparse;
using Eigen::MatrixXd;

namespace {

DistanceMatrix random_distances(std::mt19937_64& rng, int n) {
  Tractogram t;
  for (int i = 0; i < n; ++i) t.streamlines.push_back(oracle::random_streamline(rng));
  return pairwise_distances(t, Measure::Mcp);
}

}  // namespace

TEST(Kernel, MedianGamma) {
  MatrixXd d(3, 3);
  d << 0, 1, 2,
       1, 0, 3,
       2, 3, 0;
  EXPECT_DOUBLE_EQ(select_gamma(DistanceMatrix(d)), 1.0 / (2.0 * 4.0));
  MatrixXd even(4, 4);
  even << 0, 1, 2, 3,
          1, 0, 4, 5,
          2, 4, 0, 6,
          3, 5, 6, 0;
  EXPECT_DOUBLE_EQ(select_gamma(DistanceMatrix(even)), 1.0 / (2.0 * 3.5 * 3.5));
}

TEST(Kernel, AllZeroDistances) {
  const DistanceMatrix d(MatrixXd::Zero(4, 4));
  try {
    select_gamma(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllZeroDistances);
  }
  EXPECT_EQ(select_gamma_or_default(d), 1.0);
}

TEST(Kernel, RbfEntries) {
  std::mt19937_64 rng(1);
  const auto d = random_distances(rng, 20);
  const double g = select_gamma(d);
  const auto k = rbf_kernel(d, g);
  for (Eigen::Index i = 0; i < 20; ++i) {
    EXPECT_EQ(k.entry(i, i), 1.0);
    for (Eigen::Index j = 0; j < 20; ++j) {
      EXPECT_EQ(k.entry(i, j), std::exp(-g * d(i, j) * d(i, j)));
      EXPECT_GT(k.entry(i, j), 0.0);
    }
  }
}

TEST(Kernel, SpectrumShiftMakesPsdAndOnlyTouchesDiagonal) {
  std::mt19937_64 rng(2);
  const auto d = random_distances(rng, 60);
  const auto k = rbf_kernel(d, select_gamma(d));
  const auto s = spectrum_shift(k);
  const MatrixXd diff = s.dense() - k.dense();
  EXPECT_EQ((diff - MatrixXd(diff.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GE(linalg::sym_eig(s.dense()).values(0), -1e-9);
  EXPECT_NEAR(diff(0, 0), s.shift(), 1e-15);
}

TEST(Kernel, PsdKernelIsNotShifted) {
  std::mt19937_64 rng(3);
  const MatrixXd x = oracle::random_matrix(rng, 10, 3);
  const auto k = KernelMatrix::dense_from(x * x.transpose() + MatrixXd::Identity(10, 10));
  EXPECT_EQ(spectrum_shift(k).shift(), 0.0);
}

TEST(Kernel, FactoredMatchesDenseOperations) {
  std::mt19937_64 rng(4);
  const MatrixXd g = oracle::random_matrix(rng, 15, 4);
  const auto f = KernelMatrix::factored_from(g, {0, 1, 2, 3}, 0.0, 0.0, false);
  const auto d = KernelMatrix::dense_from(g * g.transpose());
  const MatrixXd a = oracle::random_matrix(rng, 15, 3);
  EXPECT_LE((f.multiply(a) - d.multiply(a)).norm(), 1e-12 * d.multiply(a).norm());
  EXPECT_NEAR(f.trace(), d.trace(), 1e-12 * d.trace());
  EXPECT_NEAR(f.entry(3, 7), d.entry(3, 7), 1e-12);
  EXPECT_LE((f.scaled(2.5).dense() - d.scaled(2.5).dense()).norm(), 1e-12 * d.dense().norm());
}

TEST(Kernel, SparseMultiplyMatchesDense) {
  std::mt19937_64 rng(5);
  const MatrixXd x = oracle::random_matrix(rng, 30, 30);
  const auto k = KernelMatrix::dense_from(x * x.transpose());
  MatrixXd a = MatrixXd::Zero(30, 4);
  a(2, 0) = 1.0;
  a(7, 1) = 0.5;
  a(9, 1) = 0.25;
  a(20, 3) = 2.0;
  EXPECT_LE((k.multiply(a) - k.dense() * a).norm(), 1e-12 * (k.dense() * a).norm());
}

TEST(Nystrom, FullLandmarkSetReconstructsPsdKernel) {
  std::mt19937_64 rng(6);
  const MatrixXd x = oracle::random_matrix(rng, 40, 50);
  const MatrixXd k = x * x.transpose();
  const auto approx = nystrom_from_dense(k, 40, 1);
  EXPECT_LE((approx.dense() - k).norm(), 1e-6 * k.norm());
}

TEST(Nystrom, LowRankKernelIsExact) {
  std::mt19937_64 rng(7);
  const MatrixXd x = oracle::random_matrix(rng, 50, 3);
  const MatrixXd k = x * x.transpose();
  const auto approx = nystrom_from_dense(k, 10, 2);
  EXPECT_LE((approx.dense() - k).norm(), 1e-6 * k.norm());
  EXPECT_EQ(approx.landmarks().size(), 10u);
}

TEST(Nystrom, StreamlineKernelApproximatesShiftedDense) {
  const auto data = synth::generate(synth::preset("overlap3", 40), 3);
  const auto d = pairwise_distances(data.tractogram, Measure::Mcp);
  const double g = select_gamma(d);
  const auto dense = spectrum_shift(rbf_kernel(d, g));
  const auto full = nystrom_kernel(data.tractogram, Measure::Mcp, g, 120, 1);
  EXPECT_LE((full.dense() - dense.dense()).norm(), 1e-8 * dense.dense().norm());
  const auto raw = rbf_kernel(d, g);
  const auto partial = nystrom_kernel(data.tractogram, Measure::Mcp, std::nullopt, 40, 1);
  EXPECT_LE((partial.dense() - raw.dense()).norm(), 0.1 * raw.dense().norm());
  EXPECT_GT(partial.gamma(), 0.0);
}

TEST(Nystrom, LandmarkValidation) {
  const MatrixXd k = MatrixXd::Identity(5, 5);
  EXPECT_THROW(nystrom_from_dense(k, 0, 1), Error);
  EXPECT_THROW(nystrom_from_dense(k, 6, 1), Error);
  const auto lm = sample_landmarks(100, 10, 3);
  EXPECT_TRUE(std::is_sorted(lm.begin(), lm.end()));
  EXPECT_EQ(lm, sample_landmarks(100, 10, 3));
}
