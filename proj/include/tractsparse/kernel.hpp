#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "tractsparse/core.hpp"
#include "tractsparse/distances.hpp"
#include "tractsparse/linalg.hpp"

namespace tractsparse {

/// Positive semi-definite streamline similarity. Either a dense n x n matrix
/// or a Nystrom factor G with K ~= G G^T. Solvers only touch the kernel
/// through multiply(), column() and trace(), so both forms are
/// interchangeable; dense() materializes the n x n matrix on request.
class KernelMatrix {
 public:
  enum class Form { Dense, Factored };

  static KernelMatrix dense_from(Eigen::MatrixXd k, double gamma = 0.0, double shift = 0.0) {
    KernelMatrix out;
    out.form_ = Form::Dense;
    out.data_ = std::move(k);
    out.gamma_ = gamma;
    out.shift_ = shift;
    return out;
  }

  static KernelMatrix factored_from(Eigen::MatrixXd g, std::vector<Eigen::Index> landmarks,
                                    double gamma = 0.0, double shift = 0.0,
                                    bool rank_deficient = false) {
    KernelMatrix out;
    out.form_ = Form::Factored;
    out.data_ = std::move(g);
    out.landmarks_ = std::move(landmarks);
    out.gamma_ = gamma;
    out.shift_ = shift;
    out.rank_deficient_ = rank_deficient;
    return out;
  }

  Form form() const noexcept { return form_; }
  bool is_factored() const noexcept { return form_ == Form::Factored; }
  Eigen::Index n() const noexcept { return data_.rows(); }
  double gamma() const noexcept { return gamma_; }
  double shift() const noexcept { return shift_; }
  bool rank_deficient() const noexcept { return rank_deficient_; }
  const std::vector<Eigen::Index>& landmarks() const noexcept { return landmarks_; }

  /// The dense matrix, or the factor G for the factored form.
  const Eigen::MatrixXd& data() const noexcept { return data_; }

  Eigen::MatrixXd multiply(const Eigen::MatrixXd& m) const {
    if (form_ == Form::Factored) return data_ * (data_.transpose() * m);
    // Dictionaries and assignments are mostly zeros.
    const Eigen::Index nnz = (m.array() != 0.0).count();
    if (4 * nnz < m.size()) {
      const Eigen::SparseMatrix<double> sparse = m.sparseView(0.0, 0.0);
      return data_ * sparse;
    }
    return data_ * m;
  }

  Eigen::VectorXd column(Eigen::Index i) const {
    if (form_ == Form::Dense) return data_.col(i);
    return data_ * data_.row(i).transpose();
  }

  double entry(Eigen::Index i, Eigen::Index j) const {
    if (form_ == Form::Dense) return data_(i, j);
    return data_.row(i).dot(data_.row(j));
  }

  double trace() const {
    if (form_ == Form::Dense) return data_.trace();
    return data_.squaredNorm();
  }

  Eigen::MatrixXd dense() const {
    if (form_ == Form::Dense) return data_;
    return data_ * data_.transpose();
  }

  KernelMatrix scaled(double c) const {
    KernelMatrix out = *this;
    out.data_ *= (form_ == Form::Dense) ? c : std::sqrt(c);
    return out;
  }

 private:
  Form form_ = Form::Dense;
  Eigen::MatrixXd data_;
  std::vector<Eigen::Index> landmarks_;
  double gamma_ = 0.0;
  double shift_ = 0.0;
  bool rank_deficient_ = false;
};

/// gamma = 1 / (2 sigma^2) with sigma the median off-diagonal distance.
inline double select_gamma(const DistanceMatrix& d) {
  const Eigen::Index n = d.n();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "select_gamma needs at least 2 streamlines");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) values.push_back(d(i, j));
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double median = values[mid];
  if (values.size() % 2 == 0) {
    const double lower =
        *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    median = (lower + median) / 2.0;
  }
  if (median <= 0.0) {
    if (*std::max_element(values.begin(), values.end()) <= 0.0)
      throw Error(ErrorCode::AllZeroDistances, "every off-diagonal distance is zero");
    // More than half the pairs coincide; fall back to the mean of the
    // non-zero distances so the kernel still discriminates.
    double sum = 0.0;
    std::size_t count = 0;
    for (double v : values)
      if (v > 0) sum += v, ++count;
    median = sum / static_cast<double>(count);
  }
  return 1.0 / (2.0 * median * median);
}

/// select_gamma with the documented fallback of 1 for all-zero distances.
inline double select_gamma_or_default(const DistanceMatrix& d) {
  try {
    return select_gamma(d);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::AllZeroDistances) return 1.0;
    throw;
  }
}

inline double rbf(double gamma, double dist) { return std::exp(-gamma * dist * dist); }

inline KernelMatrix rbf_kernel(const DistanceMatrix& d, double gamma) {
  if (!(gamma > 0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
  Eigen::MatrixXd k = d.values().unaryExpr([gamma](double v) { return rbf(gamma, v); });
  return KernelMatrix::dense_from(std::move(k), gamma, 0.0);
}

inline constexpr Eigen::Index kExactEigenLimit = 4000;

inline double min_eigenvalue(const Eigen::MatrixXd& k) {
  if (k.rows() <= kExactEigenLimit) return linalg::sym_eig(k).values(0);
  return linalg::smallest_eigenvalue_power(k, 1e-6);
}

/// K_psd = K + |lambda_min| I when lambda_min < 0. Only self-similarities
/// change.
inline KernelMatrix spectrum_shift(const KernelMatrix& k) {
  if (k.is_factored())
    throw Error(ErrorCode::InvalidArgument, "spectrum_shift requires a dense kernel");
  double lambda_min;
  try {
    lambda_min = min_eigenvalue(k.data());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw;
    throw Error(ErrorCode::EigenFailure, e.what());
  }
  Eigen::MatrixXd shifted = k.data();
  double shift = 0.0;
  if (lambda_min < 0) {
    shift = -lambda_min;
    shifted.diagonal().array() += shift;
  }
  return KernelMatrix::dense_from(std::move(shifted), k.gamma(), k.shift() + shift);
}

/// Uniform landmark sample of size p from [0, n), in ascending order.
inline std::vector<Eigen::Index> sample_landmarks(Eigen::Index n, Eigen::Index p,
                                                  std::uint64_t seed) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(p));
  std::sort(all.begin(), all.end());
  return all;
}

/// Builds G (n x p) from the landmark rows C = K[landmarks, :] of the kernel:
/// G = C^T K_a^{+1/2}, with K_a = C[:, landmarks] shifted to be PSD and
/// eigenvalues below 1e-10 * lambda_max dropped from the pseudo-inverse.
inline KernelMatrix nystrom_from_rows(Eigen::MatrixXd landmark_rows,
                                      std::vector<Eigen::Index> landmarks, double gamma,
                                      bool shift_landmarks = true) {
  const auto p = static_cast<Eigen::Index>(landmarks.size());
  Eigen::MatrixXd ka(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b) ka(a, b) = landmark_rows(a, landmarks[b]);
  ka = (ka + ka.transpose()) / 2.0;

  double shift = 0.0;
  auto eig = linalg::sym_eig(ka);
  if (shift_landmarks && eig.values(0) < 0) {
    shift = -eig.values(0);
    eig.values.array() += shift;
    for (Eigen::Index a = 0; a < p; ++a) landmark_rows(a, landmarks[a]) += shift;
  }
  const double lambda_max = eig.values.maxCoeff();
  if (!(lambda_max > 0))
    throw Error(ErrorCode::EigenFailure, "landmark kernel has no positive eigenvalue");
  const double floor = 1e-10 * lambda_max;
  Eigen::Index dropped = 0;
  Eigen::VectorXd inv_sqrt(p);
  for (Eigen::Index a = 0; a < p; ++a) {
    if (eig.values(a) < floor) {
      inv_sqrt(a) = 0.0;
      ++dropped;
    } else {
      inv_sqrt(a) = 1.0 / std::sqrt(eig.values(a));
    }
  }
  const Eigen::MatrixXd ka_inv_sqrt =
      eig.vectors * inv_sqrt.asDiagonal() * eig.vectors.transpose();
  Eigen::MatrixXd g = landmark_rows.transpose() * ka_inv_sqrt;
  return KernelMatrix::factored_from(std::move(g), std::move(landmarks), gamma, shift,
                                     2 * dropped > p);
}

/// Nystrom approximation of a kernel given explicitly (used for testing and
/// for kernels that are already materialized).
inline KernelMatrix nystrom_from_dense(const Eigen::MatrixXd& k, Eigen::Index p,
                                       std::uint64_t seed, bool shift_landmarks = false) {
  if (p < 1 || p > k.rows())
    throw Error(ErrorCode::InvalidArgument, "landmark count must be in [1, n]");
  auto landmarks = sample_landmarks(k.rows(), p, seed);
  Eigen::MatrixXd rows(p, k.cols());
  for (Eigen::Index a = 0; a < p; ++a) rows.row(a) = k.row(landmarks[static_cast<std::size_t>(a)]);
  return nystrom_from_rows(std::move(rows), std::move(landmarks), 0.0, shift_landmarks);
}

/// Nystrom kernel computed from streamline distances: only the p x n block
/// of distances between landmarks and all streamlines is evaluated. Without
/// an explicit gamma the median rule runs on that block, self pairs excluded.
inline KernelMatrix nystrom_kernel(const Tractogram& t, Measure measure, std::optional<double> gamma,
                                   Eigen::Index p, std::uint64_t seed, unsigned threads = 1) {
  validate_tractogram(t);
  const auto n = static_cast<Eigen::Index>(t.size());
  if (p < 1 || p > n) throw Error(ErrorCode::InvalidArgument, "landmark count must be in [1, n]");
  if (gamma && !(*gamma > 0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
  auto landmarks = sample_landmarks(n, p, seed);
  Tractogram sub;
  for (auto idx : landmarks) sub.streamlines.push_back(t[static_cast<std::size_t>(idx)]);
  Eigen::MatrixXd rows = cross_distances(sub, t, measure, threads);
  if (!gamma) {
    std::vector<double> values;
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != landmarks[static_cast<std::size_t>(a)]) values.push_back(rows(a, j));
    if (values.empty()) {
      gamma = 1.0;
    } else {
      const std::size_t mid = values.size() / 2;
      std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
      const double median = values[mid];
      gamma = median > 0 ? 1.0 / (2.0 * median * median) : 1.0;
    }
  }
  const double g = *gamma;
  rows = rows.unaryExpr([g](double v) { return rbf(g, v); });
  return nystrom_from_rows(std::move(rows), std::move(landmarks), g, true);
}

}  // namespace tractsparse
