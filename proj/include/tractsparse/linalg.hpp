#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "tractsparse/error.hpp"

namespace tractsparse::linalg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SymEig {
  VectorXd values;   // ascending
  MatrixXd vectors;  // columns orthonormal
};

inline void require_symmetric(const MatrixXd& a, double tol = 1e-10) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::InvalidArgument, "matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw Error(ErrorCode::InvalidArgument, "matrix is not symmetric");
}

inline SymEig sym_eig(const MatrixXd& a) {
  require_symmetric(a);
  if (a.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(a);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::NoConvergence, "symmetric eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Smallest eigenvalue of a symmetric matrix by power iteration on
/// c*I - A, where c bounds the spectrum (Gershgorin).
inline double smallest_eigenvalue_power(const MatrixXd& a, double rel_tol = 1e-6,
                                        int max_iter = 10000) {
  const Index n = a.rows();
  const double c = a.cwiseAbs().rowwise().sum().maxCoeff();
  VectorXd v = VectorXd::LinSpaced(n, 1.0, 2.0).normalized();
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    VectorXd next = c * v - a * v;
    const double norm = next.norm();
    if (norm == 0.0) return c;
    next /= norm;
    const double rayleigh = c - next.dot(c * next - a * next);
    const double lambda = c - rayleigh;  // eigenvalue of c*I - A
    if (it > 0 && std::abs(lambda - estimate) <= rel_tol * std::max(std::abs(lambda), 1e-300))
      return c - lambda;
    estimate = lambda;
    v = next;
  }
  throw Error(ErrorCode::EigenFailure, "power iteration did not converge");
}

/// A = Q T Q^T with Q orthogonal and T quasi upper triangular. For a
/// symmetric input T is diagonal and comes from the eigendecomposition.
struct SchurForm {
  MatrixXd q;
  MatrixXd t;
  bool diagonal = false;
};

inline SchurForm schur(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::InvalidArgument, "schur: matrix must be square");
  Eigen::RealSchur<MatrixXd> solver(a);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::NoConvergence, "real Schur decomposition did not converge");
  return {solver.matrixU(), solver.matrixT(), false};
}

inline SchurForm schur_symmetric(const MatrixXd& a) {
  auto eig = sym_eig(a);
  SchurForm form;
  form.q = std::move(eig.vectors);
  form.t = eig.values.asDiagonal();
  form.diagonal = true;
  return form;
}

namespace detail {

// Sizes of the 1x1 / 2x2 diagonal blocks of a quasi-triangular matrix.
inline std::vector<Index> block_starts(const MatrixXd& t) {
  std::vector<Index> starts;
  const Index n = t.rows();
  for (Index i = 0; i < n;) {
    starts.push_back(i);
    i += (i + 1 < n && t(i + 1, i) != 0.0) ? 2 : 1;
  }
  starts.push_back(n);
  return starts;
}

}  // namespace detail

/// Solves P W + W Q = R by Bartels-Stewart. The Schur form of Q may be
/// supplied so that repeated solves against the same Q skip its
/// factorization.
inline MatrixXd sylvester_solve(const MatrixXd& p, const MatrixXd& q, const MatrixXd& r,
                                const SchurForm* schur_q = nullptr) {
  if (p.rows() != p.cols() || q.rows() != q.cols() || r.rows() != p.rows() ||
      r.cols() != q.rows())
    throw Error(ErrorCode::InvalidArgument, "sylvester_solve: dimension mismatch");
  const Index m = p.rows();
  const Index n = q.rows();

  const SchurForm sp = schur(p);
  SchurForm owned;
  if (!schur_q) {
    owned = schur(q);
    schur_q = &owned;
  }
  const MatrixXd& ta = sp.t;
  const MatrixXd& tb = schur_q->t;

  MatrixXd c = sp.q.transpose() * r * schur_q->q;
  MatrixXd y = MatrixXd::Zero(m, n);

  const auto rb = detail::block_starts(ta);
  const auto cb = detail::block_starts(tb);
  const double scale = std::max({ta.cwiseAbs().maxCoeff(), tb.cwiseAbs().maxCoeff(), 1e-300});

  for (std::size_t jb = 0; jb + 1 < cb.size(); ++jb) {
    const Index j0 = cb[jb];
    const Index nj = cb[jb + 1] - j0;
    // Remove contributions of already solved column blocks.
    if (!schur_q->diagonal && j0 > 0)
      c.middleCols(j0, nj).noalias() -= y.leftCols(j0) * tb.block(0, j0, j0, nj);
    for (std::size_t ib = rb.size() - 1; ib-- > 0;) {
      const Index i0 = rb[ib];
      const Index ni = rb[ib + 1] - i0;
      MatrixXd rhs = c.block(i0, j0, ni, nj);
      const Index below = m - (i0 + ni);
      if (below > 0)
        rhs.noalias() -= ta.block(i0, i0 + ni, ni, below) * y.block(i0 + ni, j0, below, nj);
      const MatrixXd a_blk = ta.block(i0, i0, ni, ni);
      const MatrixXd b_blk = tb.block(j0, j0, nj, nj);
      if (ni == 1 && nj == 1) {
        const double denom = a_blk(0, 0) + b_blk(0, 0);
        if (std::abs(denom) <= 1e-14 * scale)
          throw Error(ErrorCode::SingularPencil, "spectra of P and -Q overlap");
        y(i0, j0) = rhs(0, 0) / denom;
        continue;
      }
      // Small Kronecker system: (I (x) A + B^T (x) I) vec(Y) = vec(rhs).
      const Index k = ni * nj;
      MatrixXd sys = MatrixXd::Zero(k, k);
      for (Index cj = 0; cj < nj; ++cj) {
        sys.block(cj * ni, cj * ni, ni, ni) += a_blk;
        for (Index ck = 0; ck < nj; ++ck)
          sys.block(cj * ni, ck * ni, ni, ni).diagonal().array() += b_blk(ck, cj);
      }
      Eigen::FullPivLU<MatrixXd> lu(sys);
      if (lu.rank() < k || std::abs(lu.determinant()) <= 1e-14 * std::pow(scale, double(k)))
        throw Error(ErrorCode::SingularPencil, "spectra of P and -Q overlap");
      const VectorXd sol = lu.solve(Eigen::Map<const VectorXd>(rhs.data(), k));
      y.block(i0, j0, ni, nj) = Eigen::Map<const MatrixXd>(sol.data(), ni, nj);
    }
  }
  return sp.q * y * schur_q->q.transpose();
}

/// Solves (A + ridge I) X = B, Cholesky first and LDL^T as fallback.
inline MatrixXd ridge_solve(const MatrixXd& a, const MatrixXd& b, double ridge) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw Error(ErrorCode::InvalidArgument, "ridge_solve: dimension mismatch");
  MatrixXd reg = a;
  reg.diagonal().array() += ridge;
  Eigen::LLT<MatrixXd> llt(reg);
  if (llt.info() == Eigen::Success) {
    MatrixXd x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  Eigen::LDLT<MatrixXd> ldlt(reg);
  if (ldlt.info() == Eigen::Success) {
    const VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > 0 && d.cwiseAbs().minCoeff() > 1e-15 * dmax) {
      MatrixXd x = ldlt.solve(b);
      if (x.allFinite()) return x;
    }
  }
  throw Error(ErrorCode::SingularAfterRidge, "matrix is singular even after ridge");
}

/// min_w  w^T G w - 2 rhs^T w  subject to w >= 0, by the Lawson-Hanson
/// active-set method applied to the Gram system.
inline VectorXd nnls(const MatrixXd& gram, const VectorXd& rhs, double tol = 1e-12,
                     double ridge = 1e-10) {
  const Index s = gram.rows();
  if (gram.cols() != s || rhs.size() != s)
    throw Error(ErrorCode::InvalidArgument, "nnls: dimension mismatch");
  VectorXd w = VectorXd::Zero(s);
  std::vector<bool> passive(static_cast<std::size_t>(s), false);
  const double scale = std::max({gram.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff(), 1e-300});
  const double kkt_tol = tol * scale;

  auto solve_passive = [&](VectorXd& z) {
    std::vector<Index> idx;
    for (Index i = 0; i < s; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    const auto k = static_cast<Index>(idx.size());
    MatrixXd g(k, k);
    VectorXd r(k);
    for (Index a = 0; a < k; ++a) {
      r(a) = rhs(idx[a]);
      for (Index b = 0; b < k; ++b) g(a, b) = gram(idx[a], idx[b]);
    }
    VectorXd sol;
    Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() == Eigen::Success) sol = llt.solve(r);
    if (sol.size() != k || !sol.allFinite()) sol = ridge_solve(g, r, ridge * scale);
    z = VectorXd::Zero(s);
    for (Index a = 0; a < k; ++a) z(idx[a]) = sol(a);
  };

  const int max_outer = 3 * static_cast<int>(s) + 10;
  for (int outer = 0; outer < max_outer; ++outer) {
    const VectorXd descent = rhs - gram * w;  // half the negative gradient
    Index best = -1;
    double best_val = kkt_tol;
    for (Index i = 0; i < s; ++i)
      if (!passive[static_cast<std::size_t>(i)] && descent(i) > best_val) {
        best_val = descent(i);
        best = i;
      }
    if (best < 0) return w;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner <= max_outer; ++inner) {
      VectorXd z;
      solve_passive(z);
      bool feasible = true;
      for (Index i = 0; i < s; ++i)
        if (passive[static_cast<std::size_t>(i)] && z(i) <= 0) feasible = false;
      if (feasible) {
        w = z;
        break;
      }
      double alpha = 1.0;
      for (Index i = 0; i < s; ++i)
        if (passive[static_cast<std::size_t>(i)] && z(i) <= 0)
          alpha = std::min(alpha, w(i) / (w(i) - z(i)));
      w += alpha * (z - w);
      for (Index i = 0; i < s; ++i)
        if (passive[static_cast<std::size_t>(i)] && w(i) <= kkt_tol * 1e-3) {
          passive[static_cast<std::size_t>(i)] = false;
          w(i) = 0.0;
        }
    }
  }
  throw Error(ErrorCode::MaxIterations, "nnls active set did not terminate");
}

}  // namespace tractsparse::linalg
