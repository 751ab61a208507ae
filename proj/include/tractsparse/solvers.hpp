#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "tractsparse/core.hpp"
#include "tractsparse/detail/parallel.hpp"
#include "tractsparse/kernel.hpp"
#include "tractsparse/kmeans.hpp"
#include "tractsparse/linalg.hpp"

namespace tractsparse {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Bundle prototypes in kernel space, D = Phi A, with A an n x m matrix of
/// coefficients over the training streamlines.
struct Dictionary {
  MatrixXd a;
  std::vector<bool> empty;  // per column; empty atoms take no part in assignment

  Index n() const noexcept { return a.rows(); }
  Index m() const noexcept { return a.cols(); }
  int non_empty() const {
    return static_cast<int>(std::count(empty.begin(), empty.end(), false));
  }

  static Dictionary from(MatrixXd a) {
    Dictionary d{std::move(a), {}};
    d.empty.assign(static_cast<std::size_t>(d.a.cols()), false);
    return d;
  }
};

struct FitResult {
  Dictionary dictionary;
  MatrixXd assignment;  // m x n, non-negative
  Labeling labels;
  std::vector<double> cost_trace;
  std::vector<double> primal_residual_trace;
  std::vector<int> inner_iterations;
  int iterations = 0;
  bool converged = false;
  double max_sylvester_residual = 0.0;
  std::vector<int> dissolved;  // clusters whose assignment row is all zero

  int non_empty_clusters() const {
    int count = 0;
    for (Index j = 0; j < assignment.rows(); ++j)
      if ((assignment.row(j).array() > 0).any()) ++count;
    return count;
  }
};

// ---------------------------------------------------------------------------
// Shared pieces

/// 0/1 assignment matrix (m x n) from hard labels.
inline MatrixXd hard_assignment(const Labeling& labels, int m) {
  MatrixXd w = MatrixXd::Zero(m, static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) w(labels[i], static_cast<Index>(i)) = 1.0;
  return w;
}

/// Argmax per column over positive entries, lowest index on ties;
/// all-zero columns are kUnassigned. Columns flagged in `excluded` never win.
inline Labeling hard_labels(const MatrixXd& w, const std::vector<bool>* excluded = nullptr) {
  Labeling labels(static_cast<std::size_t>(w.cols()), kUnassigned);
  for (Index i = 0; i < w.cols(); ++i) {
    double best = 0.0;
    for (Index j = 0; j < w.rows(); ++j) {
      if (excluded && (*excluded)[static_cast<std::size_t>(j)]) continue;
      if (w(j, i) > best) {
        best = w(j, i);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(j);
      }
    }
  }
  return labels;
}

/// ||Phi - Phi A W||_F^2 = tr(K) - 2 tr(W^T A^T K) + tr(W^T A^T K A W),
/// evaluated from KA = K * A.
inline double reconstruction_cost(double trace_k, const MatrixXd& a, const MatrixXd& ka,
                                  const MatrixXd& w) {
  const MatrixXd aka = a.transpose() * ka;
  const MatrixXd wwt = w * w.transpose();
  return trace_k - 2.0 * (w.array() * ka.transpose().array()).sum() +
         (aka.array() * wwt.array()).sum();
}

inline double reconstruction_cost(const KernelMatrix& k, const MatrixXd& a, const MatrixXd& w) {
  return reconstruction_cost(k.trace(), a, k.multiply(a), w);
}

/// Least-squares dictionary for fixed W: A = W^T (W W^T + ridge I)^{-1}.
inline MatrixXd kkm_dictionary(const MatrixXd& w, double ridge) {
  return linalg::ridge_solve(w * w.transpose(), w, ridge).transpose();
}

inline Dictionary random_selection_dictionary(Index n, int m, std::uint64_t seed) {
  if (m > n) throw Error(ErrorCode::InvalidArgument, "more clusters than streamlines");
  auto picks = sample_landmarks(n, m, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(picks.begin(), picks.end(), rng);
  MatrixXd a = MatrixXd::Zero(n, m);
  for (int j = 0; j < m; ++j) a(picks[static_cast<std::size_t>(j)], j) = 1.0;
  return Dictionary::from(std::move(a));
}

/// Selection matrix whose column j picks the medoid of cluster j: the member
/// minimizing the summed kernel-space squared distance to its co-members.
inline Dictionary init_dictionary_from_labels(const Labeling& labels, const KernelMatrix& k,
                                              int m) {
  const Index n = k.n();
  validate_labeling(labels, static_cast<std::size_t>(n), m);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(m));
  for (Index i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  MatrixXd a = MatrixXd::Zero(n, m);
  for (int j = 0; j < m; ++j) {
    const auto& mem = members[static_cast<std::size_t>(j)];
    if (mem.empty())
      throw Error(ErrorCode::EmptyCluster, "cluster " + std::to_string(j) + " has no members");
    Index best = mem.front();
    double best_cost = std::numeric_limits<double>::infinity();
    for (Index c : mem) {
      // sum_l (K_cc - 2 K_cl + K_ll); the K_ll terms are common to all c.
      double cost = static_cast<double>(mem.size()) * k.entry(c, c);
      for (Index l : mem) cost -= 2.0 * k.entry(c, l);
      if (cost < best_cost) {
        best_cost = cost;
        best = c;
      }
    }
    a(best, j) = 1.0;
  }
  return Dictionary::from(std::move(a));
}

// ---------------------------------------------------------------------------
// Spectral initialization

inline Labeling spectral_init(const KernelMatrix& k, int m, int n_eig = 10,
                              std::uint64_t seed = 1, int restarts = 10) {
  const Index n = k.n();
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "m must be >= 1");
  if (m > n) throw Error(ErrorCode::InvalidArgument, "more clusters than streamlines");
  if (m == 1) return Labeling(static_cast<std::size_t>(n), 0);
  const MatrixXd dense = k.dense();
  const VectorXd degree = dense.rowwise().sum();
  for (Index i = 0; i < n; ++i)
    if (!(degree(i) > 0))
      throw Error(ErrorCode::ZeroDegreeRow, "streamline " + std::to_string(i) +
                                                " has no positive similarity");
  const VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  MatrixXd lap = -(inv_sqrt.asDiagonal() * dense * inv_sqrt.asDiagonal());
  lap.diagonal().array() += 1.0;
  lap = (lap + lap.transpose()) / 2.0;
  linalg::SymEig eig;
  try {
    eig = linalg::sym_eig(lap);
  } catch (const Error& e) {
    throw Error(ErrorCode::EigenFailure, e.what());
  }
  const Index cols = std::min<Index>(n_eig, n);
  MatrixXd embed = eig.vectors.leftCols(cols);
  for (Index i = 0; i < n; ++i) {
    const double norm = embed.row(i).norm();
    if (norm > 0) embed.row(i) /= norm;
  }
  // Fix eigenvector signs so that the embedding does not depend on the
  // eigensolver's arbitrary sign choice.
  for (Index c = 0; c < cols; ++c) {
    Index arg = 0;
    embed.col(c).cwiseAbs().maxCoeff(&arg);
    if (embed(arg, c) < 0) embed.col(c) *= -1.0;
  }
  KMeansOptions opt;
  opt.restarts = restarts;
  return kmeans(embed, m, seed, opt).labels;
}

// ---------------------------------------------------------------------------
// Kernel k-means

/// Nearest prototype in kernel space: argmin_j [A^T K A]_jj - 2 [A^T k_i]_j.
inline Labeling kkm_assign(const MatrixXd& aka, const MatrixXd& ka,
                           const std::vector<bool>* excluded = nullptr) {
  Labeling labels(static_cast<std::size_t>(ka.rows()), kUnassigned);
  for (Index i = 0; i < ka.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < ka.cols(); ++j) {
      if (excluded && (*excluded)[static_cast<std::size_t>(j)]) continue;
      const double score = aka(j, j) - 2.0 * ka(i, j);
      if (score < best) {
        best = score;
        labels[static_cast<std::size_t>(i)] = static_cast<int>(j);
      }
    }
  }
  return labels;
}

inline FitResult kkm_fit(const KernelMatrix& k, const SolverConfig& cfg, const Labeling& init) {
  cfg.validate();
  const Index n = k.n();
  const int m = cfg.m;
  validate_labeling(init, static_cast<std::size_t>(n), m);
  const int t_outer = cfg.t_outer.value_or(100);
  const double trace_k = k.trace();

  FitResult res;
  Labeling labels = init;
  MatrixXd w = hard_assignment(labels, m);
  MatrixXd a = kkm_dictionary(w, cfg.ridge);
  MatrixXd ka = k.multiply(a);
  res.cost_trace.push_back(reconstruction_cost(trace_k, a, ka, w));

  for (int t = 0; t < t_outer; ++t) {
    res.iterations = t + 1;
    const MatrixXd aka = a.transpose() * ka;
    Labeling next = kkm_assign(aka, ka);

    // A prototype that lost every member is re-seeded with the
    // worst-reconstructed streamline of a cluster that can spare it.
    for (int j = 0; j < m; ++j) {
      std::vector<Index> sizes(static_cast<std::size_t>(m), 0);
      for (int l : next) ++sizes[static_cast<std::size_t>(l)];
      if (sizes[static_cast<std::size_t>(j)] > 0) continue;
      Index worst = -1;
      double worst_err = -std::numeric_limits<double>::infinity();
      for (Index i = 0; i < n; ++i) {
        const int l = next[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(l)] < 2) continue;
        const double err = k.entry(i, i) - 2.0 * ka(i, l) + aka(l, l);
        if (err > worst_err) {
          worst_err = err;
          worst = i;
        }
      }
      if (worst >= 0) next[static_cast<std::size_t>(worst)] = j;
    }

    if (next == labels) {
      res.converged = true;
      break;
    }
    labels = std::move(next);
    w = hard_assignment(labels, m);
    a = kkm_dictionary(w, cfg.ridge);
    ka = k.multiply(a);
    res.cost_trace.push_back(reconstruction_cost(trace_k, a, ka, w));
  }
  res.dictionary = Dictionary::from(std::move(a));
  res.assignment = std::move(w);
  res.labels = std::move(labels);
  return res;
}

// ---------------------------------------------------------------------------
// Non-negative kernel OMP

/// One column of W from precomputed A^T K A (m x m) and A^T k_i (m).
/// Atoms are added greedily by the normalized positive correlation of the
/// current residual; weights are refit by NNLS on the selected support.
inline VectorXd nnkomp_column(const MatrixXd& aka, const VectorXd& atk, int s_max,
                              const std::vector<bool>* excluded = nullptr) {
  const Index m = aka.rows();
  if (s_max < 1) throw Error(ErrorCode::InvalidArgument, "s_max must be >= 1");
  std::vector<Index> support;
  VectorXd weights;
  VectorXd w = VectorXd::Zero(m);
  std::vector<bool> used(static_cast<std::size_t>(m), false);
  for (int s = 0; s < s_max; ++s) {
    VectorXd corr = atk;
    for (std::size_t a = 0; a < support.size(); ++a) corr -= aka.col(support[a]) * weights(static_cast<Index>(a));
    Index best = -1;
    double best_tau = 0.0;
    for (Index j = 0; j < m; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      if (excluded && (*excluded)[static_cast<std::size_t>(j)]) continue;
      if (!(aka(j, j) > 0))
        throw Error(ErrorCode::DegenerateAtom, "atom " + std::to_string(j) +
                                                   " has zero self-similarity");
      const double tau = corr(j) / aka(j, j);
      if (tau > best_tau) {
        best_tau = tau;
        best = j;
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    support.push_back(best);
    const auto k = static_cast<Index>(support.size());
    MatrixXd gram(k, k);
    VectorXd rhs(k);
    for (Index a = 0; a < k; ++a) {
      rhs(a) = atk(support[static_cast<std::size_t>(a)]);
      for (Index b = 0; b < k; ++b)
        gram(a, b) = aka(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
    }
    weights = linalg::nnls(gram, rhs);
  }
  for (std::size_t a = 0; a < support.size(); ++a) w(support[a]) = weights(static_cast<Index>(a));
  return w;
}

inline VectorXd nnkomp(const KernelMatrix& k, const Dictionary& dict, Index i, int s_max) {
  const MatrixXd ka = k.multiply(dict.a);
  const MatrixXd aka = dict.a.transpose() * ka;
  return nnkomp_column(aka, ka.row(i).transpose(), s_max, &dict.empty);
}

/// All columns of W by NNKOMP. Columns are independent, so the thread count
/// does not change the result.
inline MatrixXd nnkomp_all(const MatrixXd& aka, const MatrixXd& ka, int s_max,
                           const std::vector<bool>* excluded, unsigned threads) {
  MatrixXd w(aka.rows(), ka.rows());
  detail::parallel_for(static_cast<std::size_t>(ka.rows()), threads, [&](std::size_t col) {
    const auto i = static_cast<Index>(col);
    w.col(i) = nnkomp_column(aka, ka.row(i).transpose(), s_max, excluded);
  });
  return w;
}

// ---------------------------------------------------------------------------
// Dictionary multiplicative update

struct MultUpdateResult {
  Dictionary dictionary;
  std::vector<double> costs;  // before the first step, then after each step
  int steps = 0;
};

/// a_ij <- a_ij [K W^T]_ij / ([K A (W W^T + ridge I)]_ij + 1e-12), repeated
/// until the relative cost change drops below inner_tol or max_inner steps.
/// The cost is the reconstruction error plus ridge tr(A^T K A). Zero entries
/// stay zero. Non-increasing in cost when K, W and A are elementwise
/// non-negative.
inline MultUpdateResult mult_update_A(const KernelMatrix& k, const MatrixXd& w,
                                      const Dictionary& init, double inner_tol = 1e-6,
                                      int max_inner = 50, double ridge = 0.0) {
  constexpr double kGuard = 1e-12;
  MultUpdateResult res;
  res.dictionary = init;
  MatrixXd& a = res.dictionary.a;
  const MatrixXd numer = k.multiply(w.transpose());  // n x m
  MatrixXd wwt = w * w.transpose();
  wwt.diagonal().array() += ridge;
  const double trace_k = k.trace();
  auto objective = [&](const MatrixXd& ka) {
    double c = reconstruction_cost(trace_k, a, ka, w);
    if (ridge > 0) c += ridge * (a.transpose() * ka).trace();
    return c;
  };
  MatrixXd ka = k.multiply(a);
  double cost = objective(ka);
  res.costs.push_back(cost);
  for (int step = 0; step < max_inner; ++step) {
    const MatrixXd denom = ka * wwt;
    a = a.cwiseProduct(numer.cwiseQuotient((denom.array() + kGuard).matrix()));
    ka = k.multiply(a);
    const double next = objective(ka);
    res.costs.push_back(next);
    res.steps = step + 1;
    const double change = std::abs(cost - next) / std::max(std::abs(cost), 1e-300);
    cost = next;
    if (change < inner_tol) break;
  }
  return res;
}

/// Zeroes entries below threshold_rel * column max; all-zero columns are
/// flagged empty.
inline Dictionary prune_dictionary(const Dictionary& dict, double threshold_rel = 1e-6) {
  Dictionary out = dict;
  out.empty.resize(static_cast<std::size_t>(out.a.cols()), false);
  for (Index j = 0; j < out.a.cols(); ++j) {
    const double peak = out.a.col(j).maxCoeff();
    if (!(peak > 0)) {
      out.a.col(j).setZero();
      out.empty[static_cast<std::size_t>(j)] = true;
      continue;
    }
    const double cut = threshold_rel * peak;
    for (Index i = 0; i < out.a.rows(); ++i)
      if (out.a(i, j) < cut) out.a(i, j) = 0.0;
  }
  return out;
}

/// Dictionary refit for a fixed non-negative W: the least-squares solution
/// projected onto the non-negative orthant, then refined by the
/// multiplicative update and pruned. Columns with an all-zero W row are
/// flagged empty. A ridge above the solve guard also penalizes
/// tr(A^T K A) in the multiplicative refinement.
inline Dictionary refit_dictionary(const KernelMatrix& k, const MatrixXd& w,
                                   const SolverConfig& cfg, double ridge = 0.0) {
  Dictionary start = Dictionary::from(kkm_dictionary(w, std::max(ridge, cfg.ridge)).cwiseMax(0.0));
  for (Index j = 0; j < w.rows(); ++j)
    if (!(w.row(j).array() > 0).any()) start.a.col(j).setZero();
  auto updated = mult_update_A(k, w, start, cfg.inner_tol, cfg.max_inner, ridge);
  return prune_dictionary(updated.dictionary, cfg.prune_threshold);
}

// ---------------------------------------------------------------------------
// Kernel sparse clustering

struct KscOptions {
  /// Keep the initial dictionary fixed (only W is updated).
  bool freeze_dictionary = false;
  /// Use this dictionary instead of the medoids of the initial labels.
  std::optional<Dictionary> initial_dictionary;
};

inline FitResult ksc_fit(const KernelMatrix& k, const SolverConfig& cfg, const Labeling& init,
                         const KscOptions& opt = {}) {
  cfg.validate();
  const int t_outer = cfg.t_outer.value_or(20);
  const double trace_k = k.trace();
  Dictionary dict = opt.initial_dictionary ? *opt.initial_dictionary
                                           : init_dictionary_from_labels(init, k, cfg.m);
  FitResult res;
  MatrixXd w;
  Labeling labels;
  for (int t = 0; t < t_outer; ++t) {
    res.iterations = t + 1;
    MatrixXd ka = k.multiply(dict.a);
    const MatrixXd aka = dict.a.transpose() * ka;
    w = nnkomp_all(aka, ka, cfg.s_max, &dict.empty, cfg.threads);
    Labeling next = hard_labels(w, &dict.empty);
    if (!opt.freeze_dictionary) {
      dict = refit_dictionary(k, w, cfg);
      ka = k.multiply(dict.a);
    }
    res.cost_trace.push_back(reconstruction_cost(trace_k, dict.a, ka, w));
    const bool stable = t > 0 && next == labels;
    labels = std::move(next);
    if (stable) {
      res.converged = true;
      break;
    }
  }
  res.dictionary = std::move(dict);
  res.assignment = std::move(w);
  res.labels = std::move(labels);
  for (Index j = 0; j < res.assignment.rows(); ++j)
    if (!(res.assignment.row(j).array() > 0).any()) res.dissolved.push_back(static_cast<int>(j));
  return res;
}

// ---------------------------------------------------------------------------
// Group-sparse and manifold-regularized ADMM

/// max(x - tau, 0) elementwise.
inline MatrixXd shrink_l1(const MatrixXd& x, double tau) {
  return (x.array() - tau).cwiseMax(0.0).matrix();
}

/// Row-wise group shrinkage: row <- max(||row|| - tau, 0) row / ||row||.
inline MatrixXd shrink_l21(const MatrixXd& z, double tau) {
  MatrixXd out = z;
  for (Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (norm <= tau || norm == 0.0)
      out.row(i).setZero();
    else
      out.row(i) *= (norm - tau) / norm;
  }
  return out;
}

/// Default lambda2 for n streamlines and m input clusters. The reference
/// lambda2/mu = 80 was calibrated at about 445 streamlines per input
/// cluster; the group norm of a row grows with the square root of its
/// length, so the weight is rescaled by sqrt((n / m) / 445).
inline constexpr double kLambda2ReferenceRowLength = 445.0;

inline double default_lambda2(double mu, Index n, int m) {
  const double per_cluster = static_cast<double>(n) / static_cast<double>(m);
  return 80.0 * mu * std::sqrt(per_cluster / kLambda2ReferenceRowLength);
}

struct AdmmResult {
  MatrixXd w;
  MatrixXd z;
  MatrixXd u;
  std::vector<double> residuals;  // ||W - Z||_F / sqrt(m n) per inner iteration
  int iterations = 0;
  bool converged = false;
  double max_sylvester_residual = 0.0;
  double mu = 0.0;  // penalty in effect at exit
};

/// Inner ADMM loop for a fixed dictionary. Without a Laplacian the W step
/// solves (A^T K A + mu I) W = A^T K + mu (Z - U) and Z gets both
/// shrinkages; with one it solves the Sylvester equation
/// P W + W (lambda_L L) = R and Z gets only the L1 shrinkage.
inline AdmmResult admm_assign(const MatrixXd& aka, const MatrixXd& atk, const SolverConfig& cfg,
                              const MatrixXd* laplacian = nullptr,
                              const linalg::SchurForm* schur_q = nullptr,
                              const AdmmResult* warm = nullptr) {
  const Index m = aka.rows();
  const Index n = atk.cols();
  double mu = warm && warm->mu > 0 ? warm->mu : cfg.mu;
  AdmmResult res;
  res.z = warm ? warm->z : MatrixXd::Zero(m, n);
  res.u = warm ? warm->u : MatrixXd::Zero(m, n);
  const MatrixXd sym = (aka + aka.transpose()) / 2.0;

  MatrixXd p;
  std::optional<Eigen::LLT<MatrixXd>> llt;
  auto factor = [&] {
    p = sym;
    p.diagonal().array() += mu;
    if (laplacian) return;
    llt.emplace(p);
    if (llt->info() != Eigen::Success)
      throw Error(ErrorCode::SingularAfterRidge, "A^T K A + mu I is not positive definite");
  };
  factor();

  MatrixXd q;
  linalg::SchurForm owned;
  if (laplacian) {
    q = cfg.lambda_L * (*laplacian);
    if (!schur_q) {
      owned = linalg::schur_symmetric(q);
      schur_q = &owned;
    }
  }

  const double scale = std::sqrt(static_cast<double>(m) * static_cast<double>(n));
  for (int it = 0; it < cfg.t_inner; ++it) {
    res.iterations = it + 1;
    const MatrixXd r = atk + mu * (res.z - res.u);
    if (laplacian) {
      try {
        res.w = linalg::sylvester_solve(p, q, r, schur_q);
      } catch (const Error& e) {
        throw Error(ErrorCode::SylvesterFailure, e.what());
      }
      const double rn = r.norm();
      const double resid = (p * res.w + res.w * q - r).norm() / std::max(rn, 1e-300);
      res.max_sylvester_residual = std::max(res.max_sylvester_residual, resid);
    } else {
      res.w = llt->solve(r);
    }
    MatrixXd zhat = shrink_l1(res.w + res.u, cfg.lambda1 / mu);
    if (!laplacian) zhat = shrink_l21(zhat, cfg.lambda2 / mu);
    const double dual = mu * (zhat - res.z).norm() / scale;
    res.z = std::move(zhat);
    res.u += res.w - res.z;
    const double primal = (res.w - res.z).norm() / scale;
    res.residuals.push_back(primal);
    if (primal < cfg.eps_primal && dual < cfg.eps_primal) {
      res.converged = true;
      break;
    }
    if (cfg.adaptive_mu && (primal > 10.0 * dual || dual > 10.0 * primal)) {
      const double factor_mu = primal > dual ? 2.0 : 0.5;
      mu *= factor_mu;
      res.u /= factor_mu;
      factor();
    }
  }
  res.mu = mu;
  return res;
}

/// f(D, W) for the ADMM models: half the reconstruction error, the
/// dictionary ridge and the active priors.
inline double gksc_cost(double trace_k, const MatrixXd& a, const MatrixXd& ka, const MatrixXd& z,
                        const SolverConfig& cfg, const MatrixXd* laplacian) {
  double cost = 0.5 * reconstruction_cost(trace_k, a, ka, z) + cfg.lambda1 * z.cwiseAbs().sum() +
                0.5 * cfg.dictionary_ridge * (a.transpose() * ka).trace();
  if (laplacian)
    cost += 0.5 * cfg.lambda_L * (z * (*laplacian) * z.transpose()).trace();
  else
    cost += cfg.lambda2 * z.rowwise().norm().sum();
  return cost;
}

/// Rescales each atom and its weight row, (a_j, z_j) -> (s a_j, z_j / s),
/// to the s minimizing the objective. The product A Z is unchanged, so only
/// the priors (P/s, Q/s^2) and the dictionary ridge (r N s^2 / 2) move:
/// r N s^4 - P s - 2Q = 0.
inline void balance_scales(MatrixXd& a, const MatrixXd& ka, MatrixXd& z, const SolverConfig& cfg,
                           const MatrixXd* laplacian) {
  if (!(cfg.dictionary_ridge > 0)) return;
  for (Index j = 0; j < a.cols(); ++j) {
    const double norm_a = a.col(j).dot(ka.col(j));
    if (!(norm_a > 0) || !(z.row(j).array() != 0.0).any()) continue;
    const double p = cfg.lambda1 * z.row(j).cwiseAbs().sum() +
                     (laplacian ? 0.0 : cfg.lambda2 * z.row(j).norm());
    const double q = laplacian ? 0.5 * cfg.lambda_L * z.row(j).dot(*laplacian * z.row(j).transpose())
                               : 0.0;
    const double c = cfg.dictionary_ridge * norm_a;
    if (!(p > 0) && !(q > 0)) continue;
    // Newton from above the root of the increasing convex quartic.
    double s = std::max({1.0, std::cbrt(2.0 * p / c), std::sqrt(std::sqrt(4.0 * q / c))});
    for (int it = 0; it < 100; ++it) {
      const double f = c * s * s * s * s - p * s - 2.0 * q;
      const double step = f / (4.0 * c * s * s * s - p);
      s -= step;
      if (std::abs(step) <= 1e-14 * s) break;
    }
    if (!(s > 0) || !std::isfinite(s)) continue;
    a.col(j) *= s;
    z.row(j) /= s;
  }
}

struct GkscOptions {
  std::optional<Dictionary> initial_dictionary;
};

/// Group-sparse kernel clustering. With a Laplacian the group prior is
/// replaced by the manifold prior (lambda2 is ignored).
inline FitResult gksc_fit(const KernelMatrix& k, const SolverConfig& cfg, const Labeling& init,
                          const MatrixXd* laplacian = nullptr, const GkscOptions& opt = {}) {
  cfg.validate();
  const Index n = k.n();
  if (laplacian && (laplacian->rows() != n || laplacian->cols() != n))
    throw Error(ErrorCode::InvalidArgument, "Laplacian size does not match the kernel");
  if (laplacian && !(cfg.lambda_L > 0))
    throw Error(ErrorCode::InvalidArgument, "the manifold prior needs lambda_L > 0");
  const int t_outer = cfg.t_outer.value_or(30);
  const double trace_k = k.trace();
  Dictionary dict = opt.initial_dictionary ? *opt.initial_dictionary
                                           : init_dictionary_from_labels(init, k, cfg.m);

  linalg::SchurForm schur_q;
  if (laplacian) schur_q = linalg::schur_symmetric(cfg.lambda_L * (*laplacian));

  FitResult res;
  MatrixXd z;
  AdmmResult admm;
  for (int t = 0; t < t_outer; ++t) {
    res.iterations = t + 1;
    MatrixXd ka = k.multiply(dict.a);
    const MatrixXd aka = dict.a.transpose() * ka;
    const MatrixXd atk = ka.transpose();
    admm = admm_assign(aka, atk, cfg, laplacian, laplacian ? &schur_q : nullptr);
    res.primal_residual_trace.push_back(admm.residuals.back());
    res.inner_iterations.push_back(admm.iterations);
    res.max_sylvester_residual = std::max(res.max_sylvester_residual, admm.max_sylvester_residual);
    z = admm.z;

    dict = refit_dictionary(k, z, cfg, cfg.dictionary_ridge);
    ka = k.multiply(dict.a);
    balance_scales(dict.a, ka, z, cfg, laplacian);
    ka = k.multiply(dict.a);
    const double cost = gksc_cost(trace_k, dict.a, ka, z, cfg, laplacian);
    const bool stable =
        !res.cost_trace.empty() &&
        std::abs(res.cost_trace.back() - cost) <= cfg.outer_tol * std::max(std::abs(cost), 1e-300);
    res.cost_trace.push_back(cost);
    if (stable) {
      res.converged = true;
      break;
    }
  }
  res.dictionary = std::move(dict);
  res.assignment = std::move(z);
  res.labels = hard_labels(res.assignment);
  for (Index j = 0; j < res.assignment.rows(); ++j)
    if (!(res.assignment.row(j).array() > 0).any()) res.dissolved.push_back(static_cast<int>(j));
  return res;
}

}  // namespace tractsparse
