#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "tractsparse/core.hpp"

namespace tractsparse {

struct KMeansResult {
  Labeling labels;
  Eigen::MatrixXd centers;  // k x d
  double inertia = 0.0;
  int iterations = 0;
};

struct KMeansOptions {
  int max_iter = 100;
  double rel_tol = 1e-9;
  int restarts = 1;
};

namespace detail {

inline Eigen::MatrixXd kmeanspp_centers(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0) {
      double target = unit(rng) * total;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target < 0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

inline KMeansResult lloyd_once(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng,
                               const KMeansOptions& opt) {
  const Eigen::Index n = x.rows();
  KMeansResult res;
  res.centers = kmeanspp_centers(x, k, rng);
  res.labels.assign(static_cast<std::size_t>(n), 0);
  double prev = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_d2(n);
  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - res.centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      res.labels[static_cast<std::size_t>(i)] = best;
      best_d2(i) = bd;
    }
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = res.labels[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Empty cluster: move it onto the worst-fit point.
        Eigen::Index far = 0;
        best_d2.maxCoeff(&far);
        res.centers.row(c) = x.row(far);
        best_d2(far) = 0.0;
      }
    }
    res.inertia = best_d2.sum();
    if (std::abs(prev - res.inertia) <= opt.rel_tol * std::max(res.inertia, 1e-300)) break;
    prev = res.inertia;
  }
  // Final assignment against the last centers.
  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d = (x.row(i) - res.centers.row(c)).squaredNorm();
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    res.labels[static_cast<std::size_t>(i)] = best;
    res.inertia += bd;
  }
  return res;
}

}  // namespace detail

/// Lloyd k-means on the rows of x with seeded k-means++ initialization.
/// With several restarts the run with the lowest inertia wins (earliest on
/// ties).
inline KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                           const KMeansOptions& opt = {}) {
  if (k < 1 || x.rows() < 1) throw Error(ErrorCode::InvalidArgument, "kmeans: need k >= 1 and data");
  if (k > x.rows()) throw Error(ErrorCode::InvalidArgument, "kmeans: more clusters than points");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    auto run = detail::lloyd_once(x, k, rng, opt);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace tractsparse
