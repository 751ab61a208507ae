#pragma once

// Independent reference implementations used as oracles by the unit and
// acceptance tests. They share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tractsparse/core.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using tractsparse::Point3;
using tractsparse::Streamline;

inline Streamline random_streamline(std::mt19937_64& rng, int min_pts = 2, int max_pts = 30,
                                    double spread = 50.0) {
  std::uniform_int_distribution<int> count(min_pts, max_pts);
  std::uniform_real_distribution<double> coord(-spread, spread);
  std::normal_distribution<double> step(0.0, 3.0);
  const int k = count(rng);
  std::vector<Point3> pts;
  Point3 p(coord(rng), coord(rng), coord(rng));
  for (int i = 0; i < k; ++i) {
    pts.push_back(p);
    p += Point3(step(rng) + 2.0, step(rng), step(rng));
  }
  return Streamline(std::move(pts));
}

inline double euclid(const Point3& p, const Point3& q) {
  const double dx = p.x() - q.x();
  const double dy = p.y() - q.y();
  const double dz = p.z() - q.z();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline double naive_mcp(const Streamline& a, const Streamline& b) {
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) best = std::min(best, euclid(a[i], b[j]));
    ab += best;
  }
  double ba = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i) best = std::min(best, euclid(b[j], a[i]));
    ba += best;
  }
  return (ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size())) / 2.0;
}

inline double naive_hausdorff(const Streamline& a, const Streamline& b) {
  double h = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) best = std::min(best, euclid(a[i], b[j]));
    h = std::max(h, best);
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i) best = std::min(best, euclid(b[j], a[i]));
    h = std::max(h, best);
  }
  return h;
}

inline double naive_ep(const Streamline& a, const Streamline& b) {
  const Point3 ea[2] = {a.front(), a.back()};
  const Point3 eb[2] = {b.front(), b.back()};
  double ab = 0.0, ba = 0.0;
  for (const auto& p : ea) ab += std::min(euclid(p, eb[0]), euclid(p, eb[1]));
  for (const auto& q : eb) ba += std::min(euclid(q, ea[0]), euclid(q, ea[1]));
  return (ab / 2.0 + ba / 2.0) / 2.0;
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<int> out(n);
  for (auto& l : out) l = pick(rng);
  return out;
}

struct PairCounts {
  double same_same = 0, same_diff = 0, diff_same = 0, diff_diff = 0;
};

inline PairCounts pair_counts(const std::vector<int>& a, const std::vector<int>& b) {
  PairCounts c;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      if (sa && sb) c.same_same += 1;
      else if (sa) c.same_diff += 1;
      else if (sb) c.diff_same += 1;
      else c.diff_diff += 1;
    }
  return c;
}

inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const auto c = pair_counts(a, b);
  return (c.same_same + c.diff_diff) / (c.same_same + c.same_diff + c.diff_same + c.diff_diff);
}

// Pair-counting form of the adjusted Rand index.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const auto c = pair_counts(a, b);
  const double n11 = c.same_same, n10 = c.same_diff, n01 = c.diff_same, n00 = c.diff_diff;
  const double denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
  if (denom == 0) return 1.0;
  return 2.0 * (n00 * n11 - n01 * n10) / denom;
}

inline double silhouette(const MatrixXd& d, const std::vector<int>& labels) {
  const std::size_t n = labels.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double own = 0.0;
    int own_count = 0;
    double b = std::numeric_limits<double>::infinity();
    std::vector<int> others;
    for (std::size_t j = 0; j < n; ++j)
      if (labels[j] != labels[i] &&
          std::find(others.begin(), others.end(), labels[j]) == others.end())
        others.push_back(labels[j]);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) {
        own += d(i, j);
        ++own_count;
      }
    if (own_count == 0) continue;
    for (int c : others) {
      double s = 0.0;
      int cnt = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (labels[j] == c) {
          s += d(i, j);
          ++cnt;
        }
      b = std::min(b, s / cnt);
    }
    const double a = own / own_count;
    const double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

// Plain Lloyd iterations on explicit points from given labels; ties go to
// the lowest centroid index. An emptied cluster takes the point farthest
// from its centroid among clusters with at least two members. Stops when
// labels repeat.
inline std::vector<int> lloyd(const MatrixXd& x, std::vector<int> labels, int k, int max_iter = 100) {
  const auto n = x.rows();
  for (int it = 0; it < max_iter; ++it) {
    MatrixXd centers = MatrixXd::Zero(k, x.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      centers.row(labels[i]) += x.row(i);
      counts[static_cast<std::size_t>(labels[i])] += 1.0;
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) /= counts[static_cast<std::size_t>(c)];
    std::vector<int> next(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) continue;
        const double dd = (x.row(i) - centers.row(c)).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      next[static_cast<std::size_t>(i)] = best;
    }
    for (int c = 0; c < k; ++c) {
      std::vector<int> sizes(static_cast<std::size_t>(k), 0);
      for (int l : next) ++sizes[static_cast<std::size_t>(l)];
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = next[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(l)] < 2) continue;
        const double dd = (x.row(i) - centers.row(l)).squaredNorm();
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      if (far >= 0) next[static_cast<std::size_t>(far)] = c;
    }
    if (next == labels) break;
    labels = std::move(next);
  }
  return labels;
}

// Nearest of k distinct randomly drawn points.
inline std::vector<int> prototype_labels(std::mt19937_64& rng, const MatrixXd& x, int k) {
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) pick[static_cast<std::size_t>(i)] = i;
  std::shuffle(pick.begin(), pick.end(), rng);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d = (x.row(i) - x.row(pick[static_cast<std::size_t>(c)])).squaredNorm();
      if (d < best) {
        best = d;
        out[static_cast<std::size_t>(i)] = c;
      }
    }
  }
  return out;
}

// min_w w^T G w - 2 r^T w over w >= 0 by enumerating every support and
// keeping the feasible stationary point with the lowest objective.
inline VectorXd brute_nnls(const MatrixXd& g, const VectorXd& r) {
  const auto s = g.rows();
  VectorXd best = VectorXd::Zero(s);
  double best_obj = 0.0;
  for (unsigned mask = 1; mask < (1u << s); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < s; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const auto k = static_cast<Eigen::Index>(idx.size());
    MatrixXd gs(k, k);
    VectorXd rs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      rs(a) = r(idx[a]);
      for (Eigen::Index b = 0; b < k; ++b) gs(a, b) = g(idx[a], idx[b]);
    }
    const VectorXd sol = gs.fullPivLu().solve(rs);
    if ((sol.array() < 0).any()) continue;
    VectorXd w = VectorXd::Zero(s);
    for (Eigen::Index a = 0; a < k; ++a) w(idx[a]) = sol(a);
    const double obj = w.dot(g * w) - 2.0 * r.dot(w);
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
  }
  return best;
}

// Random symmetric positive definite matrix.
inline MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.1) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
  MatrixXd s = a * a.transpose();
  s.diagonal().array() += floor;
  return s;
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd a(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) a(i, j) = g(rng);
  return a;
}

}  // namespace oracle
