#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tractsparse/core.hpp"
#include "tractsparse/distances.hpp"

namespace tractsparse::metrics {

namespace detail {

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

inline void require_same_length(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::LengthMismatch, "labelings have lengths " + std::to_string(a.size()) +
                                               " and " + std::to_string(b.size()));
}

/// Contingency table with rows indexed by distinct values of a, columns by
/// distinct values of b (both in ascending label order).
inline Eigen::MatrixXd contingency(std::span<const int> a, std::span<const int> b) {
  std::map<int, Eigen::Index> ra, rb;
  for (int v : a) ra.emplace(v, 0);
  for (int v : b) rb.emplace(v, 0);
  Eigen::Index next = 0;
  for (auto& [v, idx] : ra) idx = next++;
  next = 0;
  for (auto& [v, idx] : rb) idx = next++;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ra.size()),
                                                static_cast<Eigen::Index>(rb.size()));
  for (std::size_t i = 0; i < a.size(); ++i) table(ra[a[i]], rb[b[i]]) += 1.0;
  return table;
}

/// Hubert-Arabie adjusted index from a (possibly reweighted) table.
inline double adjusted_from_table(const Eigen::MatrixXd& table) {
  const double n = table.sum();
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j) index += choose2(table(i, j));
  for (Eigen::Index i = 0; i < table.rows(); ++i) sum_a += choose2(table.row(i).sum());
  for (Eigen::Index j = 0; j < table.cols(); ++j) sum_b += choose2(table.col(j).sum());
  const double total = choose2(n);
  const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (std::abs(denom) <= 1e-12 * std::max(1.0, max_index)) {
    // Degenerate: both partitions trivial in the same way.
    return (std::abs(index - max_index) <= 1e-12 * std::max(1.0, max_index)) ? 1.0 : 0.0;
  }
  return (index - expected) / denom;
}

}  // namespace detail

/// Fraction of item pairs on which the two partitions agree.
inline double rand_index(std::span<const int> a, std::span<const int> b) {
  detail::require_same_length(a, b);
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  const Eigen::MatrixXd table = detail::contingency(a, b);
  double same_both = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j) same_both += detail::choose2(table(i, j));
  for (Eigen::Index i = 0; i < table.rows(); ++i) sum_a += detail::choose2(table.row(i).sum());
  for (Eigen::Index j = 0; j < table.cols(); ++j) sum_b += detail::choose2(table.col(j).sum());
  const double total = detail::choose2(n);
  // agreements = pairs together in both + pairs apart in both
  const double apart_both = total - sum_a - sum_b + same_both;
  return (same_both + apart_both) / total;
}

inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  detail::require_same_length(a, b);
  if (a.size() < 2) return 1.0;
  return detail::adjusted_from_table(detail::contingency(a, b));
}

/// Size-normalized ARI. Each ground-truth cluster's row of the contingency
/// table is rescaled to the mean cluster size before the chance-corrected
/// index is computed, so every ground-truth bundle weighs the same
/// regardless of its streamline count. Not symmetric: `truth` comes first.
inline double normalized_ari(std::span<const int> truth, std::span<const int> predicted) {
  detail::require_same_length(truth, predicted);
  if (truth.size() < 2) return 1.0;
  Eigen::MatrixXd table = detail::contingency(truth, predicted);
  const double mean_size = table.sum() / static_cast<double>(table.rows());
  for (Eigen::Index i = 0; i < table.rows(); ++i) table.row(i) *= mean_size / table.row(i).sum();
  return detail::adjusted_from_table(table);
}

struct SilhouetteResult {
  double mean = 0.0;
  std::vector<double> per_item;
  bool single_cluster = false;
};

/// s(i) = (b - a) / max(a, b); a = mean distance to co-members, b = lowest
/// mean distance to another cluster. Singletons score 0.
inline SilhouetteResult silhouette(const DistanceMatrix& d, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(d.n());
  if (labels.size() != n)
    throw Error(ErrorCode::LengthMismatch, "labels do not match the distance matrix");
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [l, idx] : ids) idx = next++;
  const int k = next;
  SilhouetteResult res;
  res.per_item.assign(n, 0.0);
  if (k < 2) {
    res.single_cluster = true;
    return res;
  }
  std::vector<int> cid(n);
  std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    cid[i] = ids[labels[i]];
    sizes[static_cast<std::size_t>(cid[i])] += 1.0;
  }
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[static_cast<std::size_t>(cid[j])] += d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const auto own = static_cast<std::size_t>(cid[i]);
    if (sizes[own] < 2) continue;
    const double a = sums[own] / (sizes[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c)
      if (c != own) b = std::min(b, sums[c] / sizes[c]);
    const double denom = std::max(a, b);
    res.per_item[i] = denom > 0 ? (b - a) / denom : 0.0;
  }
  double total = 0.0;
  for (double s : res.per_item) total += s;
  res.mean = total / static_cast<double>(n);
  return res;
}

struct MetricReport {
  std::optional<double> ri, ari, nari;
  double silhouette = 0.0;
  bool has_silhouette = false;
  bool single_cluster = false;
  std::map<int, int> cluster_sizes;
  std::map<int, double> cluster_silhouette;
};

inline MetricReport report(std::span<const int> predicted, std::span<const int> truth,
                           const DistanceMatrix* d) {
  MetricReport r;
  for (int l : predicted) ++r.cluster_sizes[l];
  if (!truth.empty()) {
    r.ri = rand_index(truth, predicted);
    r.ari = adjusted_rand_index(truth, predicted);
    r.nari = normalized_ari(truth, predicted);
  }
  if (d) {
    auto s = silhouette(*d, predicted);
    r.silhouette = s.mean;
    r.has_silhouette = true;
    r.single_cluster = s.single_cluster;
    std::map<int, double> sums;
    for (std::size_t i = 0; i < predicted.size(); ++i) sums[predicted[i]] += s.per_item[i];
    for (auto& [l, total] : sums) r.cluster_silhouette[l] = total / r.cluster_sizes[l];
  }
  return r;
}

}  // namespace tractsparse::metrics
