#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "tractsparse/core.hpp"
#include "tractsparse/detail/parallel.hpp"

namespace tractsparse {

enum class Measure { Mcp, Hausdorff, Endpoint };

inline std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::Mcp: return "mcp";
    case Measure::Hausdorff: return "haus";
    case Measure::Endpoint: return "ep";
  }
  return "?";
}

inline Measure parse_measure(std::string_view name) {
  if (name == "mcp") return Measure::Mcp;
  if (name == "haus") return Measure::Hausdorff;
  if (name == "ep") return Measure::Endpoint;
  throw Error(ErrorCode::InvalidArgument, "unknown distance measure '" + std::string(name) + "'");
}

/// Symmetric n x n matrix of pairwise streamline distances, zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(Eigen::MatrixXd values) : values_(std::move(values)) { check(); }

  Eigen::Index n() const noexcept { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

  DistanceMatrix scaled(double c) const { return DistanceMatrix(values_ * c); }

 private:
  void check() const {
    if (values_.rows() != values_.cols())
      throw Error(ErrorCode::InvalidArgument, "distance matrix must be square");
    for (Eigen::Index i = 0; i < n(); ++i) {
      if (values_(i, i) != 0.0)
        throw Error(ErrorCode::InvalidArgument, "distance matrix diagonal must be zero");
      for (Eigen::Index j = i + 1; j < n(); ++j) {
        const double v = values_(i, j);
        if (!std::isfinite(v) || v < 0.0 || v != values_(j, i))
          throw Error(ErrorCode::InvalidArgument,
                      "distance matrix must be finite, non-negative and symmetric");
      }
    }
  }

  Eigen::MatrixXd values_;
};

namespace detail {

inline double squared_distance(const Point3& p, const Point3& q) {
  const double dx = p.x() - q.x();
  const double dy = p.y() - q.y();
  const double dz = p.z() - q.z();
  return dx * dx + dy * dy + dz * dz;
}

// Distance from p to the closest sample point of s. sqrt is monotone and
// correctly rounded, so sqrt(min d^2) == min sqrt(d^2) exactly.
inline double closest_point_distance(const Point3& p, const Streamline& s) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : s.points()) best = std::min(best, squared_distance(p, q));
  return std::sqrt(best);
}

inline double directed_mean_closest(const Streamline& a, const Streamline& b) {
  double sum = 0.0;
  for (const auto& p : a.points()) sum += closest_point_distance(p, b);
  return sum / static_cast<double>(a.size());
}

inline double directed_hausdorff(const Streamline& a, const Streamline& b) {
  double worst = 0.0;
  for (const auto& p : a.points()) worst = std::max(worst, closest_point_distance(p, b));
  return worst;
}

inline double directed_endpoint(const Streamline& a, const Streamline& b) {
  auto nearest = [&](const Point3& p) {
    return std::sqrt(std::min(squared_distance(p, b.front()), squared_distance(p, b.back())));
  };
  return (nearest(a.front()) + nearest(a.back())) / 2.0;
}

}  // namespace detail

/// Mean of closest points, averaged over both directions.
inline double dist_mcp(const Streamline& a, const Streamline& b) {
  return (detail::directed_mean_closest(a, b) + detail::directed_mean_closest(b, a)) / 2.0;
}

/// Hausdorff distance: max of the two directed values.
inline double dist_hausdorff(const Streamline& a, const Streamline& b) {
  return std::max(detail::directed_hausdorff(a, b), detail::directed_hausdorff(b, a));
}

/// Endpoint distance: each endpoint matched to the closest endpoint of the
/// other streamline, averaged over endpoints and over both directions.
inline double dist_ep(const Streamline& a, const Streamline& b) {
  return (detail::directed_endpoint(a, b) + detail::directed_endpoint(b, a)) / 2.0;
}

inline double distance(Measure m, const Streamline& a, const Streamline& b) {
  switch (m) {
    case Measure::Mcp: return dist_mcp(a, b);
    case Measure::Hausdorff: return dist_hausdorff(a, b);
    case Measure::Endpoint: return dist_ep(a, b);
  }
  return 0.0;
}

/// Every entry is computed independently, so any thread count gives a
/// bitwise identical matrix.
inline DistanceMatrix pairwise_distances(const Tractogram& t, Measure measure,
                                         unsigned threads = 1) {
  validate_tractogram(t);
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  detail::parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = distance(measure, t[i], t[j]);
  });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(j, i) = d(i, j);
  return DistanceMatrix(std::move(d));
}

/// Distances from each streamline of `rows` to each streamline of `cols`.
inline Eigen::MatrixXd cross_distances(const Tractogram& rows, const Tractogram& cols,
                                       Measure measure, unsigned threads = 1) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  detail::parallel_for(rows.size(), threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < cols.size(); ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          distance(measure, rows[i], cols[j]);
  });
  return d;
}

struct EndpointGraph {
  Eigen::MatrixXd adjacency;  // 0/1, symmetric, zero diagonal
  Eigen::VectorXd degree;
  double threshold_mm = 7.0;

  Eigen::Index n() const noexcept { return adjacency.rows(); }
  Eigen::Index edge_count() const {
    return static_cast<Eigen::Index>(adjacency.sum() / 2.0);
  }
};

inline constexpr double kDefaultEndpointThresholdMm = 7.0;

/// Connects i and j when the closest of the four endpoint pairings is
/// strictly closer than the threshold.
inline EndpointGraph build_endpoint_graph(const Tractogram& t,
                                          double threshold_mm = kDefaultEndpointThresholdMm) {
  if (!(threshold_mm > 0))
    throw Error(ErrorCode::InvalidArgument, "endpoint threshold must be > 0");
  validate_tractogram(t);
  const auto n = static_cast<Eigen::Index>(t.size());
  EndpointGraph g;
  g.threshold_mm = threshold_mm;
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  const double limit = threshold_mm * threshold_mm;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& a = t[i];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& b = t[j];
      const double closest = std::min({detail::squared_distance(a.front(), b.front()),
                                       detail::squared_distance(a.front(), b.back()),
                                       detail::squared_distance(a.back(), b.front()),
                                       detail::squared_distance(a.back(), b.back())});
      if (closest < limit) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
    }
  }
  g.degree = g.adjacency.rowwise().sum();
  return g;
}

/// L = Deg - G.
inline Eigen::MatrixXd graph_laplacian(const EndpointGraph& g) {
  Eigen::MatrixXd l = -g.adjacency;
  l.diagonal() += g.degree;
  return l;
}

}  // namespace tractsparse
