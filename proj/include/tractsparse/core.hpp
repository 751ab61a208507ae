#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tractsparse/error.hpp"

namespace tractsparse {

using Point3 = Eigen::Vector3d;

/// An ordered 3D polyline in millimeters. Point spacing is arbitrary and
/// streamlines in one tractogram may have different point counts.
class Streamline {
 public:
  Streamline() = default;
  explicit Streamline(std::vector<Point3> points) : points_(std::move(points)) {}

  const std::vector<Point3>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  const Point3& front() const { return points_.front(); }
  const Point3& back() const { return points_.back(); }

  Streamline reversed() const {
    return Streamline(std::vector<Point3>(points_.rbegin(), points_.rend()));
  }

  Streamline translated(const Point3& offset) const {
    std::vector<Point3> moved(points_);
    for (auto& p : moved) p += offset;
    return Streamline(std::move(moved));
  }

  bool operator==(const Streamline& other) const {
    if (points_.size() != other.points_.size()) return false;
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (points_[i] != other.points_[i]) return false;
    return true;
  }

 private:
  std::vector<Point3> points_;
};

struct Tractogram {
  std::vector<Streamline> streamlines;
  std::optional<std::string> subject_id;

  std::size_t size() const noexcept { return streamlines.size(); }
  bool empty() const noexcept { return streamlines.empty(); }
  const Streamline& operator[](std::size_t i) const { return streamlines[i]; }

  bool operator==(const Tractogram& other) const { return streamlines == other.streamlines; }
};

/// Hard cluster index per streamline. kUnassigned marks a streamline whose
/// soft membership column is entirely zero.
using Labeling = std::vector<int>;
inline constexpr int kUnassigned = -1;

inline void validate_streamline(const Streamline& s, std::size_t index = 0) {
  if (s.size() < 2)
    throw Error(ErrorCode::DegenerateStreamline,
                "streamline " + std::to_string(index) + " has " + std::to_string(s.size()) +
                    " point(s), need at least 2");
  for (const auto& p : s.points())
    if (!std::isfinite(p.x()) || !std::isfinite(p.y()) || !std::isfinite(p.z()))
      throw Error(ErrorCode::NonFiniteCoordinate,
                  "streamline " + std::to_string(index) + " has a non-finite coordinate");
}

inline void validate_tractogram(const Tractogram& t) {
  if (t.empty()) throw Error(ErrorCode::EmptyTractogram, "tractogram has no streamlines");
  for (std::size_t i = 0; i < t.size(); ++i) validate_streamline(t[i], i);
}

inline void validate_labeling(const Labeling& labels, std::size_t n, int m) {
  if (labels.size() != n)
    throw Error(ErrorCode::LengthMismatch, "labeling has " + std::to_string(labels.size()) +
                                               " entries, expected " + std::to_string(n));
  for (int l : labels)
    if (l < 0 || l >= m)
      throw Error(ErrorCode::InvalidArgument,
                  "label " + std::to_string(l) + " outside [0, " + std::to_string(m) + ")");
}

/// Parameters shared by the clustering solvers. Defaults follow the
/// standard starting grid (mu = 0.01, lambda1/mu = 0.1, lambda2/mu = 80).
struct SolverConfig {
  int m = 10;
  int s_max = 3;
  double lambda1 = 0.001;
  double lambda2 = 0.8;
  double lambda_L = 0.1;
  double mu = 0.01;
  /// Residual balancing: mu is only the starting ADMM penalty and is
  /// rescaled by 2 whenever primal and dual residuals drift 10x apart.
  bool adaptive_mu = true;
  int t_inner = 200;
  /// Outer sweep cap; unset means the solver's own default.
  std::optional<int> t_outer;
  double eps_primal = 1e-4;
  std::uint64_t seed = 1;
  double ridge = 1e-8;
  /// Weight of (1/2) tr(A^T K A) in the ADMM objectives. Without it the cost
  /// keeps falling by growing A while shrinking W.
  double dictionary_ridge = 0.08;

  // Dictionary multiplicative update.
  double inner_tol = 1e-6;
  int max_inner = 50;
  double prune_threshold = 1e-6;

  // Relative cost change below which the ADMM outer loop stops.
  double outer_tol = 1e-6;

  // Worker threads for per-column assignment updates.
  unsigned threads = 1;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (m < 1) bad("m must be >= 1");
    if (s_max < 1) bad("s_max must be >= 1");
    if (!(lambda1 >= 0) || !(lambda2 >= 0) || !(lambda_L >= 0)) bad("lambdas must be >= 0");
    if (!(mu > 0)) bad("mu must be > 0");
    if (t_inner < 1) bad("t_inner must be >= 1");
    if (t_outer && *t_outer < 1) bad("t_outer must be >= 1");
    if (!(eps_primal > 0) || !(inner_tol > 0) || !(outer_tol > 0)) bad("tolerances must be > 0");
    if (!(ridge >= 0) || !(dictionary_ridge >= 0)) bad("ridges must be >= 0");
    if (max_inner < 1) bad("max_inner must be >= 1");
  }
};

}  // namespace tractsparse
