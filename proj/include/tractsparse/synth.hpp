#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tractsparse/core.hpp"

namespace tractsparse::synth {

enum class Template { Line, Arc, UShape, SShape, CrossingPair };

inline Template parse_template(std::string_view name) {
  if (name == "line") return Template::Line;
  if (name == "arc") return Template::Arc;
  if (name == "u_shape") return Template::UShape;
  if (name == "s_shape") return Template::SShape;
  if (name == "crossing_pair") return Template::CrossingPair;
  throw Error(ErrorCode::InvalidArgument, "unknown bundle template '" + std::string(name) + "'");
}

struct BundleSpec {
  Template shape = Template::Line;
  Point3 center = Point3::Zero();
  double scale = 40.0;  // mm, overall extent of the centerline
  int streamline_count = 100;
  double jitter_sigma = 2.0;      // mm
  double length_variation = 0.0;  // max fraction removed from each end
  int min_points = 15;
  int max_points = 30;
  double rotation_deg = 0.0;  // about the z axis
  double tilt_deg = 0.0;      // about the x axis, applied after rotation

  void validate() const {
    if (streamline_count < 1) throw Error(ErrorCode::InvalidArgument, "streamline_count must be >= 1");
    if (!(jitter_sigma >= 0)) throw Error(ErrorCode::InvalidArgument, "jitter_sigma must be >= 0");
    if (!(scale > 0)) throw Error(ErrorCode::InvalidArgument, "scale must be > 0");
    if (!(length_variation >= 0 && length_variation < 1))
      throw Error(ErrorCode::InvalidArgument, "length_variation must be in [0, 1)");
    if (min_points < 2 || max_points < min_points)
      throw Error(ErrorCode::InvalidArgument, "point range must satisfy 2 <= min <= max");
  }
};

struct Dataset {
  Tractogram tractogram;
  Labeling labels;
};

/// Template centerline at arclength parameter u in [0, 1], unit extent,
/// centered on the origin in the xy plane.
inline Point3 centerline(Template shape, double u) {
  constexpr double pi = std::numbers::pi;
  switch (shape) {
    case Template::Line:
      return {u - 0.5, 0.0, 0.0};
    case Template::Arc: {
      const double a = pi * u;
      return {-0.5 * std::cos(a), 0.5 * std::sin(a) - 0.25, 0.0};
    }
    case Template::UShape: {
      // Two legs joined by a half circle, split evenly by arclength.
      const double leg = 0.5, radius = 0.25;
      const double arc = pi * radius;
      const double total = 2 * leg + arc;
      const double s = u * total;
      if (s < leg) return {-radius, 0.5 - s, 0.0};
      if (s < leg + arc) {
        const double a = pi * (s - leg) / arc;
        return {-radius * std::cos(a), -radius * std::sin(a), 0.0};
      }
      return {radius, (s - leg - arc), 0.0};
    }
    case Template::SShape:
      return {u - 0.5, 0.2 * std::sin(2 * pi * u), 0.0};
    case Template::CrossingPair:
      // Straight segment with a slight out-of-plane bow; two of these at
      // different rotations around a shared center form a crossing.
      return {u - 0.5, 0.0, 0.08 * std::sin(pi * u)};
  }
  return Point3::Zero();
}

namespace detail {

// Legendre polynomials P0..P3 on [-1, 1].
inline std::array<double, 4> legendre(double x) {
  return {1.0, x, 0.5 * (3 * x * x - 1), 0.5 * (5 * x * x * x - 3 * x)};
}

inline Eigen::Matrix3d rotation(double rotation_deg, double tilt_deg) {
  const double a = rotation_deg * std::numbers::pi / 180.0;
  const double b = tilt_deg * std::numbers::pi / 180.0;
  Eigen::Matrix3d rz;
  rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  Eigen::Matrix3d rx;
  rx << 1, 0, 0, 0, std::cos(b), -std::sin(b), 0, std::sin(b), std::cos(b);
  return rx * rz;
}

}  // namespace detail

/// One streamline per draw: template centerline plus a smooth cubic offset
/// field in arclength, ends truncated by a random fraction, resampled to a
/// random point count.
inline Dataset generate(const std::vector<BundleSpec>& specs, std::uint64_t seed) {
  if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one bundle spec");
  for (const auto& s : specs) s.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset out;
  for (std::size_t b = 0; b < specs.size(); ++b) {
    const auto& spec = specs[b];
    const Eigen::Matrix3d rot = detail::rotation(spec.rotation_deg, spec.tilt_deg);
    std::uniform_int_distribution<int> count_dist(spec.min_points, spec.max_points);
    for (int s = 0; s < spec.streamline_count; ++s) {
      std::array<Point3, 4> coeff;
      for (auto& c : coeff) c = Point3(normal(rng), normal(rng), normal(rng)) * spec.jitter_sigma;
      const double start = spec.length_variation * unit(rng);
      const double end = 1.0 - spec.length_variation * unit(rng);
      const int points = count_dist(rng);
      std::vector<Point3> pts;
      pts.reserve(static_cast<std::size_t>(points));
      for (int p = 0; p < points; ++p) {
        const double u = start + (end - start) * p / (points - 1);
        const auto basis = detail::legendre(2 * u - 1);
        Point3 offset = Point3::Zero();
        for (int d = 0; d < 4; ++d) offset += basis[static_cast<std::size_t>(d)] * coeff[static_cast<std::size_t>(d)];
        pts.push_back(spec.center + rot * (centerline(spec.shape, u) * spec.scale) + offset);
      }
      out.tractogram.streamlines.emplace_back(std::move(pts));
      out.labels.push_back(static_cast<int>(b));
    }
  }
  return out;
}

/// Five bundles of distinct shapes, centers at least 110 mm apart.
inline std::vector<BundleSpec> separated5(int per_bundle = 200) {
  std::vector<BundleSpec> specs;
  const std::array<Template, 5> shapes{Template::Line, Template::Arc, Template::UShape,
                                       Template::SShape, Template::Line};
  const std::array<Point3, 5> centers{Point3(0, 0, 0), Point3(120, 0, 0), Point3(0, 120, 0),
                                      Point3(120, 120, 0), Point3(60, 60, 100)};
  const std::array<double, 5> rotations{0, 0, 0, 0, 90};
  for (std::size_t i = 0; i < 5; ++i) {
    BundleSpec s;
    s.shape = shapes[i];
    s.center = centers[i];
    s.scale = 40.0;
    s.streamline_count = per_bundle;
    s.jitter_sigma = 2.0;
    s.length_variation = 0.1;
    s.rotation_deg = rotations[i];
    specs.push_back(s);
  }
  return specs;
}

/// Three parallel bundles whose centerlines overlap along part of their
/// length, with distinct endpoint regions.
inline std::vector<BundleSpec> overlap3(int per_bundle = 100) {
  std::vector<BundleSpec> specs;
  const std::array<Point3, 3> centers{Point3(0, 0, 0), Point3(20, 8, 0), Point3(40, 0, 0)};
  for (const auto& c : centers) {
    BundleSpec s;
    s.shape = Template::Line;
    s.center = c;
    s.scale = 60.0;
    s.streamline_count = per_bundle;
    s.jitter_sigma = 3.0;
    s.length_variation = 0.05;
    specs.push_back(s);
  }
  return specs;
}

/// Two straight bundles crossing at a shared center.
inline std::vector<BundleSpec> crossing2(int per_bundle = 100) {
  std::vector<BundleSpec> specs;
  for (double rot : {30.0, -30.0}) {
    BundleSpec s;
    s.shape = Template::CrossingPair;
    s.center = Point3(0, 0, 0);
    s.scale = 80.0;
    s.streamline_count = per_bundle;
    s.jitter_sigma = 2.0;
    s.length_variation = 0.1;
    s.rotation_deg = rot;
    specs.push_back(s);
  }
  return specs;
}

inline std::vector<BundleSpec> preset(std::string_view name, int per_bundle = 0) {
  if (name == "separated5") return per_bundle > 0 ? separated5(per_bundle) : separated5();
  if (name == "overlap3") return per_bundle > 0 ? overlap3(per_bundle) : overlap3();
  if (name == "crossing2") return per_bundle > 0 ? crossing2(per_bundle) : crossing2();
  throw Error(ErrorCode::InvalidArgument, "unknown preset '" + std::string(name) + "'");
}

}  // namespace tractsparse::synth
