#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tractsparse/distances.hpp"

using namespace tractsparse;

namespace {

Streamline line(std::initializer_list<Point3> pts) { return Streamline(std::vector<Point3>(pts)); }

}  // namespace

TEST(Distances, MatchNaiveLoopsBitwise) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = oracle::random_streamline(rng);
    const auto b = oracle::random_streamline(rng);
    EXPECT_EQ(dist_mcp(a, b), oracle::naive_mcp(a, b));
    EXPECT_EQ(dist_hausdorff(a, b), oracle::naive_hausdorff(a, b));
    EXPECT_EQ(dist_ep(a, b), oracle::naive_ep(a, b));
  }
}

TEST(Distances, SymmetricAndTranslationInvariant) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> off(-100, 100);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = oracle::random_streamline(rng);
    const auto b = oracle::random_streamline(rng);
    const Point3 t(off(rng), off(rng), off(rng));
    for (auto m : {Measure::Mcp, Measure::Hausdorff, Measure::Endpoint}) {
      const double d = distance(m, a, b);
      EXPECT_NEAR(d, distance(m, b, a), 1e-12);
      EXPECT_NEAR(d, distance(m, a.translated(t), b.translated(t)), 1e-12);
      EXPECT_GE(d, 0.0);
    }
  }
}

TEST(Distances, IdenticalStreamlinesAreAtZero) {
  std::mt19937_64 rng(3);
  const auto a = oracle::random_streamline(rng);
  for (auto m : {Measure::Mcp, Measure::Hausdorff, Measure::Endpoint}) EXPECT_EQ(distance(m, a, a), 0.0);
}

TEST(Distances, ParallelSegmentsTenApart) {
  const auto a = line({{0, 0, 0}, {10, 0, 0}});
  const auto b = line({{0, 10, 0}, {10, 10, 0}});
  EXPECT_DOUBLE_EQ(dist_mcp(a, b), 10.0);
  EXPECT_DOUBLE_EQ(dist_hausdorff(a, b), 10.0);
  EXPECT_DOUBLE_EQ(dist_ep(a, b), 10.0);
}

TEST(Distances, EndpointIgnoresOrientation) {
  std::mt19937_64 rng(5);
  const auto a = oracle::random_streamline(rng);
  const auto b = oracle::random_streamline(rng);
  EXPECT_EQ(dist_ep(a, b), dist_ep(a.reversed(), b));
  EXPECT_EQ(dist_mcp(a, b), dist_mcp(a.reversed(), b));
  EXPECT_EQ(dist_hausdorff(a, b), dist_hausdorff(a, b.reversed()));
}

TEST(Distances, HausdorffBoundsMcp) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_streamline(rng);
    const auto b = oracle::random_streamline(rng);
    EXPECT_LE(dist_mcp(a, b), dist_hausdorff(a, b) + 1e-12);
  }
}

TEST(Distances, PairwiseMatrixIsThreadIndependent) {
  std::mt19937_64 rng(7);
  Tractogram t;
  for (int i = 0; i < 40; ++i) t.streamlines.push_back(oracle::random_streamline(rng));
  const auto d1 = pairwise_distances(t, Measure::Mcp, 1);
  const auto d4 = pairwise_distances(t, Measure::Mcp, 4);
  EXPECT_TRUE(d1.values() == d4.values());
  for (Eigen::Index i = 0; i < d1.n(); ++i) {
    EXPECT_EQ(d1(i, i), 0.0);
    for (Eigen::Index j = 0; j < d1.n(); ++j) EXPECT_EQ(d1(i, j), d1(j, i));
  }
  const auto cross = cross_distances(t, t, Measure::Mcp, 3);
  EXPECT_TRUE(cross == d1.values());
}

TEST(Distances, Validation) {
  Tractogram empty;
  EXPECT_THROW(pairwise_distances(empty, Measure::Mcp), Error);
  Tractogram one_point;
  one_point.streamlines.push_back(line({{0, 0, 0}}));
  try {
    pairwise_distances(one_point, Measure::Mcp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateStreamline);
  }
  Tractogram nan;
  nan.streamlines.push_back(line({{0, 0, 0}, {std::nan(""), 0, 0}}));
  try {
    pairwise_distances(nan, Measure::Mcp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteCoordinate);
  }
  EXPECT_THROW(parse_measure("bogus"), Error);
  EXPECT_EQ(parse_measure("haus"), Measure::Hausdorff);
}

TEST(EndpointGraph, ThresholdIsStrict) {
  Tractogram t;
  t.streamlines.push_back(line({{0, 0, 0}, {10, 0, 0}}));
  t.streamlines.push_back(line({{10, 6.9, 0}, {30, 0, 0}}));
  t.streamlines.push_back(line({{0, 7, 0}, {-20, 7, 0}}));
  const auto g = build_endpoint_graph(t, 7.0);
  EXPECT_EQ(g.adjacency(0, 1), 1.0);
  EXPECT_EQ(g.adjacency(0, 2), 0.0);
  EXPECT_EQ(g.edge_count(), 1);
  const auto l = graph_laplacian(g);
  EXPECT_NEAR(l.rowwise().sum().cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_EQ(l(0, 0), 1.0);
  EXPECT_EQ(l(0, 1), -1.0);
}
