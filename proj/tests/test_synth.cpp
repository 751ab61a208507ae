#include <algorithm>

#include <gtest/gtest.h>

#include "tractsparse/distances.hpp"
#include "tractsparse/synth.hpp"

using namespace tractsparse;

TEST(Synth, NoJitterGivesIdenticalStreamlines) {
  synth::BundleSpec spec;
  spec.streamline_count = 5;
  spec.jitter_sigma = 0.0;
  spec.length_variation = 0.0;
  spec.min_points = spec.max_points = 20;
  const auto data = synth::generate({spec}, 4);
  ASSERT_EQ(data.tractogram.size(), 5u);
  const auto d = pairwise_distances(data.tractogram, Measure::Mcp);
  EXPECT_EQ(d.values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Synth, DeterministicPerSeed) {
  const auto a = synth::generate(synth::preset("overlap3"), 9);
  const auto b = synth::generate(synth::preset("overlap3"), 9);
  const auto c = synth::generate(synth::preset("overlap3"), 10);
  EXPECT_TRUE(a.tractogram == b.tractogram);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_FALSE(a.tractogram == c.tractogram);
}

TEST(Synth, LabelsHaveRequestedCounts) {
  const auto specs = synth::preset("separated5", 30);
  const auto data = synth::generate(specs, 1);
  ASSERT_EQ(data.labels.size(), 150u);
  for (int b = 0; b < 5; ++b) EXPECT_EQ(std::count(data.labels.begin(), data.labels.end(), b), 30);
}

TEST(Synth, PointCountsStayInRange) {
  synth::BundleSpec spec;
  spec.shape = synth::Template::SShape;
  spec.streamline_count = 50;
  spec.min_points = 8;
  spec.max_points = 12;
  spec.length_variation = 0.3;
  const auto data = synth::generate({spec}, 2);
  for (const auto& s : data.tractogram.streamlines) {
    EXPECT_GE(s.size(), 8u);
    EXPECT_LE(s.size(), 12u);
  }
}

TEST(Synth, SeparatedPresetSeparationRatio) {
  const auto data = synth::generate(synth::preset("separated5", 60), 1);
  const auto d = pairwise_distances(data.tractogram, Measure::Mcp);
  double intra = 0.0, cross = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d.n(); ++i)
    for (Eigen::Index j = i + 1; j < d.n(); ++j) {
      if (data.labels[i] == data.labels[j]) intra = std::max(intra, d(i, j));
      else cross = std::min(cross, d(i, j));
    }
  EXPECT_GT(cross, 5.0 * intra);
}

TEST(Synth, Validation) {
  EXPECT_THROW(synth::preset("bogus"), Error);
  EXPECT_THROW(synth::generate({}, 1), Error);
  synth::BundleSpec bad;
  bad.scale = 0.0;
  EXPECT_THROW(synth::generate({bad}, 1), Error);
  EXPECT_THROW(synth::parse_template("spiral"), Error);
  EXPECT_EQ(synth::parse_template("crossing_pair"), synth::Template::CrossingPair);
}

TEST(Synth, AllTemplatesProduceValidStreamlines) {
  for (auto name : {"line", "arc", "u_shape", "s_shape", "crossing_pair"}) {
    synth::BundleSpec spec;
    spec.shape = synth::parse_template(name);
    spec.streamline_count = 10;
    const auto data = synth::generate({spec}, 3);
    EXPECT_NO_THROW(validate_tractogram(data.tractogram)) << name;
  }
}
