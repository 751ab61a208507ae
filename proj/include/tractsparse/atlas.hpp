#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tractsparse/core.hpp"
#include "tractsparse/distances.hpp"
#include "tractsparse/io.hpp"
#include "tractsparse/kernel.hpp"
#include "tractsparse/solvers.hpp"

namespace tractsparse {

inline constexpr int kAtlasVersion = 1;

/// A learned dictionary together with everything needed to compare new
/// streamlines against it.
struct Atlas {
  int version = kAtlasVersion;
  Tractogram training;
  Dictionary dictionary;
  Labeling training_labels;
  Measure measure = Measure::Mcp;
  double gamma = 0.0;
  double shift = 0.0;
};

/// Uniform sample without replacement of `per_subject` streamlines from each
/// subject (all of them when the subject is smaller), pooled in input order.
inline Tractogram pool_samples(const std::vector<Tractogram>& subjects, std::size_t per_subject,
                               std::uint64_t seed) {
  if (subjects.empty()) throw Error(ErrorCode::EmptyTractogram, "no input tractograms");
  std::mt19937_64 rng(seed);
  Tractogram pooled;
  for (const auto& t : subjects) {
    validate_tractogram(t);
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (per_subject > 0 && per_subject < t.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(per_subject);
      std::sort(idx.begin(), idx.end());
    }
    for (auto i : idx) pooled.streamlines.push_back(t[i]);
  }
  return pooled;
}

/// Fits KSC on a training pool and keeps what segmentation needs.
inline Atlas build_atlas(Tractogram training, Measure measure, const SolverConfig& cfg) {
  validate_tractogram(training);
  const auto d = pairwise_distances(training, measure, cfg.threads);
  const double gamma = select_gamma_or_default(d);
  const auto k = spectrum_shift(rbf_kernel(d, gamma));
  const auto init = spectral_init(k, cfg.m, 10, cfg.seed);
  auto fit = ksc_fit(k, cfg, init);
  Atlas atlas;
  atlas.training = std::move(training);
  atlas.dictionary = std::move(fit.dictionary);
  atlas.training_labels = std::move(fit.labels);
  atlas.measure = measure;
  atlas.gamma = gamma;
  atlas.shift = k.shift();
  return atlas;
}

struct Segmentation {
  MatrixXd assignment;  // m x n_new
  Labeling labels;
};

/// Labels new streamlines by sparse coding against the atlas dictionary.
/// Cross similarities to the training streamlines carry no spectrum shift;
/// the shift only enters the atom self-similarities A^T K A.
inline Segmentation segment_with_atlas(const Atlas& atlas, const Tractogram& streamlines, int s_max,
                                       std::optional<Measure> requested = std::nullopt,
                                       unsigned threads = 1) {
  if (atlas.version != kAtlasVersion)
    throw Error(ErrorCode::AtlasVersionMismatch,
                "atlas version " + std::to_string(atlas.version) + " is not supported");
  if (requested && *requested != atlas.measure)
    throw Error(ErrorCode::AtlasVersionMismatch,
                std::string("atlas was built with measure '") + std::string(to_string(atlas.measure)) +
                    "', requested '" + std::string(to_string(*requested)) + "'");
  if (s_max < 1) throw Error(ErrorCode::InvalidArgument, "s_max must be >= 1");
  validate_tractogram(streamlines);
  const auto& a = atlas.dictionary.a;
  if (a.rows() != static_cast<Index>(atlas.training.size()))
    throw Error(ErrorCode::Format, "atlas dictionary does not match its training streamlines");

  // A^T K A only involves training streamlines in the support of A.
  std::vector<std::size_t> support;
  for (Index i = 0; i < a.rows(); ++i)
    if ((a.row(i).array() != 0.0).any()) support.push_back(static_cast<std::size_t>(i));
  Tractogram sub;
  for (auto i : support) sub.streamlines.push_back(atlas.training[i]);
  MatrixXd a_s(static_cast<Index>(support.size()), a.cols());
  for (std::size_t r = 0; r < support.size(); ++r) a_s.row(static_cast<Index>(r)) = a.row(static_cast<Index>(support[r]));
  const double gamma = atlas.gamma;
  MatrixXd k_ss = cross_distances(sub, sub, atlas.measure, threads)
                      .unaryExpr([gamma](double v) { return rbf(gamma, v); });
  k_ss.diagonal().array() += atlas.shift;
  const MatrixXd aka = a_s.transpose() * k_ss * a_s;

  const MatrixXd k_x = cross_distances(streamlines, sub, atlas.measure, threads)
                           .unaryExpr([gamma](double v) { return rbf(gamma, v); });
  const MatrixXd ka = k_x * a_s;  // n_new x m
  Segmentation out;
  out.assignment = nnkomp_all(aka, ka, s_max, &atlas.dictionary.empty, threads);
  out.labels = hard_labels(out.assignment, &atlas.dictionary.empty);
  return out;
}

namespace io {

/// training.slb, A.csv, labels.txt and kernel.json.
inline void write_atlas(const fs::path& dir, const Atlas& atlas) {
  fs::create_directories(dir);
  write_file_atomic(dir / "training.slb", tractogram_to_binary(atlas.training));
  write_file_atomic(dir / "A.csv", matrix_to_csv(atlas.dictionary.a));
  write_file_atomic(dir / "labels.txt", labels_to_text(atlas.training_labels));
  json j;
  j["version"] = atlas.version;
  j["measure"] = std::string(to_string(atlas.measure));
  j["gamma"] = atlas.gamma;
  j["shift"] = atlas.shift;
  j["streamlines"] = atlas.training.size();
  j["atoms"] = atlas.dictionary.m();
  write_file_atomic(dir / "kernel.json", j.dump(2) + "\n");
}

inline Atlas read_atlas(const fs::path& dir) {
  Atlas atlas;
  json j;
  try {
    j = json::parse(read_file(dir / "kernel.json"));
    atlas.version = j.at("version").get<int>();
    atlas.gamma = j.at("gamma").get<double>();
    atlas.shift = j.at("shift").get<double>();
    atlas.measure = parse_measure(j.at("measure").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("kernel.json: ") + e.what());
  }
  if (atlas.version != kAtlasVersion)
    throw Error(ErrorCode::AtlasVersionMismatch,
                "atlas version " + std::to_string(atlas.version) + " is not supported");
  atlas.training = tractogram_from_binary(read_file(dir / "training.slb"), (dir / "training.slb").string());
  atlas.dictionary = Dictionary::from(matrix_from_csv(read_file(dir / "A.csv"), (dir / "A.csv").string()));
  for (Index c = 0; c < atlas.dictionary.m(); ++c)
    atlas.dictionary.empty[static_cast<std::size_t>(c)] = !(atlas.dictionary.a.col(c).array() != 0.0).any();
  if (fs::exists(dir / "labels.txt")) atlas.training_labels = read_labels(dir / "labels.txt");
  if (atlas.dictionary.n() != static_cast<Index>(atlas.training.size()))
    throw Error(ErrorCode::Format, "atlas dictionary does not match its training streamlines");
  return atlas;
}

}  // namespace io

}  // namespace tractsparse
