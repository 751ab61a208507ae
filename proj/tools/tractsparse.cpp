#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "tractsparse/atlas.hpp"
#include "tractsparse/core.hpp"
#include "tractsparse/distances.hpp"
#include "tractsparse/io.hpp"
#include "tractsparse/kernel.hpp"
#include "tractsparse/metrics.hpp"
#include "tractsparse/solvers.hpp"
#include "tractsparse/synth.hpp"

#ifndef TRACTSPARSE_VERSION
#define TRACTSPARSE_VERSION "0.0.0"
#endif

namespace {

namespace ts = tractsparse;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest.data(), &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw ts::Error(ts::ErrorCode::Io, "sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

/// Command, resolved config, input hashes, version and per-stage timings.
class RunManifest {
 public:
  RunManifest(std::string command, const std::vector<std::string>& argv) {
    j_["command"] = std::move(command);
    j_["argv"] = argv;
    j_["version"] = TRACTSPARSE_VERSION;
    j_["config"] = json::object();
    j_["inputs"] = json::object();
    j_["results"] = json::object();
    j_["timings"] = json::object();
  }

  json& config() { return j_["config"]; }
  json& results() { return j_["results"]; }

  void add_input(const fs::path& path) {
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files)
        j_["inputs"][f.string()] = sha256_hex(ts::io::read_file(f));
    } else {
      j_["inputs"][path.string()] = sha256_hex(ts::io::read_file(path));
    }
  }

  template <typename F>
  decltype(auto) stage(const std::string& name, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      json& timings;
      const std::string& name;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        timings[name] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
    } record{j_["timings"], name, start};
    return f();
  }

  void write(const fs::path& path) const { ts::io::write_file_atomic(path, j_.dump(2) + "\n"); }

 private:
  json j_;
};

const std::vector<std::string> kMeasures{"mcp", "haus", "ep"};

void add_threads(CLI::App* cmd, unsigned& threads) {
  cmd->add_option("--threads", threads, "Worker threads (default: TRACTSPARSE_THREADS or 1)")
      ->check(CLI::Range(1u, 1024u));
}

/// Applies TRACTSPARSE_THREADS when --threads was not given.
void resolve_threads(const CLI::App* cmd, unsigned& threads) {
  const auto* opt = cmd->get_option_no_throw("--threads");
  if (!opt || opt->count() > 0) return;
  const char* env = std::getenv("TRACTSPARSE_THREADS");
  if (!env || !*env) return;
  const std::string_view text(env);
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 1 || value > 1024)
    throw ts::Error(ts::ErrorCode::InvalidArgument,
                    "TRACTSPARSE_THREADS must be an integer in [1, 1024], got '" + std::string(text) + "'");
  threads = value;
}

std::vector<ts::synth::BundleSpec> specs_from_json(const fs::path& path) {
  std::vector<ts::synth::BundleSpec> specs;
  try {
    const json j = json::parse(ts::io::read_file(path));
    const json& bundles = j.is_array() ? j : j.at("bundles");
    for (const auto& b : bundles) {
      ts::synth::BundleSpec s;
      s.shape = ts::synth::parse_template(b.at("template").get<std::string>());
      if (b.contains("center")) {
        const auto c = b["center"].get<std::vector<double>>();
        if (c.size() != 3) throw ts::Error(ts::ErrorCode::Format, "center needs 3 coordinates");
        s.center = ts::Point3(c[0], c[1], c[2]);
      }
      s.scale = b.value("scale", s.scale);
      s.streamline_count = b.value("streamline_count", s.streamline_count);
      s.jitter_sigma = b.value("jitter_sigma", s.jitter_sigma);
      s.length_variation = b.value("length_variation", s.length_variation);
      if (b.contains("points_per_streamline")) {
        const auto r = b["points_per_streamline"].get<std::vector<int>>();
        if (r.size() != 2) throw ts::Error(ts::ErrorCode::Format, "points_per_streamline needs [min, max]");
        s.min_points = r[0];
        s.max_points = r[1];
      }
      s.rotation_deg = b.value("rotation_deg", s.rotation_deg);
      s.tilt_deg = b.value("tilt_deg", s.tilt_deg);
      specs.push_back(s);
    }
  } catch (const json::exception& e) {
    throw ts::Error(ts::ErrorCode::Format, path.string() + ": " + e.what());
  }
  if (specs.empty()) throw ts::Error(ts::ErrorCode::InvalidArgument, "spec file has no bundles");
  return specs;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string source;
  std::uint64_t seed = 1;
  int per_bundle = 0;
  std::string format = "slb";
  fs::path out;
};

int run_synth(const SynthArgs& a, RunManifest& manifest) {
  const bool from_file = a.source.ends_with(".json");
  if (from_file) manifest.add_input(a.source);
  const auto specs = from_file ? specs_from_json(a.source) : ts::synth::preset(a.source, a.per_bundle);
  manifest.config() = {{"source", a.source}, {"seed", a.seed}, {"per_bundle", a.per_bundle},
                       {"format", a.format}};
  const auto data = manifest.stage("generate", [&] { return ts::synth::generate(specs, a.seed); });
  fs::create_directories(a.out);
  manifest.stage("write", [&] {
    ts::io::write_tractogram(a.out / ("tract." + a.format), data.tractogram);
    ts::io::write_labels(a.out / "labels.txt", data.labels);
  });
  manifest.results()["streamlines"] = data.tractogram.size();
  manifest.results()["bundles"] = specs.size();
  manifest.write(a.out / "manifest.json");
  return kExitOk;
}

struct DistancesArgs {
  fs::path in, out;
  std::string measure = "mcp";
  unsigned threads = 1;
};

int run_distances(const DistancesArgs& a, RunManifest& manifest) {
  const auto measure = ts::parse_measure(a.measure);
  manifest.add_input(a.in);
  manifest.config() = {{"measure", std::string(ts::to_string(measure))}, {"threads", a.threads}};
  const auto t = manifest.stage("read", [&] { return ts::io::read_tractogram(a.in); });
  const auto d = manifest.stage("distances", [&] { return ts::pairwise_distances(t, measure, a.threads); });
  manifest.stage("write", [&] { ts::io::write_distances(a.out, d); });
  manifest.results()["streamlines"] = d.n();
  manifest.write(fs::path(a.out.string() + ".manifest.json"));
  return kExitOk;
}

struct ClusterArgs {
  fs::path in, out;
  std::optional<fs::path> dist;
  std::string measure = "mcp";
  std::string method = "ksc";
  std::string init = "spectral";
  int m = 0;
  int s_max = 3;
  std::optional<double> lambda1, lambda2;
  double lambda_L = 0.1;
  double mu = 0.01;
  int nystrom = 0;
  std::uint64_t seed = 1;
  double ep_threshold = ts::kDefaultEndpointThresholdMm;
  std::optional<int> t_outer;
  int t_inner = 200;
  unsigned threads = 1;
};

int run_cluster(const ClusterArgs& a, RunManifest& manifest) {
  const auto measure = ts::parse_measure(a.measure);
  manifest.add_input(a.in);
  if (a.dist) manifest.add_input(*a.dist);
  const auto t = manifest.stage("read", [&] { return ts::io::read_tractogram(a.in); });
  ts::validate_tractogram(t);
  const auto n = static_cast<Eigen::Index>(t.size());

  ts::SolverConfig cfg;
  cfg.m = a.m;
  cfg.s_max = a.s_max;
  cfg.mu = a.mu;
  cfg.lambda1 = a.lambda1.value_or(0.1 * a.mu);
  cfg.lambda2 = a.lambda2.value_or(ts::default_lambda2(a.mu, n, a.m));
  cfg.lambda_L = a.lambda_L;
  cfg.seed = a.seed;
  cfg.t_outer = a.t_outer;
  cfg.t_inner = a.t_inner;
  cfg.threads = a.threads;
  cfg.validate();
  if (a.m > n) throw ts::Error(ts::ErrorCode::InvalidArgument, "--m exceeds the number of streamlines");

  std::optional<ts::DistanceMatrix> d;
  if (a.dist) {
    d = manifest.stage("read_distances", [&] { return ts::io::read_distances(*a.dist); });
    if (d->n() != n)
      throw ts::Error(ts::ErrorCode::LengthMismatch,
                      "distance matrix has " + std::to_string(d->n()) + " rows, tractogram has " +
                          std::to_string(n) + " streamlines");
  } else if (a.nystrom == 0) {
    d = manifest.stage("distances", [&] { return ts::pairwise_distances(t, measure, a.threads); });
  }

  const auto k = manifest.stage("kernel", [&] {
    if (a.nystrom > 0) {
      if (d) {
        if (a.nystrom > n) throw ts::Error(ts::ErrorCode::InvalidArgument, "--nystrom exceeds n");
        const double gamma = ts::select_gamma_or_default(*d);
        auto landmarks = ts::sample_landmarks(n, a.nystrom, a.seed);
        Eigen::MatrixXd rows(a.nystrom, n);
        for (int r = 0; r < a.nystrom; ++r)
          for (Eigen::Index j = 0; j < n; ++j)
            rows(r, j) = ts::rbf(gamma, (*d)(landmarks[static_cast<std::size_t>(r)], j));
        return ts::nystrom_from_rows(std::move(rows), std::move(landmarks), gamma, true);
      }
      return ts::nystrom_kernel(t, measure, std::nullopt, a.nystrom, a.seed, a.threads);
    }
    return ts::spectrum_shift(ts::rbf_kernel(*d, ts::select_gamma_or_default(*d)));
  });

  std::optional<ts::Dictionary> initial_dictionary;
  const auto init = manifest.stage("init", [&] {
    if (a.init == "random") {
      initial_dictionary = ts::random_selection_dictionary(n, a.m, a.seed);
      const Eigen::MatrixXd ka = k.multiply(initial_dictionary->a);
      const Eigen::MatrixXd aka = initial_dictionary->a.transpose() * ka;
      return ts::kkm_assign(aka, ka);
    }
    return ts::spectral_init(k, a.m, 10, a.seed);
  });

  std::optional<Eigen::MatrixXd> laplacian;
  if (a.method == "gksc-manifold") {
    laplacian = manifest.stage("endpoint_graph", [&] {
      return ts::graph_laplacian(ts::build_endpoint_graph(t, a.ep_threshold));
    });
  }

  const auto fit = manifest.stage("solve", [&] {
    if (a.method == "kkm") return ts::kkm_fit(k, cfg, init);
    if (a.method == "ksc") {
      ts::KscOptions opt;
      opt.initial_dictionary = initial_dictionary;
      return ts::ksc_fit(k, cfg, init, opt);
    }
    ts::GkscOptions opt;
    opt.initial_dictionary = initial_dictionary;
    return ts::gksc_fit(k, cfg, init, laplacian ? &*laplacian : nullptr, opt);
  });

  json extra;
  extra["method"] = a.method;
  extra["init"] = a.init;
  extra["measure"] = std::string(ts::to_string(measure));
  extra["gamma"] = k.gamma();
  extra["shift"] = k.shift();
  extra["nystrom"] = a.nystrom;
  if (laplacian) extra["ep_threshold"] = a.ep_threshold;
  manifest.stage("write", [&] { ts::io::write_fit(a.out, fit, cfg, extra); });

  manifest.config() = extra;
  manifest.config()["solver"] = ts::io::config_to_json(cfg);
  manifest.config()["threads"] = a.threads;
  manifest.results()["iterations"] = fit.iterations;
  manifest.results()["converged"] = fit.converged;
  manifest.results()["non_empty_clusters"] = fit.non_empty_clusters();
  manifest.results()["dissolved"] = fit.dissolved;
  if (!fit.cost_trace.empty()) manifest.results()["final_cost"] = fit.cost_trace.back();
  if (laplacian) manifest.results()["max_sylvester_residual"] = fit.max_sylvester_residual;
  manifest.write(a.out / "manifest.json");
  std::cout << "non-empty clusters: " << fit.non_empty_clusters() << "\n";
  return kExitOk;
}

struct MetricsArgs {
  fs::path pred;
  std::optional<fs::path> truth, dist, output;
  std::string format = "json";
};

int run_metrics(const MetricsArgs& a, RunManifest& manifest) {
  manifest.add_input(a.pred);
  if (a.truth) manifest.add_input(*a.truth);
  if (a.dist) manifest.add_input(*a.dist);
  manifest.config() = {{"format", a.format}};
  const auto pred = ts::io::read_labels(a.pred);
  ts::Labeling truth;
  if (a.truth) truth = ts::io::read_labels(*a.truth);
  std::optional<ts::DistanceMatrix> d;
  if (a.dist) {
    d = ts::io::read_distances(*a.dist);
    if (d->n() != static_cast<Eigen::Index>(pred.size()))
      throw ts::Error(ts::ErrorCode::LengthMismatch,
                      "distance matrix has " + std::to_string(d->n()) + " rows, labeling has " +
                          std::to_string(pred.size()) + " entries");
  }
  if (a.truth) ts::metrics::detail::require_same_length(truth, pred);
  const auto report = manifest.stage("metrics", [&] {
    return ts::metrics::report(pred, truth, d ? &*d : nullptr);
  });
  const std::string text =
      a.format == "csv" ? ts::io::report_to_csv(report) : ts::io::report_to_json(report).dump(2) + "\n";
  if (a.output) {
    ts::io::write_file_atomic(*a.output, text);
    manifest.write(fs::path(a.output->string() + ".manifest.json"));
  } else {
    std::cout << text;
  }
  return kExitOk;
}

struct AtlasArgs {
  std::vector<fs::path> in;
  fs::path out;
  std::size_t sample = 0;
  std::string measure = "mcp";
  std::string method = "ksc";
  int m = 0;
  int s_max = 3;
  std::uint64_t seed = 1;
  std::optional<int> t_outer;
  unsigned threads = 1;
};

int run_atlas_build(const AtlasArgs& a, RunManifest& manifest) {
  const auto measure = ts::parse_measure(a.measure);
  std::vector<ts::Tractogram> subjects;
  manifest.stage("read", [&] {
    for (const auto& p : a.in) {
      manifest.add_input(p);
      subjects.push_back(ts::io::read_tractogram(p));
    }
  });
  ts::SolverConfig cfg;
  cfg.m = a.m;
  cfg.s_max = a.s_max;
  cfg.seed = a.seed;
  cfg.t_outer = a.t_outer;
  cfg.threads = a.threads;
  cfg.validate();
  auto pool = manifest.stage("sample", [&] { return ts::pool_samples(subjects, a.sample, a.seed); });
  if (static_cast<std::size_t>(a.m) > pool.size())
    throw ts::Error(ts::ErrorCode::InvalidArgument, "--m exceeds the pooled streamline count");
  const auto atlas = manifest.stage("fit", [&] { return ts::build_atlas(std::move(pool), measure, cfg); });
  manifest.stage("write", [&] { ts::io::write_atlas(a.out, atlas); });
  manifest.config() = {{"method", a.method},
                       {"measure", std::string(ts::to_string(measure))},
                       {"sample", a.sample},
                       {"solver", ts::io::config_to_json(cfg)},
                       {"threads", a.threads}};
  manifest.results()["streamlines"] = atlas.training.size();
  manifest.results()["non_empty_atoms"] = atlas.dictionary.non_empty();
  manifest.write(a.out / "manifest.json");
  return kExitOk;
}

struct SegmentArgs {
  fs::path atlas, in, out;
  int s_max = 3;
  std::optional<std::string> measure;
  unsigned threads = 1;
};

int run_segment(const SegmentArgs& a, RunManifest& manifest) {
  manifest.add_input(a.atlas);
  manifest.add_input(a.in);
  const auto atlas = manifest.stage("read_atlas", [&] { return ts::io::read_atlas(a.atlas); });
  const auto t = manifest.stage("read", [&] { return ts::io::read_tractogram(a.in); });
  std::optional<ts::Measure> requested;
  if (a.measure) requested = ts::parse_measure(*a.measure);
  const auto seg = manifest.stage("segment", [&] {
    return ts::segment_with_atlas(atlas, t, a.s_max, requested, a.threads);
  });
  fs::create_directories(a.out);
  manifest.stage("write", [&] {
    ts::io::write_file_atomic(a.out / "W.csv", ts::io::sparse_to_csv(seg.assignment));
    ts::io::write_labels(a.out / "labels.txt", seg.labels);
  });
  manifest.config() = {{"s_max", a.s_max},
                       {"measure", std::string(ts::to_string(atlas.measure))},
                       {"threads", a.threads}};
  manifest.results()["streamlines"] = t.size();
  manifest.results()["unassigned"] = std::count(seg.labels.begin(), seg.labels.end(), ts::kUnassigned);
  manifest.write(a.out / "manifest.json");
  return kExitOk;
}

int exit_code_for(const ts::Error& e) {
  if (e.code() == ts::ErrorCode::InvalidArgument) return kExitUsage;
  if (ts::is_numerical(e.code())) return kExitNumerical;
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streamline clustering with kernel dictionary learning"};
  app.set_version_flag("--version", TRACTSPARSE_VERSION);
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic tractogram with ground truth");
  c_synth->add_option("source", synth.source, "Preset (separated5, overlap3, crossing2) or a .json spec file")
      ->required();
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--per-bundle", synth.per_bundle, "Streamlines per bundle for presets")
      ->check(CLI::NonNegativeNumber);
  c_synth->add_option("--format", synth.format, "Tractogram format")->check(CLI::IsMember({"slb", "sl"}));
  c_synth->add_option("--out", synth.out, "Output directory")->required();

  DistancesArgs dist;
  auto* c_dist = app.add_subcommand("distances", "Pairwise streamline distances");
  c_dist->add_option("--in", dist.in, "Tractogram (.sl or .slb)")->required()->check(CLI::ExistingFile);
  c_dist->add_option("--measure", dist.measure, "mcp, haus or ep")
      ->check(CLI::IsMember(kMeasures));
  c_dist->add_option("--out", dist.out, "Output .dm file")->required();
  add_threads(c_dist, dist.threads);

  ClusterArgs cl;
  auto* c_cluster = app.add_subcommand("cluster", "Cluster a tractogram");
  c_cluster->add_option("--in", cl.in, "Tractogram")->required()->check(CLI::ExistingFile);
  c_cluster->add_option("--dist", cl.dist, "Precomputed .dm file")->check(CLI::ExistingFile);
  c_cluster->add_option("--measure", cl.measure, "Inline measure when --dist is absent")
      ->check(CLI::IsMember(kMeasures));
  c_cluster->add_option("--method", cl.method)
      ->check(CLI::IsMember({"kkm", "ksc", "gksc", "gksc-manifold"}));
  c_cluster->add_option("--init", cl.init, "Initialization")->check(CLI::IsMember({"spectral", "random"}));
  c_cluster->add_option("--m", cl.m, "Number of atoms")->required()->check(CLI::PositiveNumber);
  c_cluster->add_option("--smax", cl.s_max, "Non-zeros per column")->check(CLI::PositiveNumber);
  c_cluster->add_option("--lambda1", cl.lambda1, "L1 weight (default 0.1 mu)");
  c_cluster->add_option("--lambda2", cl.lambda2, "L2,1 weight (default scales with sqrt(n/m))");
  c_cluster->add_option("--lambdaL", cl.lambda_L, "Manifold prior weight");
  c_cluster->add_option("--mu", cl.mu, "Initial ADMM penalty");
  c_cluster->add_option("--nystrom", cl.nystrom, "Landmark count (0 disables)")
      ->check(CLI::NonNegativeNumber);
  c_cluster->add_option("--seed", cl.seed, "Random seed");
  c_cluster->add_option("--ep-threshold", cl.ep_threshold, "Endpoint graph threshold in mm");
  c_cluster->add_option("--t-outer", cl.t_outer, "Outer sweep cap");
  c_cluster->add_option("--t-inner", cl.t_inner, "ADMM iteration cap");
  c_cluster->add_option("--out", cl.out, "Output .fit directory")->required();
  add_threads(c_cluster, cl.threads);

  MetricsArgs met;
  auto* c_metrics = app.add_subcommand("metrics", "Clustering quality metrics");
  c_metrics->add_option("--pred", met.pred, "Predicted labels")->required()->check(CLI::ExistingFile);
  c_metrics->add_option("--truth", met.truth, "Ground-truth labels")->check(CLI::ExistingFile);
  c_metrics->add_option("--dist", met.dist, ".dm file for silhouette")->check(CLI::ExistingFile);
  c_metrics->add_option("--out", met.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  c_metrics->add_option("--output", met.output, "Write the report here instead of stdout");

  AtlasArgs at;
  auto* c_atlas = app.add_subcommand("atlas-build", "Learn an atlas from one or more tractograms");
  c_atlas->add_option("--in", at.in, "Tractograms")->required()->check(CLI::ExistingFile);
  c_atlas->add_option("--sample", at.sample, "Streamlines sampled per subject (0 keeps all)");
  c_atlas->add_option("--measure", at.measure)->check(CLI::IsMember(kMeasures));
  c_atlas->add_option("--method", at.method)->check(CLI::IsMember({"ksc"}));
  c_atlas->add_option("--m", at.m, "Number of atoms")->required()->check(CLI::PositiveNumber);
  c_atlas->add_option("--smax", at.s_max)->check(CLI::PositiveNumber);
  c_atlas->add_option("--seed", at.seed);
  c_atlas->add_option("--t-outer", at.t_outer);
  c_atlas->add_option("--out", at.out, "Output .atlas directory")->required();
  add_threads(c_atlas, at.threads);

  SegmentArgs seg;
  auto* c_segment = app.add_subcommand("segment", "Label a tractogram against an atlas");
  c_segment->add_option("--atlas", seg.atlas)->required()->check(CLI::ExistingDirectory);
  c_segment->add_option("--in", seg.in)->required()->check(CLI::ExistingFile);
  c_segment->add_option("--smax", seg.s_max)->check(CLI::PositiveNumber);
  c_segment->add_option("--measure", seg.measure, "Must match the atlas measure")
      ->check(CLI::IsMember(kMeasures));
  c_segment->add_option("--out", seg.out)->required();
  add_threads(c_segment, seg.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    if (sub == c_dist) resolve_threads(sub, dist.threads);
    if (sub == c_cluster) resolve_threads(sub, cl.threads);
    if (sub == c_atlas) resolve_threads(sub, at.threads);
    if (sub == c_segment) resolve_threads(sub, seg.threads);
    RunManifest manifest(sub->get_name(), args);
    if (sub == c_synth) return run_synth(synth, manifest);
    if (sub == c_dist) return run_distances(dist, manifest);
    if (sub == c_cluster) return run_cluster(cl, manifest);
    if (sub == c_metrics) return run_metrics(met, manifest);
    if (sub == c_atlas) return run_atlas_build(at, manifest);
    if (sub == c_segment) return run_segment(seg, manifest);
  } catch (const ts::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [Io]: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
