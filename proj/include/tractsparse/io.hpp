#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "tractsparse/core.hpp"
#include "tractsparse/distances.hpp"
#include "tractsparse/kernel.hpp"
#include "tractsparse/metrics.hpp"
#include "tractsparse/solvers.hpp"

namespace tractsparse::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Primitives

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error(ErrorCode::Format, "cannot format number");
  return std::string(buf.data(), end);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::Format, where + ": bad number '" + std::string(s) + "'");
  return v;
}

inline long long parse_int(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw Error(ErrorCode::Format, where + ": bad integer '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a sibling temporary and a rename so readers never observe a
/// partial file.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename onto " + path.string() + ": " + ec.message());
}

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  void magic(std::string_view m) { buf_.append(m); }
  void u64(std::uint64_t v) { put(to_little(v)); }
  void u32(std::uint32_t v) { put(to_little(v)); }
  void f64(double v) { put(to_little(std::bit_cast<std::uint64_t>(v))); }
  const std::string& bytes() const { return buf_; }

 private:
  template <class T>
  void put(T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.append(raw, sizeof(T));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string name) : buf_(std::move(bytes)), name_(std::move(name)) {}

  void expect_magic(std::string_view m) {
    need(m.size());
    if (std::string_view(buf_).substr(pos_, m.size()) != m)
      throw Error(ErrorCode::Format, name_ + ": missing '" + std::string(m) + "' header");
    pos_ += m.size();
  }
  std::uint64_t u64() { return to_little(get<std::uint64_t>()); }
  std::uint32_t u32() { return to_little(get<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(to_little(get<std::uint64_t>())); }
  std::size_t remaining() const { return buf_.size() - pos_; }
  void expect_end() const {
    if (pos_ != buf_.size()) throw Error(ErrorCode::Format, name_ + ": trailing bytes");
  }
  /// Guards a count read from the file against the bytes actually present.
  void check_count(std::uint64_t count, std::size_t bytes_each) const {
    if (bytes_each > 0 && count > remaining() / bytes_each)
      throw Error(ErrorCode::Format, name_ + ": truncated");
  }

 private:
  void need(std::size_t k) const {
    if (buf_.size() - pos_ < k) throw Error(ErrorCode::Format, name_ + ": truncated");
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Tractograms

inline std::string tractogram_to_text(const Tractogram& t) {
  std::string out;
  for (std::size_t s = 0; s < t.size(); ++s) {
    if (s > 0) out += '\n';
    for (const auto& p : t[s].points()) {
      out += format_double(p.x());
      out += ' ';
      out += format_double(p.y());
      out += ' ';
      out += format_double(p.z());
      out += '\n';
    }
  }
  return out;
}

inline Tractogram tractogram_from_text(std::string_view text, const std::string& name = "tractogram") {
  Tractogram t;
  std::vector<Point3> current;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!current.empty()) t.streamlines.emplace_back(std::move(current));
    current.clear();
  };
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() == '#') continue;
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      flush();
      continue;
    }
    std::vector<std::string_view> fields;
    for (auto f : split(line, ' '))
      if (!f.empty()) fields.push_back(f);
    const std::string where = name + ":" + std::to_string(line_no);
    if (fields.size() != 3) throw Error(ErrorCode::Format, where + ": expected 'x y z'");
    current.emplace_back(parse_double(fields[0], where), parse_double(fields[1], where),
                         parse_double(fields[2], where));
  }
  flush();
  return t;
}

inline std::string tractogram_to_binary(const Tractogram& t) {
  detail::Writer w;
  w.magic("SLB1");
  w.u64(t.size());
  for (const auto& s : t.streamlines) {
    w.u64(s.size());
    for (const auto& p : s.points()) {
      w.f64(p.x());
      w.f64(p.y());
      w.f64(p.z());
    }
  }
  return w.bytes();
}

inline Tractogram tractogram_from_binary(std::string bytes, const std::string& name = "tractogram") {
  detail::Reader r(std::move(bytes), name);
  r.expect_magic("SLB1");
  const auto count = r.u64();
  r.check_count(count, 8);
  Tractogram t;
  t.streamlines.reserve(count);
  for (std::uint64_t s = 0; s < count; ++s) {
    const auto points = r.u64();
    r.check_count(points, 24);
    std::vector<Point3> pts;
    pts.reserve(points);
    for (std::uint64_t p = 0; p < points; ++p) {
      const double x = r.f64(), y = r.f64(), z = r.f64();
      pts.emplace_back(x, y, z);
    }
    t.streamlines.emplace_back(std::move(pts));
  }
  r.expect_end();
  return t;
}

inline bool is_binary_tractogram(const fs::path& path) { return path.extension() == ".slb"; }

inline Tractogram read_tractogram(const fs::path& path) {
  if (is_binary_tractogram(path)) return tractogram_from_binary(read_file(path), path.string());
  return tractogram_from_text(read_file(path), path.string());
}

inline void write_tractogram(const fs::path& path, const Tractogram& t) {
  write_file_atomic(path, is_binary_tractogram(path) ? tractogram_to_binary(t) : tractogram_to_text(t));
}

// ---------------------------------------------------------------------------
// Labels

inline std::string labels_to_text(const Labeling& labels) {
  std::string out;
  for (int l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  return out;
}

inline Labeling labels_from_text(std::string_view text, const std::string& name = "labels") {
  Labeling out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto v = parse_int(line, name + ":" + std::to_string(line_no));
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      throw Error(ErrorCode::Format, name + ":" + std::to_string(line_no) + ": label out of range");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline Labeling read_labels(const fs::path& path) {
  return labels_from_text(read_file(path), path.string());
}

inline void write_labels(const fs::path& path, const Labeling& labels) {
  write_file_atomic(path, labels_to_text(labels));
}

// ---------------------------------------------------------------------------
// Distance matrices

/// "DM01", u64 n, then the strict upper triangle row by row.
inline std::string distances_to_binary(const DistanceMatrix& d) {
  detail::Writer w;
  w.magic("DM01");
  const Eigen::Index n = d.n();
  w.u64(static_cast<std::uint64_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) w.f64(d(i, j));
  return w.bytes();
}

inline DistanceMatrix distances_from_binary(std::string bytes, const std::string& name = "distances") {
  detail::Reader r(std::move(bytes), name);
  r.expect_magic("DM01");
  const auto n64 = r.u64();
  if (n64 > (std::uint64_t{1} << 31)) throw Error(ErrorCode::Format, name + ": implausible size");
  const auto n = static_cast<Eigen::Index>(n64);
  r.check_count(n64 * (n64 > 0 ? n64 - 1 : 0) / 2, 8);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = m(j, i) = r.f64();
  r.expect_end();
  return DistanceMatrix(std::move(m));
}

inline DistanceMatrix read_distances(const fs::path& path) {
  return distances_from_binary(read_file(path), path.string());
}

inline void write_distances(const fs::path& path, const DistanceMatrix& d) {
  write_file_atomic(path, distances_to_binary(d));
}

// ---------------------------------------------------------------------------
// CSV

inline std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Eigen::MatrixXd matrix_from_csv(std::string_view text, const std::string& name = "csv") {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<double> row;
    for (auto f : split(line, ',')) row.push_back(parse_double(f, name + ":" + std::to_string(line_no)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::Format, name + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = rows.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

/// Non-zero entries as "row,col,value" lines after a header.
inline std::string sparse_to_csv(const Eigen::MatrixXd& m) {
  std::string out = "row,col,value\n";
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) {
        out += std::to_string(i);
        out += ',';
        out += std::to_string(j);
        out += ',';
        out += format_double(m(i, j));
        out += '\n';
      }
  return out;
}

inline Eigen::MatrixXd sparse_from_csv(std::string_view text, Eigen::Index rows, Eigen::Index cols,
                                       const std::string& name = "csv") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line_no == 1) continue;
    const auto f = split(line, ',');
    const std::string where = name + ":" + std::to_string(line_no);
    if (f.size() != 3) throw Error(ErrorCode::Format, where + ": expected row,col,value");
    const auto i = parse_int(f[0], where), j = parse_int(f[1], where);
    if (i < 0 || j < 0 || i >= rows || j >= cols)
      throw Error(ErrorCode::Format, where + ": index out of range");
    m(i, j) = parse_double(f[2], where);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Kernels

/// "KM01", u32 form tag (0 dense, 1 factored), u64 rows, u64 cols, row-major
/// payload, gamma, shift, u64 landmark count and indices.
inline std::string kernel_to_binary(const KernelMatrix& k) {
  detail::Writer w;
  w.magic("KM01");
  w.u32(k.is_factored() ? 1u : 0u);
  const auto& m = k.data();
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
  w.f64(k.gamma());
  w.f64(k.shift());
  w.u64(k.landmarks().size());
  for (auto idx : k.landmarks()) w.u64(static_cast<std::uint64_t>(idx));
  return w.bytes();
}

inline KernelMatrix kernel_from_binary(std::string bytes, const std::string& name = "kernel") {
  detail::Reader r(std::move(bytes), name);
  r.expect_magic("KM01");
  const auto tag = r.u32();
  if (tag > 1) throw Error(ErrorCode::Format, name + ": unknown form tag");
  const auto rows = r.u64(), cols = r.u64();
  if (rows > (std::uint64_t{1} << 31) || cols > (std::uint64_t{1} << 31))
    throw Error(ErrorCode::Format, name + ": implausible size");
  r.check_count(rows * cols, 8);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  const double gamma = r.f64(), shift = r.f64();
  const auto count = r.u64();
  r.check_count(count, 8);
  std::vector<Eigen::Index> landmarks;
  for (std::uint64_t a = 0; a < count; ++a) {
    const auto idx = r.u64();
    if (idx >= rows) throw Error(ErrorCode::Format, name + ": landmark index out of range");
    landmarks.push_back(static_cast<Eigen::Index>(idx));
  }
  r.expect_end();
  if (tag == 0) {
    if (rows != cols) throw Error(ErrorCode::Format, name + ": dense kernel is not square");
    return KernelMatrix::dense_from(std::move(m), gamma, shift);
  }
  return KernelMatrix::factored_from(std::move(m), std::move(landmarks), gamma, shift);
}

inline KernelMatrix read_kernel(const fs::path& path) {
  return kernel_from_binary(read_file(path), path.string());
}

inline void write_kernel(const fs::path& path, const KernelMatrix& k) {
  write_file_atomic(path, kernel_to_binary(k));
}

// ---------------------------------------------------------------------------
// Solver config and fit results

inline json config_to_json(const SolverConfig& c) {
  json j;
  j["m"] = c.m;
  j["s_max"] = c.s_max;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["lambda_L"] = c.lambda_L;
  j["mu"] = c.mu;
  j["adaptive_mu"] = c.adaptive_mu;
  j["t_inner"] = c.t_inner;
  j["t_outer"] = c.t_outer ? json(*c.t_outer) : json(nullptr);
  j["eps_primal"] = c.eps_primal;
  j["seed"] = c.seed;
  j["ridge"] = c.ridge;
  j["dictionary_ridge"] = c.dictionary_ridge;
  j["inner_tol"] = c.inner_tol;
  j["max_inner"] = c.max_inner;
  j["prune_threshold"] = c.prune_threshold;
  j["outer_tol"] = c.outer_tol;
  return j;
}

inline SolverConfig config_from_json(const json& j) {
  SolverConfig c;
  try {
    c.m = j.value("m", c.m);
    c.s_max = j.value("s_max", c.s_max);
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    c.lambda_L = j.value("lambda_L", c.lambda_L);
    c.mu = j.value("mu", c.mu);
    c.adaptive_mu = j.value("adaptive_mu", c.adaptive_mu);
    c.t_inner = j.value("t_inner", c.t_inner);
    if (j.contains("t_outer") && !j["t_outer"].is_null()) c.t_outer = j["t_outer"].get<int>();
    c.eps_primal = j.value("eps_primal", c.eps_primal);
    c.seed = j.value("seed", c.seed);
    c.ridge = j.value("ridge", c.ridge);
    c.dictionary_ridge = j.value("dictionary_ridge", c.dictionary_ridge);
    c.inner_tol = j.value("inner_tol", c.inner_tol);
    c.max_inner = j.value("max_inner", c.max_inner);
    c.prune_threshold = j.value("prune_threshold", c.prune_threshold);
    c.outer_tol = j.value("outer_tol", c.outer_tol);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("config: ") + e.what());
  }
  return c;
}

inline std::string trace_to_csv(const FitResult& r) {
  std::string out = "iter,cost,primal_residual\n";
  for (std::size_t t = 0; t < r.cost_trace.size(); ++t) {
    out += std::to_string(t + 1);
    out += ',';
    out += format_double(r.cost_trace[t]);
    out += ',';
    if (t < r.primal_residual_trace.size()) out += format_double(r.primal_residual_trace[t]);
    out += '\n';
  }
  return out;
}

/// Writes W.csv, A.csv, labels.txt, trace.csv and config.json into dir.
/// `extra` is merged into config.json (method name, kernel parameters).
inline void write_fit(const fs::path& dir, const FitResult& r, const SolverConfig& cfg,
                      const json& extra = json::object()) {
  fs::create_directories(dir);
  write_file_atomic(dir / "W.csv", sparse_to_csv(r.assignment));
  write_file_atomic(dir / "A.csv", matrix_to_csv(r.dictionary.a));
  write_file_atomic(dir / "labels.txt", labels_to_text(r.labels));
  write_file_atomic(dir / "trace.csv", trace_to_csv(r));
  json j = extra;
  j["solver"] = config_to_json(cfg);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["non_empty_clusters"] = r.non_empty_clusters();
  j["dissolved"] = r.dissolved;
  write_file_atomic(dir / "config.json", j.dump(2) + "\n");
}

struct LoadedFit {
  Eigen::MatrixXd w;
  Eigen::MatrixXd a;
  Labeling labels;
  json config;
};

inline LoadedFit read_fit(const fs::path& dir) {
  LoadedFit out;
  out.a = matrix_from_csv(read_file(dir / "A.csv"), (dir / "A.csv").string());
  out.labels = read_labels(dir / "labels.txt");
  out.w = sparse_from_csv(read_file(dir / "W.csv"), out.a.cols(),
                          static_cast<Eigen::Index>(out.labels.size()), (dir / "W.csv").string());
  try {
    out.config = json::parse(read_file(dir / "config.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("config.json: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metric reports

inline json report_to_json(const metrics::MetricReport& r) {
  json j;
  j["ri"] = r.ri ? json(*r.ri) : json(nullptr);
  j["ari"] = r.ari ? json(*r.ari) : json(nullptr);
  j["nari"] = r.nari ? json(*r.nari) : json(nullptr);
  j["silhouette"] = r.has_silhouette ? json(r.silhouette) : json(nullptr);
  j["single_cluster"] = r.single_cluster;
  json sizes = json::object(), sil = json::object();
  for (const auto& [l, c] : r.cluster_sizes) sizes[std::to_string(l)] = c;
  for (const auto& [l, s] : r.cluster_silhouette) sil[std::to_string(l)] = s;
  j["cluster_sizes"] = sizes;
  j["cluster_silhouette"] = sil;
  return j;
}

/// Header line plus one data row: ri,ari,nari,silhouette,clusters. Missing
/// values are left empty.
inline std::string report_to_csv(const metrics::MetricReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string out = "ri,ari,nari,silhouette,clusters\n";
  out += opt(r.ri) + ',' + opt(r.ari) + ',' + opt(r.nari) + ',' +
         (r.has_silhouette ? format_double(r.silhouette) : std::string()) + ',' +
         std::to_string(r.cluster_sizes.size()) + '\n';
  return out;
}

}  // namespace tractsparse::io
