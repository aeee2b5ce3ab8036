#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cpt/error.hpp"
#include "cpt/graph.hpp"
#include "cpt/rng.hpp"

namespace cpt {

static_assert(std::endian::native == std::endian::little,
              "binary file formats are little-endian; big-endian hosts are unsupported");

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& is, const std::string& path) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw io_error(path + ": truncated header");
  return v;
}

inline long long parse_int(std::string_view s, const std::string& path,
                           std::size_t line_no) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw io_error(path + ":" + std::to_string(line_no) +
                   ": expected a base-10 integer, got '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

// Edge list: one edge per line as "<u>\t<v>", '#' lines are comments.
// Returned edges are raw (not canonicalized); the caller decides policy.
inline std::vector<Edge> read_edge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error(path + ": cannot open");
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw io_error(path + ":" + std::to_string(line_no) +
                     ": expected two ids separated by a tab");
    const long long u = detail::parse_int({line.data(), tab}, path, line_no);
    const long long v = detail::parse_int(
        {line.data() + tab + 1, line.size() - tab - 1}, path, line_no);
    edges.push_back(Edge{static_cast<NodeId>(u), static_cast<NodeId>(v)});
  }
  return edges;
}

inline void write_edge_file(const std::string& path, const std::vector<Edge>& edges) {
  std::ofstream out(path);
  if (!out) throw io_error(path + ": cannot open for writing");
  for (const Edge& e : edges) out << e.u << '\t' << e.v << '\n';
  if (!out) throw io_error(path + ": write failed");
}

// Feature file: u64 num_nodes, u64 feature_dim, then row-major float32.
inline MatrixF read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path + ": cannot open");
  const std::uint64_t n = detail::read_u64(in, path);
  const std::uint64_t d = detail::read_u64(in, path);
  MatrixF x(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  const std::streamsize bytes =
      static_cast<std::streamsize>(x.size() * sizeof(float));
  if (bytes > 0 && !in.read(reinterpret_cast<char*>(x.data().data()), bytes))
    throw io_error(path + ": truncated feature payload");
  char extra;
  if (in.read(&extra, 1))
    throw io_error(path + ": trailing bytes after feature payload");
  return x;
}

inline void write_feature_file(const std::string& path, const MatrixF& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(path + ": cannot open for writing");
  detail::write_u64(out, x.rows());
  detail::write_u64(out, x.cols());
  out.write(reinterpret_cast<const char*>(x.data().data()),
            static_cast<std::streamsize>(x.size() * sizeof(float)));
  if (!out) throw io_error(path + ": write failed");
}

// Label file: one class id per line in node order, -1 marks unlabeled.
inline std::vector<ClassId> read_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error(path + ": cannot open");
  std::vector<ClassId> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    labels.push_back(
        static_cast<ClassId>(detail::parse_int(line, path, line_no)));
  }
  return labels;
}

inline void write_label_file(const std::string& path,
                             const std::vector<ClassId>& labels) {
  std::ofstream out(path);
  if (!out) throw io_error(path + ": cannot open for writing");
  for (ClassId c : labels) out << c << '\n';
  if (!out) throw io_error(path + ": write failed");
}

struct LoadStats {
  std::size_t dropped_edges = 0;  // self-loops and duplicates removed
};

// Load a graph from the three on-disk pieces. Node count comes from the
// feature header; label count and edge endpoints must be consistent with it.
// Self-loops and duplicate edges are tolerated and dropped, reported through
// stats so callers can warn.
inline Graph load_graph(const std::string& edge_path,
                        const std::string& feature_path,
                        const std::string& label_path,
                        LoadStats* stats = nullptr) {
  MatrixF features = read_feature_file(feature_path);
  std::vector<ClassId> labels = read_label_file(label_path);
  if (labels.size() != features.rows())
    throw io_error(label_path + ": " + std::to_string(labels.size()) +
                   " labels for " + std::to_string(features.rows()) + " nodes");
  const std::vector<Edge> raw = read_edge_file(edge_path);
  const NodeId n = static_cast<NodeId>(features.rows());
  for (const Edge& e : raw)
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n)
      throw io_error(edge_path + ": edge endpoint " +
                     std::to_string(e.u < 0 || e.u >= n ? e.u : e.v) +
                     " out of range for " + std::to_string(n) + " nodes");
  auto [edges, dropped] = canonicalize_edges(raw);
  if (stats) stats->dropped_edges = dropped;
  return Graph::create(n, std::move(edges), std::move(features), std::move(labels));
}

inline void save_graph(const Graph& g, const std::string& edge_path,
                       const std::string& feature_path,
                       const std::string& label_path) {
  write_edge_file(edge_path, g.edges());
  write_feature_file(feature_path, g.features());
  write_label_file(label_path, g.labels());
}

// Planted-partition benchmark. Node i belongs to block i / nodes_per_class;
// same-block pairs are adjacent with probability intra_p, cross-block pairs
// with inter_p. Features are a noisy one-hot block signature.
struct SbmSpec {
  std::int32_t num_classes = 0;
  std::int32_t nodes_per_class = 0;
  double intra_p = 0.0;
  double inter_p = 0.0;
  std::int64_t feature_dim = 0;
  double noise = 0.0;  // stddev of additive gaussian feature noise
  std::uint64_t seed = 0;
};

inline Graph generate_sbm(const SbmSpec& spec) {
  if (spec.num_classes < 1) throw config_error("sbm: num_classes must be >= 1");
  if (spec.nodes_per_class < 1)
    throw config_error("sbm: nodes_per_class must be >= 1");
  if (!(spec.inter_p >= 0.0 && spec.inter_p < spec.intra_p && spec.intra_p <= 1.0))
    throw config_error("sbm: need 0 <= inter_p < intra_p <= 1");
  if (spec.feature_dim < 1) throw config_error("sbm: feature_dim must be >= 1");
  if (!(spec.noise >= 0.0)) throw config_error("sbm: noise must be >= 0");

  const std::int64_t n =
      static_cast<std::int64_t>(spec.num_classes) * spec.nodes_per_class;
  const auto block = [&](std::int64_t i) {
    return static_cast<ClassId>(i / spec.nodes_per_class);
  };

  // Separate streams: topology is unaffected by feature parameters.
  Rng edge_rng(substream_seed(spec.seed, "sbm-edges"));
  std::vector<Edge> edges;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double p = block(i) == block(j) ? spec.intra_p : spec.inter_p;
      if (edge_rng.uniform_real() < p)
        edges.push_back(Edge{static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  }

  Rng feat_rng(substream_seed(spec.seed, "sbm-features"));
  MatrixF x(static_cast<std::size_t>(n), static_cast<std::size_t>(spec.feature_dim));
  for (std::int64_t i = 0; i < n; ++i) {
    float* xi = x.row(static_cast<std::size_t>(i));
    const std::int64_t hot = block(i) % spec.feature_dim;
    for (std::int64_t d = 0; d < spec.feature_dim; ++d) {
      double v = (d == hot) ? 1.0 : 0.0;
      if (spec.noise > 0.0) v += spec.noise * feat_rng.normal();
      xi[d] = static_cast<float>(v);
    }
  }

  std::vector<ClassId> labels(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    labels[static_cast<std::size_t>(i)] = block(i);

  return Graph::create(static_cast<NodeId>(n), std::move(edges), std::move(x),
                       std::move(labels));
}

// Partition the distinct observed labels into disjoint base / validation /
// novel pools by a seeded shuffle. The three counts must cover every class.
inline ClassSplit split_classes(const Graph& g, std::int32_t num_base,
                                std::int32_t num_validation,
                                std::int32_t num_novel, Rng& rng) {
  if (num_base < 0 || num_validation < 0 || num_novel < 0)
    throw config_error("split: negative class count");
  std::vector<ClassId> classes(g.labels());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (!classes.empty() && classes.front() == kUnlabeled)
    classes.erase(classes.begin());
  const std::int64_t want = static_cast<std::int64_t>(num_base) +
                            num_validation + num_novel;
  if (want != static_cast<std::int64_t>(classes.size()))
    throw config_error("split: counts sum to " + std::to_string(want) +
                       " but the graph has " + std::to_string(classes.size()) +
                       " labeled classes");
  rng.shuffle(classes);
  ClassSplit s;
  s.base.assign(classes.begin(), classes.begin() + num_base);
  s.validation.assign(classes.begin() + num_base,
                      classes.begin() + num_base + num_validation);
  s.novel.assign(classes.begin() + num_base + num_validation, classes.end());
  std::sort(s.base.begin(), s.base.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.novel.begin(), s.novel.end());
  return s;
}

}  // namespace cpt
