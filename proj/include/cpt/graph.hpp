#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cpt/error.hpp"
#include "cpt/matrix.hpp"
#include "cpt/rng.hpp"

namespace cpt {

using NodeId = std::int32_t;
using ClassId = std::int32_t;

inline constexpr ClassId kUnlabeled = -1;

// Undirected edge stored canonically with u < v.
struct Edge {
  NodeId u;
  NodeId v;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend bool operator<(const Edge& a, const Edge& b) {
    return a.u < b.u || (a.u == b.u && a.v < b.v);
  }
};

// Immutable undirected graph with per-node float features and integer class
// labels (kUnlabeled marks unlabeled nodes). Features and labels are shared
// between graphs that differ only in their edge set, so edge-dropped copies
// are cheap even when the feature matrix is large.
class Graph {
 public:
  static Graph create(NodeId num_nodes, std::vector<Edge> edges,
                      MatrixF features, std::vector<ClassId> labels) {
    validate_edges(num_nodes, edges);
    if (features.rows() != static_cast<std::size_t>(num_nodes))
      throw config_error("graph: feature row count " +
                         std::to_string(features.rows()) +
                         " != num_nodes " + std::to_string(num_nodes));
    if (labels.size() != static_cast<std::size_t>(num_nodes))
      throw config_error("graph: label count " + std::to_string(labels.size()) +
                         " != num_nodes " + std::to_string(num_nodes));
    for (ClassId c : labels)
      if (c < kUnlabeled)
        throw config_error("graph: label " + std::to_string(c) +
                           " below the unlabeled sentinel");
    Graph g;
    g.num_nodes_ = num_nodes;
    g.edges_ = std::move(edges);
    g.features_ = std::make_shared<const MatrixF>(std::move(features));
    g.labels_ = std::make_shared<const std::vector<ClassId>>(std::move(labels));
    g.compute_degrees();
    return g;
  }

  NodeId num_nodes() const { return num_nodes_; }
  std::int64_t num_edges() const { return static_cast<std::int64_t>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const MatrixF& features() const { return *features_; }
  std::int64_t feature_dim() const {
    return static_cast<std::int64_t>(features_->cols());
  }
  const std::vector<ClassId>& labels() const { return *labels_; }
  const std::vector<std::int32_t>& degrees() const { return degrees_; }

  // Same nodes/features/labels, different edge set. Shares feature storage.
  Graph with_edges(std::vector<Edge> edges) const {
    validate_edges(num_nodes_, edges);
    Graph g;
    g.num_nodes_ = num_nodes_;
    g.edges_ = std::move(edges);
    g.features_ = features_;
    g.labels_ = labels_;
    g.compute_degrees();
    return g;
  }

 private:
  Graph() = default;

  static void validate_edges(NodeId num_nodes, const std::vector<Edge>& edges) {
    if (num_nodes < 0) throw config_error("graph: negative node count");
    for (const Edge& e : edges) {
      if (e.u < 0 || e.v < 0 || e.u >= num_nodes || e.v >= num_nodes)
        throw config_error("graph: edge endpoint out of range: " +
                           std::to_string(e.u) + "\t" + std::to_string(e.v));
      if (e.u == e.v)
        throw config_error("graph: self-loop at node " + std::to_string(e.u));
      if (e.u > e.v)
        throw config_error("graph: edge not in canonical (min,max) order: " +
                           std::to_string(e.u) + "\t" + std::to_string(e.v));
    }
    std::vector<Edge> sorted = edges;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw config_error("graph: duplicate edge in edge list");
  }

  void compute_degrees() {
    degrees_.assign(static_cast<std::size_t>(num_nodes_), 0);
    for (const Edge& e : edges_) {
      ++degrees_[static_cast<std::size_t>(e.u)];
      ++degrees_[static_cast<std::size_t>(e.v)];
    }
  }

  NodeId num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::shared_ptr<const MatrixF> features_;
  std::shared_ptr<const std::vector<ClassId>> labels_;
  std::vector<std::int32_t> degrees_;
};

inline std::int32_t degree(const Graph& g, NodeId node) {
  if (node < 0 || node >= g.num_nodes())
    throw config_error("degree: node id " + std::to_string(node) +
                       " out of range");
  return g.degrees()[static_cast<std::size_t>(node)];
}

// Canonicalize an arbitrary edge list: orient each edge as (min,max), drop
// self-loops and duplicates. Returns the cleaned list plus how many entries
// were dropped. Used by the lenient file-loading path; Graph::create itself
// rejects non-canonical input.
inline std::pair<std::vector<Edge>, std::size_t> canonicalize_edges(
    const std::vector<Edge>& raw) {
  std::vector<Edge> out;
  out.reserve(raw.size());
  std::size_t dropped = 0;
  for (const Edge& e : raw) {
    if (e.u == e.v) {
      ++dropped;
      continue;
    }
    out.push_back(e.u < e.v ? e : Edge{e.v, e.u});
  }
  std::sort(out.begin(), out.end());
  const auto last = std::unique(out.begin(), out.end());
  dropped += static_cast<std::size_t>(out.end() - last);
  out.erase(last, out.end());
  return {std::move(out), dropped};
}

// Symmetrically normalized adjacency with self-loops, in CSR form. Entry
// (i,j) is 1/sqrt((deg(i)+1)(deg(j)+1)) for every edge and for the diagonal.
struct NormalizedAdjacency {
  std::int64_t n = 0;
  std::vector<std::int64_t> row_ptr;  // n+1 entries
  std::vector<NodeId> col;            // sorted within each row
  std::vector<double> val;

  std::int64_t num_nodes() const { return n; }

  // O(log deg) lookup, zero when the entry is absent. Test convenience.
  double entry(NodeId i, NodeId j) const {
    const auto lo = col.begin() + row_ptr[static_cast<std::size_t>(i)];
    const auto hi = col.begin() + row_ptr[static_cast<std::size_t>(i) + 1];
    const auto it = std::lower_bound(lo, hi, j);
    if (it == hi || *it != j) return 0.0;
    return val[static_cast<std::size_t>(it - col.begin())];
  }
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) {
  const std::size_t n = static_cast<std::size_t>(g.num_nodes());
  NormalizedAdjacency adj;
  adj.n = g.num_nodes();
  adj.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    adj.row_ptr[i + 1] = adj.row_ptr[i] + g.degrees()[i] + 1;  // +1 self-loop
  adj.col.resize(static_cast<std::size_t>(adj.row_ptr[n]));
  std::vector<std::int64_t> cursor(adj.row_ptr.begin(), adj.row_ptr.end() - 1);
  for (std::size_t i = 0; i < n; ++i)
    adj.col[static_cast<std::size_t>(cursor[i]++)] = static_cast<NodeId>(i);
  for (const Edge& e : g.edges()) {
    adj.col[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.u)]++)] = e.v;
    adj.col[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.v)]++)] = e.u;
  }
  for (std::size_t i = 0; i < n; ++i)
    std::sort(adj.col.begin() + adj.row_ptr[i], adj.col.begin() + adj.row_ptr[i + 1]);
  adj.val.resize(adj.col.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double di = static_cast<double>(g.degrees()[i] + 1);
    for (std::int64_t k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k) {
      const std::size_t j = static_cast<std::size_t>(adj.col[static_cast<std::size_t>(k)]);
      const double dj = static_cast<double>(g.degrees()[j] + 1);
      adj.val[static_cast<std::size_t>(k)] = 1.0 / std::sqrt(di * dj);
    }
  }
  return adj;
}

// Y = A * X with X promoted to double entry-wise. Fixed row-major traversal.
template <typename TX>
inline Matrix spmm(const NormalizedAdjacency& a, const Mat<TX>& x) {
  if (x.rows() != static_cast<std::size_t>(a.n))
    throw config_error("spmm: operand has " + std::to_string(x.rows()) +
                       " rows, adjacency has " + std::to_string(a.n));
  Matrix y(static_cast<std::size_t>(a.n), x.cols());
  for (std::size_t i = 0; i < static_cast<std::size_t>(a.n); ++i) {
    double* yi = y.row(i);
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const double w = a.val[static_cast<std::size_t>(k)];
      const TX* xj = x.row(static_cast<std::size_t>(a.col[static_cast<std::size_t>(k)]));
      for (std::size_t c = 0; c < x.cols(); ++c)
        yi[c] += w * static_cast<double>(xj[c]);
    }
  }
  return y;
}

// Remove round(beta * |E|) distinct edges uniformly at random. Pure: the
// input graph is untouched, survivors keep their relative order, and equal
// (beta, rng state) always selects the same edges.
inline Graph drop_edges(const Graph& g, double beta, Rng& rng) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw config_error("drop_edges: beta " + std::to_string(beta) +
                       " outside [0,1]");
  const std::size_t m = static_cast<std::size_t>(g.num_edges());
  const std::size_t k =
      static_cast<std::size_t>(std::llround(beta * static_cast<double>(m)));
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  idx = rng.sample_without_replacement(std::move(idx), k);
  std::vector<char> dropped(m, 0);
  for (std::size_t i : idx) dropped[i] = 1;
  std::vector<Edge> kept;
  kept.reserve(m - k);
  for (std::size_t i = 0; i < m; ++i)
    if (!dropped[i]) kept.push_back(g.edges()[i]);
  return g.with_edges(std::move(kept));
}

// Disjoint class pools for meta-train / meta-validation / meta-test.
struct ClassSplit {
  std::vector<ClassId> base;
  std::vector<ClassId> validation;
  std::vector<ClassId> novel;
};

}  // namespace cpt
