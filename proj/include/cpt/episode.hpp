#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cpt/error.hpp"
#include "cpt/graph.hpp"
#include "cpt/rng.hpp"

namespace cpt {

struct EpisodeShape {
  std::int32_t n_way = 0;
  std::int32_t k_shot = 0;
  std::int32_t r_query = 0;  // queries per class

  void validate() const {
    if (n_way < 1 || k_shot < 1 || r_query < 1)
      throw config_error("episode shape: n_way, k_shot and r_query must be >= 1");
  }
};

// One N-way K-shot task. Nodes carry local labels in [0, n_way); local label
// j corresponds to class_list[j]. Support holds n_way*k_shot entries grouped
// by class, query holds n_way*r_query entries grouped the same way.
struct EpisodeTask {
  std::vector<ClassId> class_list;
  std::vector<std::pair<NodeId, std::int32_t>> support;
  std::vector<std::pair<NodeId, std::int32_t>> query;
};

// Nodes of each labeled class, ascending by node id.
using LabelIndex = std::unordered_map<ClassId, std::vector<NodeId>>;

inline LabelIndex build_label_index(const Graph& g) {
  LabelIndex index;
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const ClassId c = g.labels()[static_cast<std::size_t>(i)];
    if (c != kUnlabeled) index[c].push_back(i);
  }
  return index;
}

// Draw a task: n_way distinct classes from the pool, then per class
// k_shot + r_query distinct labeled nodes, the first k_shot as support.
// All randomness comes from rng, so equal seeds give equal tasks.
inline EpisodeTask sample_task(const LabelIndex& index,
                               const std::vector<ClassId>& class_pool,
                               const EpisodeShape& shape, Rng& rng) {
  shape.validate();
  if (class_pool.size() < static_cast<std::size_t>(shape.n_way))
    throw config_error("sample_task: pool has " +
                       std::to_string(class_pool.size()) +
                       " classes, need n_way = " + std::to_string(shape.n_way));
  EpisodeTask task;
  task.class_list = rng.sample_without_replacement(
      class_pool, static_cast<std::size_t>(shape.n_way));
  const std::size_t need =
      static_cast<std::size_t>(shape.k_shot) + static_cast<std::size_t>(shape.r_query);
  for (std::int32_t j = 0; j < shape.n_way; ++j) {
    const ClassId c = task.class_list[static_cast<std::size_t>(j)];
    const auto it = index.find(c);
    const std::size_t have = it == index.end() ? 0 : it->second.size();
    if (have < need)
      throw data_error("sample_task: class " + std::to_string(c) + " has " +
                       std::to_string(have) + " labeled nodes, need " +
                       std::to_string(need));
    std::vector<NodeId> picked = rng.sample_without_replacement(it->second, need);
    for (std::size_t i = 0; i < static_cast<std::size_t>(shape.k_shot); ++i)
      task.support.emplace_back(picked[i], j);
    for (std::size_t i = static_cast<std::size_t>(shape.k_shot); i < need; ++i)
      task.query.emplace_back(picked[i], j);
  }
  return task;
}

inline EpisodeTask sample_task(const Graph& g,
                               const std::vector<ClassId>& class_pool,
                               const EpisodeShape& shape, Rng& rng) {
  const LabelIndex index = build_label_index(g);
  return sample_task(index, class_pool, shape, rng);
}

}  // namespace cpt
