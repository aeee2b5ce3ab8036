#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cpt/learner.hpp"
#include "cpt/trainer.hpp"

namespace cpt {

struct EvalReport {
  double mean_accuracy = 0.0;
  double std_dev = 0.0;  // sample std over tasks, 0 for a single task
  std::int64_t num_tasks = 0;
  EpisodeShape shape;
  std::uint64_t seed = 0;
  std::vector<double> per_task;  // accuracy per episode, sampling order
};

namespace detail {

inline EvalReport summarize(std::vector<double> per_task) {
  EvalReport r;
  r.num_tasks = static_cast<std::int64_t>(per_task.size());
  double sum = 0.0;
  for (double a : per_task) sum += a;
  r.mean_accuracy = sum / static_cast<double>(per_task.size());
  if (per_task.size() > 1) {
    double ss = 0.0;
    for (double a : per_task) {
      const double d = a - r.mean_accuracy;
      ss += d * d;
    }
    r.std_dev = std::sqrt(ss / static_cast<double>(per_task.size() - 1));
  }
  r.per_task = std::move(per_task);
  return r;
}

}  // namespace detail

// Frozen-parameter evaluation: num_tasks episodes drawn from the pool on the
// clean graph. Task i comes from its own substream of the seed, so the stream
// of evaluation tasks is a pure function of (graph labels, pool, shape, seed)
// and in particular identical for every model being compared. Prototypical
// evaluation encodes once and reuses the embeddings; the first-order learner
// re-adapts on each support set.
inline EvalReport meta_test(const EncoderParams& params, const Graph& g,
                            const std::vector<ClassId>& pool,
                            const EpisodeShape& shape, std::int64_t num_tasks,
                            std::uint64_t seed, const MetaConfig& meta) {
  if (num_tasks < 1) throw config_error("meta_test: num_tasks must be >= 1");
  const NormalizedAdjacency adj = normalize_adjacency(g);
  const LabelIndex index = build_label_index(g);
  std::vector<double> per_task;
  per_task.reserve(static_cast<std::size_t>(num_tasks));
  Matrix emb;
  if (meta.learner == LearnerKind::prototypical)
    emb = encode(adj, g.features(), params);
  for (std::int64_t i = 0; i < num_tasks; ++i) {
    Rng rng(substream_seed(seed, "eval-task", static_cast<std::uint64_t>(i)));
    const EpisodeTask task = sample_task(index, pool, shape, rng);
    if (meta.learner == LearnerKind::prototypical) {
      per_task.push_back(proto_episode_loss(emb, task, meta.loss_weight).accuracy);
    } else {
      per_task.push_back(
          run_episode(adj, g.features(), params, task, meta, false).accuracy);
    }
  }
  EvalReport r = detail::summarize(std::move(per_task));
  r.shape = shape;
  r.seed = seed;
  return r;
}

struct DegreeBin {
  std::int32_t lo = 0;          // inclusive lower degree bound
  std::int32_t hi = -1;         // exclusive upper bound, -1 = open-ended
  std::int64_t correct = 0;
  std::int64_t total = 0;       // 0 marks a bin with no queries
  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

// Per-degree-bin query accuracy over the same episode stream meta_test uses.
// bin_bounds are increasing lower boundaries; the last bin is open-ended.
inline std::vector<DegreeBin> degree_binned_accuracy(
    const EncoderParams& params, const Graph& g, const std::vector<ClassId>& pool,
    const EpisodeShape& shape, std::int64_t num_tasks,
    const std::vector<std::int32_t>& bin_bounds, std::uint64_t seed,
    const MetaConfig& meta) {
  if (num_tasks < 1) throw config_error("degree_binned_accuracy: num_tasks must be >= 1");
  if (bin_bounds.empty())
    throw config_error("degree_binned_accuracy: need at least one bin bound");
  for (std::size_t i = 0; i + 1 < bin_bounds.size(); ++i)
    if (bin_bounds[i] >= bin_bounds[i + 1])
      throw config_error("degree_binned_accuracy: bin bounds must be increasing");
  if (bin_bounds.front() < 0)
    throw config_error("degree_binned_accuracy: bin bounds must be >= 0");

  std::vector<DegreeBin> bins(bin_bounds.size());
  for (std::size_t b = 0; b < bin_bounds.size(); ++b) {
    bins[b].lo = bin_bounds[b];
    bins[b].hi = b + 1 < bin_bounds.size() ? bin_bounds[b + 1] : -1;
  }
  const auto bin_of = [&](std::int32_t deg) {
    std::size_t b = 0;
    while (b + 1 < bins.size() && deg >= bins[b + 1].lo) ++b;
    return b;
  };

  const NormalizedAdjacency adj = normalize_adjacency(g);
  const LabelIndex index = build_label_index(g);
  Matrix emb;
  if (meta.learner == LearnerKind::prototypical)
    emb = encode(adj, g.features(), params);
  for (std::int64_t i = 0; i < num_tasks; ++i) {
    Rng rng(substream_seed(seed, "eval-task", static_cast<std::uint64_t>(i)));
    const EpisodeTask task = sample_task(index, pool, shape, rng);
    std::vector<std::int32_t> predicted;
    if (meta.learner == LearnerKind::prototypical)
      predicted = proto_episode_loss(emb, task, meta.loss_weight).predicted;
    else
      predicted = run_episode(adj, g.features(), params, task, meta, false).predicted;
    for (std::size_t q = 0; q < task.query.size(); ++q) {
      const auto [node, label] = task.query[q];
      DegreeBin& bin = bins[bin_of(degree(g, node))];
      ++bin.total;
      if (predicted[q] == label) ++bin.correct;
    }
  }
  return bins;
}

}  // namespace cpt
