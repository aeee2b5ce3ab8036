#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "cpt/encoder.hpp"
#include "cpt/episode.hpp"
#include "cpt/error.hpp"
#include "cpt/meta.hpp"

namespace cpt {

using LossAndGradFn =
    std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>;

// Central-difference check of an analytic gradient. Returns the largest
// relative error max_i |analytic_i - numeric_i| / max(1, |analytic_i|,
// |numeric_i|). Throws numeric_error if any probed loss is non-finite.
inline double grad_check(const LossAndGradFn& f, std::vector<double> at,
                         double epsilon) {
  if (!(epsilon > 0.0)) throw config_error("grad_check: epsilon must be > 0");
  const auto [loss0, analytic] = f(at);
  if (!std::isfinite(loss0)) throw numeric_error("grad_check: non-finite loss");
  if (analytic.size() != at.size())
    throw config_error("grad_check: gradient size does not match parameter size");
  double worst = 0.0;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double saved = at[i];
    at[i] = saved + epsilon;
    const double up = f(at).first;
    at[i] = saved - epsilon;
    const double down = f(at).first;
    at[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw numeric_error("grad_check: non-finite loss at perturbed point");
    const double numeric = (up - down) / (2.0 * epsilon);
    const double err = std::fabs(analytic[i] - numeric) /
                       std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric)});
    if (err > worst) worst = err;
  }
  return worst;
}

inline std::vector<double> flatten_params(const EncoderParams& p) {
  std::vector<double> flat;
  flat.reserve(p.w1.size() + p.w2.size());
  flat.insert(flat.end(), p.w1.data().begin(), p.w1.data().end());
  flat.insert(flat.end(), p.w2.data().begin(), p.w2.data().end());
  return flat;
}

inline EncoderParams unflatten_params(const std::vector<double>& flat,
                                      std::size_t feature_dim, std::size_t hidden_dim,
                                      std::size_t embed_dim) {
  if (flat.size() != feature_dim * hidden_dim + hidden_dim * embed_dim)
    throw config_error("unflatten_params: size mismatch");
  EncoderParams p;
  p.w1 = Matrix::from_data(
      feature_dim, hidden_dim,
      {flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(feature_dim * hidden_dim)});
  p.w2 = Matrix::from_data(
      hidden_dim, embed_dim,
      {flat.begin() + static_cast<std::ptrdiff_t>(feature_dim * hidden_dim), flat.end()});
  return p;
}

// One randomized end-to-end instance: a small random graph, a random episode,
// loss = prototypical episode loss of the encoder output as a function of the
// flattened weights.
struct GradTrialSetup {
  Graph graph;
  NormalizedAdjacency adj;
  EpisodeTask task;
  std::size_t feature_dim, hidden_dim, embed_dim;
  std::vector<double> flat0;
};

inline GradTrialSetup make_grad_trial(std::uint64_t seed) {
  Rng rng(seed);
  const NodeId n = static_cast<NodeId>(6 + rng.uniform_index(5));      // 6..10
  const std::size_t f = 3 + static_cast<std::size_t>(rng.uniform_index(6));  // 3..8
  const std::size_t h = 3 + static_cast<std::size_t>(rng.uniform_index(3));  // 3..5
  const std::size_t e = 2 + static_cast<std::size_t>(rng.uniform_index(3));  // 2..4

  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.uniform_real() < 0.4) edges.push_back(Edge{i, j});

  MatrixF x(static_cast<std::size_t>(n), f);
  for (float& v : x.data()) v = static_cast<float>(rng.normal());

  const std::int32_t n_way = 2;
  std::vector<ClassId> labels(static_cast<std::size_t>(n));
  for (NodeId i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % n_way;

  Graph graph = Graph::create(n, std::move(edges), std::move(x), std::move(labels));
  NormalizedAdjacency adj = normalize_adjacency(graph);
  const EpisodeShape shape{n_way, 1, 1};
  const std::vector<ClassId> pool{0, 1};
  EpisodeTask task = sample_task(graph, pool, shape, rng);
  std::vector<double> flat0 = flatten_params(
      init_params(static_cast<std::int64_t>(f), static_cast<std::int64_t>(h),
                  static_cast<std::int64_t>(e), rng));
  return GradTrialSetup{std::move(graph), std::move(adj), std::move(task),
                        f, h, e, std::move(flat0)};
}

// Worst relative error over `trials` randomized end-to-end gradient checks
// (encoder + prototypical head against central differences).
inline double encoder_grad_trials(std::int32_t trials, std::uint64_t seed,
                                  double epsilon = 1e-5) {
  if (trials < 1) throw config_error("encoder_grad_trials: trials must be >= 1");
  double worst = 0.0;
  for (std::int32_t trial = 0; trial < trials; ++trial) {
    const GradTrialSetup setup =
        make_grad_trial(substream_seed(seed, "grad-trial", static_cast<std::uint64_t>(trial)));
    const auto fn = [&](const std::vector<double>& flat) {
      const EncoderParams p = unflatten_params(flat, setup.feature_dim,
                                               setup.hidden_dim, setup.embed_dim);
      ForwardCache cache;
      const Matrix emb = encode(setup.adj, setup.graph.features(), p, &cache);
      const EpisodeLoss ep = proto_episode_loss(emb, setup.task);
      const EncoderGrads g = encode_backward(ep.grad_embeddings, cache, setup.adj,
                                             setup.graph.features(), p);
      return std::make_pair(ep.loss, flatten_params({g.w1, g.w2}));
    };
    const double err = grad_check(fn, setup.flat0, epsilon);
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace cpt
