#pragma once

#include <utility>
#include <vector>

#include "cpt/encoder.hpp"
#include "cpt/episode.hpp"
#include "cpt/meta.hpp"

namespace cpt {

namespace detail {

// Loss of the support set measured against its own prototypes. This is the
// objective the first-order learner descends during adaptation: prototypes
// and evaluation points both come from the support nodes.
inline EpisodeTask support_as_query(const EpisodeTask& task) {
  EpisodeTask t;
  t.class_list = task.class_list;
  t.support = task.support;
  t.query = task.support;
  return t;
}

}  // namespace detail

// Run inner_steps gradient steps on the support loss, starting from params.
// Each step re-encodes at the current parameters (first-order: no curvature
// terms are carried across steps).
inline EncoderParams fomaml_adapt(const NormalizedAdjacency& adj,
                                  const MatrixF& features,
                                  const EncoderParams& params,
                                  const EpisodeTask& task,
                                  const MetaConfig& meta) {
  const EpisodeTask support_task = detail::support_as_query(task);
  EncoderParams adapted = params;
  for (std::int32_t s = 0; s < meta.inner_steps; ++s) {
    ForwardCache cache;
    const Matrix emb = encode(adj, features, adapted, &cache);
    const EpisodeLoss sup = proto_episode_loss(emb, support_task, meta.loss_weight);
    const EncoderGrads g =
        encode_backward(sup.grad_embeddings, cache, adj, features, adapted);
    adapted = inner_step(adapted, g, meta.alpha1);
  }
  return adapted;
}

struct EpisodeOutcome {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::int32_t> predicted;  // local label per query entry
  EncoderGrads grads;                   // empty unless want_grads
};

// Evaluate (and optionally differentiate) one episode under the configured
// learner. Prototypical: loss at the shared parameters. First-order: adapt on
// the support first, then take the query loss and its gradients at the
// adapted parameters.
inline EpisodeOutcome run_episode(const NormalizedAdjacency& adj,
                                  const MatrixF& features,
                                  const EncoderParams& params,
                                  const EpisodeTask& task,
                                  const MetaConfig& meta, bool want_grads) {
  const EncoderParams* active = &params;
  EncoderParams adapted;
  if (meta.learner == LearnerKind::fomaml) {
    adapted = fomaml_adapt(adj, features, params, task, meta);
    active = &adapted;
  }
  ForwardCache cache;
  const Matrix emb = encode(adj, features, *active, want_grads ? &cache : nullptr);
  EpisodeLoss ep = proto_episode_loss(emb, task, meta.loss_weight);
  EpisodeOutcome out;
  out.loss = ep.loss;
  out.accuracy = ep.accuracy;
  out.predicted = std::move(ep.predicted);
  if (want_grads)
    out.grads = encode_backward(ep.grad_embeddings, cache, adj, features, *active);
  return out;
}

}  // namespace cpt
