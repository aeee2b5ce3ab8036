#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cpt/encoder.hpp"
#include "cpt/episode.hpp"
#include "cpt/error.hpp"
#include "cpt/matrix.hpp"

namespace cpt {

enum class LearnerKind { prototypical, fomaml };

struct MetaConfig {
  LearnerKind learner = LearnerKind::prototypical;
  double alpha1 = 0.01;      // inner (adaptation) step size
  double alpha2 = 0.01;      // outer (meta) step size
  std::int32_t inner_steps = 1;
  double loss_weight = 1.0;  // scales the episode loss and its gradients
};

// Row-wise softmax with max subtraction. Rejects non-finite logits.
inline Matrix softmax_probs(const Matrix& logits) {
  Matrix z(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* li = logits.row(i);
    double* zi = z.row(i);
    double mx = li[0];
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      if (!std::isfinite(li[j]))
        throw numeric_error("softmax: non-finite logit at row " + std::to_string(i));
      if (li[j] > mx) mx = li[j];
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      zi[j] = std::exp(li[j] - mx);
      sum += zi[j];
    }
    for (std::size_t j = 0; j < logits.cols(); ++j) zi[j] /= sum;
  }
  return z;
}

// Summed negative log-likelihood over the rows plus its gradient with respect
// to the logits, which for softmax is probs - onehot(labels).
inline std::pair<double, Matrix> cross_entropy(const Matrix& probs,
                                               const std::vector<std::int32_t>& labels) {
  if (labels.size() != probs.rows())
    throw config_error("cross_entropy: " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(probs.rows()) + " rows");
  double loss = 0.0;
  Matrix grad = probs;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const std::int32_t y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols())
      throw config_error("cross_entropy: label " + std::to_string(y) +
                         " out of range for " + std::to_string(probs.cols()) +
                         " classes");
    loss -= std::log(probs(i, static_cast<std::size_t>(y)));
    grad(i, static_cast<std::size_t>(y)) -= 1.0;
  }
  return {loss, std::move(grad)};
}

// Class means of the support embeddings, one row per local label.
inline Matrix compute_prototypes(const Matrix& embeddings, const EpisodeTask& task) {
  const std::size_t n_way = task.class_list.size();
  Matrix protos(n_way, embeddings.cols());
  std::vector<std::int64_t> counts(n_way, 0);
  for (const auto& [node, label] : task.support) {
    const double* e = embeddings.row(static_cast<std::size_t>(node));
    double* p = protos.row(static_cast<std::size_t>(label));
    for (std::size_t d = 0; d < embeddings.cols(); ++d) p[d] += e[d];
    ++counts[static_cast<std::size_t>(label)];
  }
  for (std::size_t j = 0; j < n_way; ++j) {
    if (counts[j] == 0)
      throw std::logic_error("compute_prototypes: class with empty support");
    double* p = protos.row(j);
    for (std::size_t d = 0; d < embeddings.cols(); ++d)
      p[d] /= static_cast<double>(counts[j]);
  }
  return protos;
}

struct EpisodeLoss {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::int32_t> predicted;  // local label per query row
  Matrix grad_embeddings;               // same shape as the embeddings
};

// Prototypical episode: logits are negative squared distances to the class
// prototypes, the loss is the summed cross-entropy over the queries scaled by
// loss_weight, and grad_embeddings accumulates both the query path and the
// prototype (support mean) path. Prediction ties resolve to the lowest local
// label.
inline EpisodeLoss proto_episode_loss(const Matrix& embeddings,
                                      const EpisodeTask& task,
                                      double loss_weight = 1.0) {
  const std::size_t n_way = task.class_list.size();
  const std::size_t dim = embeddings.cols();
  if (n_way == 0 || task.support.empty() || task.query.empty())
    throw config_error("proto_episode_loss: empty task");
  for (const auto& list : {task.support, task.query})
    for (const auto& [node, label] : list) {
      if (node < 0 || static_cast<std::size_t>(node) >= embeddings.rows())
        throw config_error("proto_episode_loss: node " + std::to_string(node) +
                           " outside the embedding matrix");
      if (label < 0 || static_cast<std::size_t>(label) >= n_way)
        throw config_error("proto_episode_loss: local label out of range");
    }

  const Matrix protos = compute_prototypes(embeddings, task);
  std::vector<std::int64_t> counts(n_way, 0);
  for (const auto& [node, label] : task.support)
    ++counts[static_cast<std::size_t>(label)];

  Matrix logits(task.query.size(), n_way);
  for (std::size_t q = 0; q < task.query.size(); ++q) {
    const double* e = embeddings.row(static_cast<std::size_t>(task.query[q].first));
    for (std::size_t j = 0; j < n_way; ++j) {
      const double* p = protos.row(j);
      double dist = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = e[d] - p[d];
        dist += diff * diff;
      }
      logits(q, j) = -dist;
    }
  }

  EpisodeLoss out;
  out.predicted.resize(task.query.size());
  std::int64_t correct = 0;
  std::vector<std::int32_t> targets(task.query.size());
  for (std::size_t q = 0; q < task.query.size(); ++q) {
    targets[q] = task.query[q].second;
    std::size_t best = 0;
    for (std::size_t j = 1; j < n_way; ++j)
      if (logits(q, j) > logits(q, best)) best = j;  // ties keep the lowest j
    out.predicted[q] = static_cast<std::int32_t>(best);
    if (out.predicted[q] == targets[q]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(task.query.size());

  auto [loss, grad_logits] = cross_entropy(softmax_probs(logits), targets);
  out.loss = loss_weight * loss;
  scale(grad_logits, loss_weight);

  out.grad_embeddings = Matrix(embeddings.rows(), dim);
  Matrix grad_protos(n_way, dim);
  for (std::size_t q = 0; q < task.query.size(); ++q) {
    const std::size_t node = static_cast<std::size_t>(task.query[q].first);
    const double* e = embeddings.row(node);
    double* ge = out.grad_embeddings.row(node);
    for (std::size_t j = 0; j < n_way; ++j) {
      const double g = grad_logits(q, j);
      if (g == 0.0) continue;
      const double* p = protos.row(j);
      double* gp = grad_protos.row(j);
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff2 = 2.0 * (e[d] - p[d]);
        ge[d] -= g * diff2;   // d logit / d e_q = -2 (e_q - p_j)
        gp[d] += g * diff2;   // d logit / d p_j = +2 (e_q - p_j)
      }
    }
  }
  for (const auto& [node, label] : task.support) {
    const std::size_t j = static_cast<std::size_t>(label);
    const double inv = 1.0 / static_cast<double>(counts[j]);
    const double* gp = grad_protos.row(j);
    double* ge = out.grad_embeddings.row(static_cast<std::size_t>(node));
    for (std::size_t d = 0; d < dim; ++d) ge[d] += inv * gp[d];
  }
  return out;
}

// theta' = theta - alpha1 * grads. Pure; the caller keeps the original.
inline EncoderParams inner_step(const EncoderParams& params,
                                const EncoderGrads& grads, double alpha1) {
  EncoderParams out = params;
  add_scaled(out.w1, grads.w1, -alpha1);
  add_scaled(out.w2, grads.w2, -alpha1);
  return out;
}

// theta <- theta - alpha2 * sum(task grads). First-order meta update: the
// summands are gradients taken at the adapted parameters, used as-is.
inline EncoderParams outer_step(const EncoderParams& params,
                                const std::vector<EncoderGrads>& task_grads,
                                double alpha2) {
  if (task_grads.empty())
    throw config_error("outer_step: empty task gradient list");
  EncoderParams out = params;
  for (const EncoderGrads& g : task_grads) {
    add_scaled(out.w1, g.w1, -alpha2);
    add_scaled(out.w2, g.w2, -alpha2);
  }
  return out;
}

}  // namespace cpt
