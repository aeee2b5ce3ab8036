#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cpt/curriculum.hpp"
#include "cpt/data_io.hpp"
#include "cpt/episode.hpp"
#include "cpt/format.hpp"
#include "cpt/learner.hpp"

namespace cpt {

// Training regimes. cpt is the full two-stage run: plain episodic training
// first, then a second pass where edges are dropped at a ratio that ramps up
// with the competence schedule. The others are its ablations: no_ss skips the
// hardening stage entirely, no_fs trains under the ramp from the start with
// no plain stage, reverse runs the ramp backwards (hardest first) and the
// plain stage after.
enum class TrainVariant { cpt, no_ss, no_fs, reverse };

inline const char* to_string(TrainVariant v) {
  switch (v) {
    case TrainVariant::cpt: return "cpt";
    case TrainVariant::no_ss: return "no_ss";
    case TrainVariant::no_fs: return "no_fs";
    case TrainVariant::reverse: return "reverse";
  }
  return "?";
}

inline TrainVariant variant_from_string(const std::string& s) {
  if (s == "cpt") return TrainVariant::cpt;
  if (s == "no_ss") return TrainVariant::no_ss;
  if (s == "no_fs") return TrainVariant::no_fs;
  if (s == "reverse") return TrainVariant::reverse;
  throw config_error("unknown variant '" + s +
                     "' (expected cpt, no_ss, no_fs or reverse)");
}

struct TrainConfig {
  EpisodeShape shape;
  std::int64_t epochs_per_stage = 1;  // T; every variant trains 2T epochs total
  MetaConfig meta;
  CompetenceConfig curriculum;
  double weight_decay = 0.0005;
  double dropout = 0.0;  // train-time feature dropout rate
  std::int64_t hidden_dim = 16;
  std::int64_t embed_dim = 16;
  std::int64_t validation_interval = 10;  // epochs between validation passes
  std::int32_t val_tasks = 20;            // fixed episodes per validation pass
  std::uint64_t seed = 0;
  TrainVariant variant = TrainVariant::cpt;

  void validate() const {
    shape.validate();
    if (epochs_per_stage < 1)
      throw config_error("train: epochs_per_stage must be >= 1");
    curriculum.validate();
    if (!(weight_decay >= 0.0)) throw config_error("train: weight_decay must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw config_error("train: dropout must lie in [0, 1)");
    if (hidden_dim < 1 || embed_dim < 1)
      throw config_error("train: hidden_dim and embed_dim must be >= 1");
    if (validation_interval < 1)
      throw config_error("train: validation_interval must be >= 1");
    if (val_tasks < 1) throw config_error("train: val_tasks must be >= 1");
    if (!(meta.alpha1 > 0.0) || !(meta.alpha2 > 0.0))
      throw config_error("train: step sizes must be > 0");
    if (meta.inner_steps < 1) throw config_error("train: inner_steps must be >= 1");
    if (!(meta.loss_weight > 0.0))
      throw config_error("train: loss_weight must be > 0");
  }
};

struct MetricRow {
  std::int64_t epoch = 0;  // global, 1-based
  std::int32_t stage = 0;  // 1 = plain regime, 2 = edge-drop ramp
  double beta = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

struct TrainState {
  EncoderParams params;
  EncoderParams best_params;          // by validation accuracy; final if never validated
  double best_val_accuracy = -1.0;
  std::int64_t best_epoch = -1;
  std::int64_t epoch = 0;             // global epochs completed
  std::vector<MetricRow> log;
};

namespace detail {

enum class StageKind { plain, ramp_up, ramp_down };

// True when every class in the pool can fill an episode of this shape.
inline bool pool_supports(const LabelIndex& index,
                          const std::vector<ClassId>& pool,
                          const EpisodeShape& shape) {
  if (pool.size() < static_cast<std::size_t>(shape.n_way)) return false;
  const std::size_t need =
      static_cast<std::size_t>(shape.k_shot) + static_cast<std::size_t>(shape.r_query);
  for (ClassId c : pool) {
    const auto it = index.find(c);
    if (it == index.end() || it->second.size() < need) return false;
  }
  return true;
}

inline MatrixF apply_feature_dropout(const MatrixF& x, double rate, Rng& rng) {
  MatrixF out = x;
  const float keep_scale = static_cast<float>(1.0 / (1.0 - rate));
  for (float& v : out.data())
    v = rng.uniform_real() < rate ? 0.0f : v * keep_scale;
  return out;
}

struct ValContext {
  bool enabled = false;
  std::vector<EpisodeTask> tasks;  // fixed for the whole run
};

inline ValContext make_val_context(const LabelIndex& index, const ClassSplit& split,
                                   const TrainConfig& cfg) {
  ValContext ctx;
  ctx.enabled = pool_supports(index, split.validation, cfg.shape);
  if (!ctx.enabled) return ctx;
  Rng rng(substream_seed(cfg.seed, "val"));
  for (std::int32_t i = 0; i < cfg.val_tasks; ++i)
    ctx.tasks.push_back(sample_task(index, split.validation, cfg.shape, rng));
  return ctx;
}

// Mean loss / accuracy of the fixed validation episodes on the clean graph.
inline std::pair<double, double> run_validation(const NormalizedAdjacency& adj,
                                                const Graph& g,
                                                const EncoderParams& params,
                                                const ValContext& ctx,
                                                const MetaConfig& meta) {
  double loss = 0.0, acc = 0.0;
  if (meta.learner == LearnerKind::prototypical) {
    // Embeddings do not depend on the task, so encode once.
    const Matrix emb = encode(adj, g.features(), params);
    for (const EpisodeTask& t : ctx.tasks) {
      const EpisodeLoss ep = proto_episode_loss(emb, t, meta.loss_weight);
      loss += ep.loss;
      acc += ep.accuracy;
    }
  } else {
    for (const EpisodeTask& t : ctx.tasks) {
      const EpisodeOutcome out =
          run_episode(adj, g.features(), params, t, meta, false);
      loss += out.loss;
      acc += out.accuracy;
    }
  }
  const double n = static_cast<double>(ctx.tasks.size());
  return {loss / n, acc / n};
}

// Run num_epochs episodic updates, appending to state. The within-stage clock
// t runs 1..num_epochs and drives the edge-drop ratio; per-epoch random
// streams are derived from the global epoch number so a composed two-stage
// run and its logs are reproducible from the single root seed.
inline void run_stage(TrainState& state, const Graph& g,
                      const NormalizedAdjacency& clean_adj,
                      const LabelIndex& index, const ClassSplit& split,
                      const TrainConfig& cfg, StageKind kind,
                      std::int64_t num_epochs, const ValContext& val) {
  for (std::int64_t t = 1; t <= num_epochs; ++t) {
    const std::int64_t global = ++state.epoch;
    double beta = 0.0;
    switch (kind) {
      case StageKind::plain: beta = 0.0; break;
      case StageKind::ramp_up: beta = beta_for_epoch(t, cfg.curriculum); break;
      case StageKind::ramp_down:
        beta = beta_for_epoch(num_epochs + 1 - t, cfg.curriculum);
        break;
    }

    const NormalizedAdjacency* adj = &clean_adj;
    NormalizedAdjacency dropped_adj;
    if (beta > 0.0) {
      Rng drop_rng(substream_seed(cfg.seed, "dropedge", static_cast<std::uint64_t>(global)));
      const Graph dropped = drop_edges(g, beta, drop_rng);
      dropped_adj = normalize_adjacency(dropped);
      adj = &dropped_adj;
    }

    const MatrixF* feats = &g.features();
    MatrixF masked;
    if (cfg.dropout > 0.0) {
      Rng mask_rng(substream_seed(cfg.seed, "dropout", static_cast<std::uint64_t>(global)));
      masked = apply_feature_dropout(g.features(), cfg.dropout, mask_rng);
      feats = &masked;
    }

    Rng task_rng(substream_seed(cfg.seed, "sampler", static_cast<std::uint64_t>(global)));
    EpisodeTask task;
    try {
      task = sample_task(index, split.base, cfg.shape, task_rng);
    } catch (const std::runtime_error& e) {
      throw data_error("epoch " + std::to_string(global) + ": " + e.what());
    }

    const EpisodeOutcome out =
        run_episode(*adj, *feats, state.params, task, cfg.meta, true);

    EncoderParams next = state.params;
    if (cfg.weight_decay > 0.0) {
      const double shrink = 1.0 - cfg.meta.alpha2 * cfg.weight_decay;
      scale(next.w1, shrink);
      scale(next.w2, shrink);
    }
    state.params = outer_step(next, {out.grads}, cfg.meta.alpha2);

    MetricRow row;
    row.epoch = global;
    row.stage = (kind == StageKind::plain) ? 1 : 2;
    row.beta = beta;
    row.train_loss = out.loss;
    if (val.enabled && global % cfg.validation_interval == 0) {
      const auto [vloss, vacc] =
          run_validation(clean_adj, g, state.params, val, cfg.meta);
      row.val_loss = vloss;
      row.val_accuracy = vacc;
      if (vacc > state.best_val_accuracy) {
        state.best_val_accuracy = vacc;
        state.best_params = state.params;
        state.best_epoch = global;
      }
    }
    state.log.push_back(row);
  }
}

inline void require_base_pool(const LabelIndex& index, const ClassSplit& split,
                              const EpisodeShape& shape) {
  if (split.base.size() < static_cast<std::size_t>(shape.n_way))
    throw config_error("train: base pool has " + std::to_string(split.base.size()) +
                       " classes, need n_way = " + std::to_string(shape.n_way));
  const std::size_t need =
      static_cast<std::size_t>(shape.k_shot) + static_cast<std::size_t>(shape.r_query);
  for (ClassId c : split.base) {
    const auto it = index.find(c);
    const std::size_t have = it == index.end() ? 0 : it->second.size();
    if (have < need)
      throw data_error("train: base class " + std::to_string(c) + " has " +
                       std::to_string(have) + " labeled nodes, episodes need " +
                       std::to_string(need));
  }
}

inline void finalize(TrainState& state) {
  if (state.best_epoch < 0) {
    state.best_params = state.params;
    state.best_val_accuracy = -1.0;
  }
}

}  // namespace detail

// Stage one alone: epochs_per_stage plain episodic updates from the given
// parameters. Epoch numbering and random streams start from zero.
inline TrainState train_stage_one(const Graph& g, const ClassSplit& split,
                                  const TrainConfig& cfg, EncoderParams params) {
  cfg.validate();
  const NormalizedAdjacency adj = normalize_adjacency(g);
  const LabelIndex index = build_label_index(g);
  detail::require_base_pool(index, split, cfg.shape);
  const detail::ValContext val = detail::make_val_context(index, split, cfg);
  TrainState state;
  state.params = std::move(params);
  detail::run_stage(state, g, adj, index, split, cfg, detail::StageKind::plain,
                    cfg.epochs_per_stage, val);
  detail::finalize(state);
  return state;
}

// Stage two alone: epochs_per_stage updates under the ascending edge-drop
// ramp, starting from the given (typically stage-one) parameters.
inline TrainState train_stage_two(const Graph& g, const ClassSplit& split,
                                  const TrainConfig& cfg, EncoderParams params) {
  cfg.validate();
  const NormalizedAdjacency adj = normalize_adjacency(g);
  const LabelIndex index = build_label_index(g);
  detail::require_base_pool(index, split, cfg.shape);
  const detail::ValContext val = detail::make_val_context(index, split, cfg);
  TrainState state;
  state.params = std::move(params);
  detail::run_stage(state, g, adj, index, split, cfg, detail::StageKind::ramp_up,
                    cfg.epochs_per_stage, val);
  detail::finalize(state);
  return state;
}

// Full 2T-epoch run for the configured variant, initialized from the seed's
// init substream. Global epoch numbers run 1..2T across both stages, so the
// per-epoch sampler / edge-drop streams of the second stage differ from a
// standalone train_stage_two call, which starts its numbering at zero.
inline TrainState train(const Graph& g, const ClassSplit& split,
                        const TrainConfig& cfg) {
  cfg.validate();
  const NormalizedAdjacency adj = normalize_adjacency(g);
  const LabelIndex index = build_label_index(g);
  detail::require_base_pool(index, split, cfg.shape);
  const detail::ValContext val = detail::make_val_context(index, split, cfg);

  Rng init_rng(substream_seed(cfg.seed, "init"));
  TrainState state;
  state.params =
      init_params(g.feature_dim(), cfg.hidden_dim, cfg.embed_dim, init_rng);

  const std::int64_t T = cfg.epochs_per_stage;
  using detail::StageKind;
  switch (cfg.variant) {
    case TrainVariant::cpt:
      detail::run_stage(state, g, adj, index, split, cfg, StageKind::plain, T, val);
      detail::run_stage(state, g, adj, index, split, cfg, StageKind::ramp_up, T, val);
      break;
    case TrainVariant::no_ss:
      detail::run_stage(state, g, adj, index, split, cfg, StageKind::plain, 2 * T, val);
      break;
    case TrainVariant::no_fs:
      detail::run_stage(state, g, adj, index, split, cfg, StageKind::ramp_up, 2 * T, val);
      break;
    case TrainVariant::reverse:
      detail::run_stage(state, g, adj, index, split, cfg, StageKind::ramp_down, T, val);
      detail::run_stage(state, g, adj, index, split, cfg, StageKind::plain, T, val);
      break;
  }
  detail::finalize(state);
  return state;
}

// epoch,stage,beta,train_loss,val_loss,val_accuracy; the two validation
// columns are empty on epochs where validation did not run.
inline void write_metrics_csv(const std::vector<MetricRow>& log,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error(path + ": cannot open for writing");
  out << "epoch,stage,beta,train_loss,val_loss,val_accuracy\n";
  for (const MetricRow& r : log) {
    out << r.epoch << ',' << r.stage << ',' << format_double(r.beta) << ','
        << format_double(r.train_loss) << ',';
    if (r.val_loss) out << format_double(*r.val_loss);
    out << ',';
    if (r.val_accuracy) out << format_double(*r.val_accuracy);
    out << '\n';
  }
  if (!out) throw io_error(path + ": write failed");
}

}  // namespace cpt
