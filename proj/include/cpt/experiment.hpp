#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cpt/data_io.hpp"
#include "cpt/eval.hpp"
#include "cpt/format.hpp"
#include "cpt/trainer.hpp"

namespace cpt {

struct DatasetSpec {
  // File-backed dataset; empty paths when an SBM spec is used instead.
  std::string edges, features, labels;
  std::optional<SbmSpec> sbm;
  bool is_sbm() const { return sbm.has_value(); }
};

struct SplitCounts {
  std::int32_t base = 0;
  std::int32_t validation = 0;
  std::int32_t novel = 0;
};

struct EvalSettings {
  std::int64_t num_tasks = 100;   // episodes per repetition
  std::int64_t repetitions = 10;  // independent evaluation repetitions
};

// Everything a full experiment needs: dataset, class split, training
// configuration, and the grid of (variant, shape, seed) runs.
struct ExperimentManifest {
  std::uint64_t seed = 0;                 // root seed: split + evaluation streams
  std::vector<std::uint64_t> seeds;       // training seeds, one run each
  DatasetSpec dataset;
  SplitCounts split;
  TrainConfig train;
  EvalSettings eval;
  std::vector<TrainVariant> variants;
  std::vector<EpisodeShape> shapes;
};

namespace manifest_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok)
      throw config_error("manifest: unknown key '" +
                         (where.empty() ? key : where + "." + key) + "'");
  }
}

inline const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline std::int64_t as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw config_error("manifest: " + where + " must be an integer");
  return v.get<std::int64_t>();
}

inline std::uint64_t as_uint(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw config_error("manifest: " + where + " must be a non-negative integer");
}

inline double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) throw config_error("manifest: " + where + " must be a number");
  return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw config_error("manifest: " + where + " must be a string");
  return v.get<std::string>();
}

template <typename T, typename F>
void maybe(const json& obj, const char* key, const std::string& where, T& out, F conv) {
  if (const json* v = find(obj, key)) out = conv(*v, where + "." + key);
}

inline EpisodeShape parse_shape(const json& v, const std::string& where) {
  if (!v.is_object()) throw config_error("manifest: " + where + " must be an object");
  check_keys(v, where, {"n_way", "k_shot", "r_query"});
  EpisodeShape s;
  maybe(v, "n_way", where, s.n_way,
        [](const json& j, const std::string& w) { return static_cast<std::int32_t>(as_int(j, w)); });
  maybe(v, "k_shot", where, s.k_shot,
        [](const json& j, const std::string& w) { return static_cast<std::int32_t>(as_int(j, w)); });
  maybe(v, "r_query", where, s.r_query,
        [](const json& j, const std::string& w) { return static_cast<std::int32_t>(as_int(j, w)); });
  return s;
}

}  // namespace manifest_detail

// Parse and validate a manifest. Unknown keys anywhere are rejected, so a
// typo'd override fails loudly instead of silently doing nothing.
inline ExperimentManifest parse_manifest(const nlohmann::json& root) {
  using namespace manifest_detail;
  if (!root.is_object()) throw config_error("manifest: root must be a JSON object");
  check_keys(root, "",
             {"seed", "seeds", "dataset", "split", "train", "eval", "variants",
              "shapes", "run"});

  ExperimentManifest m;
  maybe(root, "seed", "", m.seed, as_uint);

  const json* dataset = find(root, "dataset");
  if (!dataset) throw config_error("manifest: missing 'dataset'");
  if (!dataset->is_object()) throw config_error("manifest: dataset must be an object");
  check_keys(*dataset, "dataset", {"edges", "features", "labels", "sbm"});
  if (const json* sbm = find(*dataset, "sbm")) {
    if (find(*dataset, "edges") || find(*dataset, "features") || find(*dataset, "labels"))
      throw config_error("manifest: dataset.sbm excludes dataset file paths");
    if (!sbm->is_object()) throw config_error("manifest: dataset.sbm must be an object");
    check_keys(*sbm, "dataset.sbm",
               {"classes", "per_class", "intra_p", "inter_p", "feature_dim", "noise", "seed"});
    SbmSpec spec;
    spec.seed = m.seed;  // topology follows the root seed unless overridden
    maybe(*sbm, "classes", "dataset.sbm", spec.num_classes,
          [](const json& j, const std::string& w) { return static_cast<std::int32_t>(as_int(j, w)); });
    maybe(*sbm, "per_class", "dataset.sbm", spec.nodes_per_class,
          [](const json& j, const std::string& w) { return static_cast<std::int32_t>(as_int(j, w)); });
    maybe(*sbm, "intra_p", "dataset.sbm", spec.intra_p, as_double);
    maybe(*sbm, "inter_p", "dataset.sbm", spec.inter_p, as_double);
    maybe(*sbm, "feature_dim", "dataset.sbm", spec.feature_dim,
          [](const json& j, const std::string& w) { return as_int(j, w); });
    maybe(*sbm, "noise", "dataset.sbm", spec.noise, as_double);
    maybe(*sbm, "seed", "dataset.sbm", spec.seed, as_uint);
    m.dataset.sbm = spec;
  } else {
    for (const char* key : {"edges", "features", "labels"})
      if (!find(*dataset, key))
        throw config_error(std::string("manifest: dataset needs '") + key +
                           "' (or an 'sbm' block)");
    m.dataset.edges = as_string(*find(*dataset, "edges"), "dataset.edges");
    m.dataset.features = as_string(*find(*dataset, "features"), "dataset.features");
    m.dataset.labels = as_string(*find(*dataset, "labels"), "dataset.labels");
  }

  const json* split = find(root, "split");
  if (!split) throw config_error("manifest: missing 'split'");
  if (!split->is_object()) throw config_error("manifest: split must be an object");
  check_keys(*split, "split", {"base", "validation", "novel"});
  const auto as_i32 = [](const json& j, const std::string& w) {
    return static_cast<std::int32_t>(as_int(j, w));
  };
  maybe(*split, "base", "split", m.split.base, as_i32);
  maybe(*split, "validation", "split", m.split.validation, as_i32);
  maybe(*split, "novel", "split", m.split.novel, as_i32);

  bool curriculum_T_given = false;
  if (const json* train = find(root, "train")) {
    if (!train->is_object()) throw config_error("manifest: train must be an object");
    check_keys(*train, "train",
               {"variant", "learner", "n_way", "k_shot", "r_query", "epochs_per_stage",
                "alpha1", "alpha2", "inner_steps", "loss_weight", "weight_decay",
                "dropout", "hidden_dim", "embed_dim", "validation_interval",
                "val_tasks", "curriculum"});
    maybe(*train, "variant", "train", m.train.variant,
          [](const json& j, const std::string& w) {
            return variant_from_string(as_string(j, w));
          });
    maybe(*train, "learner", "train", m.train.meta.learner,
          [](const json& j, const std::string& w) {
            const std::string s = as_string(j, w);
            if (s == "prototypical") return LearnerKind::prototypical;
            if (s == "fomaml") return LearnerKind::fomaml;
            throw config_error("manifest: " + w + " must be 'prototypical' or 'fomaml'");
          });
    maybe(*train, "n_way", "train", m.train.shape.n_way, as_i32);
    maybe(*train, "k_shot", "train", m.train.shape.k_shot, as_i32);
    maybe(*train, "r_query", "train", m.train.shape.r_query, as_i32);
    maybe(*train, "epochs_per_stage", "train", m.train.epochs_per_stage,
          [](const json& j, const std::string& w) { return as_int(j, w); });
    maybe(*train, "alpha1", "train", m.train.meta.alpha1, as_double);
    maybe(*train, "alpha2", "train", m.train.meta.alpha2, as_double);
    maybe(*train, "inner_steps", "train", m.train.meta.inner_steps, as_i32);
    maybe(*train, "loss_weight", "train", m.train.meta.loss_weight, as_double);
    maybe(*train, "weight_decay", "train", m.train.weight_decay, as_double);
    maybe(*train, "dropout", "train", m.train.dropout, as_double);
    maybe(*train, "hidden_dim", "train", m.train.hidden_dim,
          [](const json& j, const std::string& w) { return as_int(j, w); });
    maybe(*train, "embed_dim", "train", m.train.embed_dim,
          [](const json& j, const std::string& w) { return as_int(j, w); });
    maybe(*train, "validation_interval", "train", m.train.validation_interval,
          [](const json& j, const std::string& w) { return as_int(j, w); });
    maybe(*train, "val_tasks", "train", m.train.val_tasks, as_i32);
    if (const json* cur = find(*train, "curriculum")) {
      if (!cur->is_object())
        throw config_error("manifest: train.curriculum must be an object");
      check_keys(*cur, "train.curriculum", {"c0", "p", "T", "beta_max"});
      maybe(*cur, "c0", "train.curriculum", m.train.curriculum.c0, as_double);
      maybe(*cur, "p", "train.curriculum", m.train.curriculum.p, as_double);
      if (const json* T = find(*cur, "T")) {
        m.train.curriculum.max_steps = as_int(*T, "train.curriculum.T");
        curriculum_T_given = true;
      }
      maybe(*cur, "beta_max", "train.curriculum", m.train.curriculum.beta_max, as_double);
    }
  }
  if (!curriculum_T_given) m.train.curriculum.max_steps = m.train.epochs_per_stage;

  if (const json* eval = find(root, "eval")) {
    if (!eval->is_object()) throw config_error("manifest: eval must be an object");
    check_keys(*eval, "eval", {"num_tasks", "repetitions"});
    maybe(*eval, "num_tasks", "eval", m.eval.num_tasks,
          [](const json& j, const std::string& w) { return as_int(j, w); });
    maybe(*eval, "repetitions", "eval", m.eval.repetitions,
          [](const json& j, const std::string& w) { return as_int(j, w); });
    if (m.eval.num_tasks < 1 || m.eval.repetitions < 1)
      throw config_error("manifest: eval.num_tasks and eval.repetitions must be >= 1");
  }

  if (const json* seeds = find(root, "seeds")) {
    if (!seeds->is_array() || seeds->empty())
      throw config_error("manifest: seeds must be a non-empty array");
    for (const auto& s : *seeds) m.seeds.push_back(manifest_detail::as_uint(s, "seeds[]"));
  } else {
    m.seeds = {m.seed};
  }

  // A recorded per-run manifest carries the seed that run trained with; feeding
  // it back reproduces exactly that run, whatever the original seed list was.
  if (const json* run = find(root, "run")) {
    if (!run->is_object()) throw config_error("manifest: run must be an object");
    check_keys(*run, "run", {"train_seed"});
    if (const json* ts = find(*run, "train_seed"))
      m.seeds = {as_uint(*ts, "run.train_seed")};
  }

  if (const json* variants = find(root, "variants")) {
    if (!variants->is_array() || variants->empty())
      throw config_error("manifest: variants must be a non-empty array");
    for (const auto& v : *variants)
      m.variants.push_back(variant_from_string(as_string(v, "variants[]")));
  } else {
    m.variants = {m.train.variant};
  }

  if (const json* shapes = find(root, "shapes")) {
    if (!shapes->is_array() || shapes->empty())
      throw config_error("manifest: shapes must be a non-empty array");
    for (std::size_t i = 0; i < shapes->size(); ++i) {
      EpisodeShape s = m.train.shape;
      const EpisodeShape given = manifest_detail::parse_shape(
          (*shapes)[i], "shapes[" + std::to_string(i) + "]");
      if (given.n_way) s.n_way = given.n_way;
      if (given.k_shot) s.k_shot = given.k_shot;
      if (given.r_query) s.r_query = given.r_query;
      m.shapes.push_back(s);
    }
  } else {
    m.shapes = {m.train.shape};
  }

  m.train.validate();
  if (m.split.base < 0 || m.split.validation < 0 || m.split.novel < 0)
    throw config_error("manifest: split counts must be >= 0");
  for (const EpisodeShape& s : m.shapes) s.validate();
  return m;
}

inline ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("manifest: cannot open " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("manifest: " + path + ": " + e.what());
  }
  return parse_manifest(root);
}

// Fully resolved manifest (all defaults expanded) for a specific run. The
// result is itself a valid manifest whose run block pins the training seed,
// so loading it reproduces this run alone.
inline nlohmann::json resolved_manifest_json(const ExperimentManifest& m,
                                             const TrainConfig& run_cfg) {
  nlohmann::json j;
  j["seed"] = m.seed;
  {
    nlohmann::json seeds = nlohmann::json::array();
    for (std::uint64_t s : m.seeds) seeds.push_back(s);
    j["seeds"] = seeds;
  }
  if (m.dataset.is_sbm()) {
    const SbmSpec& s = *m.dataset.sbm;
    j["dataset"]["sbm"] = {{"classes", s.num_classes},
                           {"per_class", s.nodes_per_class},
                           {"intra_p", s.intra_p},
                           {"inter_p", s.inter_p},
                           {"feature_dim", s.feature_dim},
                           {"noise", s.noise},
                           {"seed", s.seed}};
  } else {
    j["dataset"] = {{"edges", m.dataset.edges},
                    {"features", m.dataset.features},
                    {"labels", m.dataset.labels}};
  }
  j["split"] = {{"base", m.split.base},
                {"validation", m.split.validation},
                {"novel", m.split.novel}};
  j["train"] = {
      {"variant", to_string(run_cfg.variant)},
      {"learner", run_cfg.meta.learner == LearnerKind::prototypical ? "prototypical"
                                                                    : "fomaml"},
      {"n_way", run_cfg.shape.n_way},
      {"k_shot", run_cfg.shape.k_shot},
      {"r_query", run_cfg.shape.r_query},
      {"epochs_per_stage", run_cfg.epochs_per_stage},
      {"alpha1", run_cfg.meta.alpha1},
      {"alpha2", run_cfg.meta.alpha2},
      {"inner_steps", run_cfg.meta.inner_steps},
      {"loss_weight", run_cfg.meta.loss_weight},
      {"weight_decay", run_cfg.weight_decay},
      {"dropout", run_cfg.dropout},
      {"hidden_dim", run_cfg.hidden_dim},
      {"embed_dim", run_cfg.embed_dim},
      {"validation_interval", run_cfg.validation_interval},
      {"val_tasks", run_cfg.val_tasks},
      {"curriculum",
       {{"c0", run_cfg.curriculum.c0},
        {"p", run_cfg.curriculum.p},
        {"T", run_cfg.curriculum.max_steps},
        {"beta_max", run_cfg.curriculum.beta_max}}}};
  j["eval"] = {{"num_tasks", m.eval.num_tasks}, {"repetitions", m.eval.repetitions}};
  j["run"] = {{"train_seed", run_cfg.seed}};
  return j;
}

inline Graph load_dataset(const ExperimentManifest& m, LoadStats* stats = nullptr) {
  if (m.dataset.is_sbm()) return generate_sbm(*m.dataset.sbm);
  return load_graph(m.dataset.edges, m.dataset.features, m.dataset.labels, stats);
}

struct RunResult {
  TrainVariant variant = TrainVariant::cpt;
  EpisodeShape shape;
  std::uint64_t train_seed = 0;
  std::string dir;
  bool failed = false;
  std::string error;
  EvalReport report;  // empty when failed
};

struct ExperimentResults {
  std::vector<RunResult> runs;
  std::string results_csv;
  std::string summary_csv;
};

namespace detail {

inline std::string run_name(TrainVariant v, const EpisodeShape& s, std::uint64_t seed) {
  std::ostringstream os;
  os << to_string(v) << '_' << s.n_way << 'w' << s.k_shot << "s_seed" << seed;
  return os.str();
}

// Meta-test episode streams are derived from the manifest root seed only, so
// every run of the experiment is scored on the same episodes.
inline EvalReport evaluate_run(const ExperimentManifest& m, const Graph& g,
                               const ClassSplit& split, const EpisodeShape& shape,
                               const EncoderParams& params) {
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(m.eval.repetitions * m.eval.num_tasks));
  for (std::int64_t rep = 0; rep < m.eval.repetitions; ++rep) {
    const std::uint64_t rep_seed =
        substream_seed(m.seed, "eval-rep", static_cast<std::uint64_t>(rep));
    const EvalReport r = meta_test(params, g, split.novel, shape, m.eval.num_tasks,
                                   rep_seed, m.train.meta);
    all.insert(all.end(), r.per_task.begin(), r.per_task.end());
  }
  EvalReport agg = summarize(std::move(all));
  agg.shape = shape;
  agg.seed = m.seed;
  return agg;
}

inline void write_per_task_csv(const std::string& path, const EvalReport& report,
                               std::int64_t tasks_per_rep) {
  std::ofstream out(path);
  if (!out) throw io_error(path + ": cannot open for writing");
  out << "repetition,task,accuracy\n";
  for (std::size_t i = 0; i < report.per_task.size(); ++i)
    out << (static_cast<std::int64_t>(i) / tasks_per_rep) << ','
        << (static_cast<std::int64_t>(i) % tasks_per_rep) << ','
        << format_double(report.per_task[i]) << '\n';
  if (!out) throw io_error(path + ": write failed");
}

}  // namespace detail

// Train and score every (variant, shape, seed) combination. Each run gets its
// own directory under out_dir with the resolved manifest, the metrics log,
// final and best checkpoints, and per-task evaluation accuracies. A failed
// run leaves error.txt in its directory and is skipped in the result CSVs;
// the experiment itself carries on. jobs > 1 trains runs concurrently; every
// run is internally deterministic and the CSVs are written in grid order, so
// results do not depend on scheduling.
inline ExperimentResults run_experiment(const ExperimentManifest& m,
                                        const std::string& out_dir, int jobs = 1) {
  namespace fs = std::filesystem;
  const Graph graph = load_dataset(m);
  Rng split_rng(substream_seed(m.seed, "split"));
  const ClassSplit split = split_classes(graph, m.split.base, m.split.validation,
                                         m.split.novel, split_rng);
  fs::create_directories(out_dir);

  struct RunSpec {
    TrainVariant variant;
    EpisodeShape shape;
    std::uint64_t seed;
  };
  std::vector<RunSpec> grid;
  for (TrainVariant v : m.variants)
    for (const EpisodeShape& s : m.shapes)
      for (std::uint64_t seed : m.seeds) grid.push_back({v, s, seed});

  ExperimentResults results;
  results.runs.resize(grid.size());

  const auto do_run = [&](std::size_t i) {
    const RunSpec& spec = grid[i];
    RunResult& out = results.runs[i];
    out.variant = spec.variant;
    out.shape = spec.shape;
    out.train_seed = spec.seed;
    const fs::path dir = fs::path(out_dir) / detail::run_name(spec.variant, spec.shape, spec.seed);
    out.dir = dir.string();
    try {
      fs::create_directories(dir);
      TrainConfig cfg = m.train;
      cfg.variant = spec.variant;
      cfg.shape = spec.shape;
      cfg.seed = spec.seed;
      {
        std::ofstream mout(dir / "manifest.json");
        mout << resolved_manifest_json(m, cfg).dump(2) << '\n';
        if (!mout) throw io_error((dir / "manifest.json").string() + ": write failed");
      }
      const TrainState state = train(graph, split, cfg);
      write_metrics_csv(state.log, (dir / "metrics.csv").string());
      save_params(state.params, (dir / "checkpoint_final.bin").string());
      save_params(state.best_params, (dir / "checkpoint_best.bin").string());
      out.report = detail::evaluate_run(m, graph, split, spec.shape, state.best_params);
      detail::write_per_task_csv((dir / "per_task.csv").string(), out.report,
                                 m.eval.num_tasks);
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
      std::ofstream err(dir / "error.txt");
      err << e.what() << '\n';
    }
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) do_run(i);
  } else {
    std::atomic<std::size_t> next{0};
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(jobs), grid.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1))
          do_run(i);
      });
    for (std::thread& t : pool) t.join();
  }

  const fs::path results_path = fs::path(out_dir) / "results.csv";
  std::ofstream rcsv(results_path);
  if (!rcsv) throw io_error(results_path.string() + ": cannot open for writing");
  rcsv << "variant,learner,n_way,k_shot,seed,mean_accuracy,std_dev,num_tasks\n";
  const char* learner =
      m.train.meta.learner == LearnerKind::prototypical ? "prototypical" : "fomaml";
  for (const RunResult& r : results.runs) {
    if (r.failed) continue;
    rcsv << to_string(r.variant) << ',' << learner << ',' << r.shape.n_way << ','
         << r.shape.k_shot << ',' << r.train_seed << ','
         << format_double(r.report.mean_accuracy) << ','
         << format_double(r.report.std_dev) << ',' << r.report.num_tasks << '\n';
  }
  if (!rcsv) throw io_error(results_path.string() + ": write failed");
  results.results_csv = results_path.string();

  // Seed-aggregated view: mean and sample std of the per-run means.
  const fs::path summary_path = fs::path(out_dir) / "summary.csv";
  std::ofstream scsv(summary_path);
  if (!scsv) throw io_error(summary_path.string() + ": cannot open for writing");
  scsv << "variant,learner,n_way,k_shot,num_runs,mean_accuracy,std_dev\n";
  for (TrainVariant v : m.variants)
    for (const EpisodeShape& s : m.shapes) {
      std::vector<double> means;
      for (const RunResult& r : results.runs)
        if (!r.failed && r.variant == v && r.shape.n_way == s.n_way &&
            r.shape.k_shot == s.k_shot && r.shape.r_query == s.r_query)
          means.push_back(r.report.mean_accuracy);
      if (means.empty()) continue;
      const EvalReport agg = detail::summarize(std::move(means));
      scsv << to_string(v) << ',' << learner << ',' << s.n_way << ',' << s.k_shot
           << ',' << agg.num_tasks << ',' << format_double(agg.mean_accuracy) << ','
           << format_double(agg.std_dev) << '\n';
    }
  if (!scsv) throw io_error(summary_path.string() + ": write failed");
  results.summary_csv = summary_path.string();
  return results;
}

// The four-variant comparison on a shared seed list and shared evaluation
// episodes: variants are forced to {cpt, no_ss, no_fs, reverse}, everything
// else comes from the manifest.
inline ExperimentResults run_ablation(ExperimentManifest m, const std::string& out_dir,
                                      int jobs = 1) {
  m.variants = {TrainVariant::cpt, TrainVariant::no_ss, TrainVariant::no_fs,
                TrainVariant::reverse};
  return run_experiment(m, out_dir, jobs);
}

}  // namespace cpt
