// Command-line front end: train / eval / ablate / gen-sbm / grad-check / split.
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Errors are a single
// "error: ..." line on stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpt/cpt.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string manifest;
  std::string out;
  std::vector<std::string> overrides;  // key=value, dotted keys
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

std::string default_out(const std::string& subcommand) {
  const char* root = std::getenv("CPT_OUT_ROOT");
  return (fs::path(root ? root : "runs") / subcommand).string();
}

// Parse "a.b.c=value" and set it in the JSON document. Values are parsed as
// JSON when possible (numbers, bools, arrays), otherwise taken as strings.
void apply_override(nlohmann::json& root, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw cpt::config_error("override '" + kv + "' is not of the form key=value");
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  nlohmann::json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty())
      throw cpt::config_error("override '" + kv + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    nlohmann::json& child = (*node)[part];
    if (!child.is_object() && !child.is_null())
      throw cpt::config_error("override '" + key + "': '" + part +
                              "' is not an object");
    node = &child;
    start = dot + 1;
  }
}

cpt::ExperimentManifest load_with_overrides(const CommonArgs& args) {
  std::ifstream in(args.manifest);
  if (!in) throw cpt::config_error("manifest: cannot open " + args.manifest);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw cpt::config_error("manifest: " + args.manifest + ": " + e.what());
  }
  for (const std::string& kv : args.overrides) apply_override(root, kv);
  if (args.seed) root["seed"] = *args.seed;
  return cpt::parse_manifest(root);
}

void print_results(const cpt::ExperimentResults& results) {
  for (const cpt::RunResult& r : results.runs) {
    if (r.failed) {
      std::cout << "run dir=" << r.dir << " variant=" << cpt::to_string(r.variant)
                << " n_way=" << r.shape.n_way << " k_shot=" << r.shape.k_shot
                << " seed=" << r.train_seed << " status=failed error=\"" << r.error
                << "\"\n";
      continue;
    }
    std::cout << "run dir=" << r.dir << " variant=" << cpt::to_string(r.variant)
              << " n_way=" << r.shape.n_way << " k_shot=" << r.shape.k_shot
              << " seed=" << r.train_seed
              << " mean_accuracy=" << cpt::format_double(r.report.mean_accuracy)
              << " std_dev=" << cpt::format_double(r.report.std_dev)
              << " num_tasks=" << r.report.num_tasks << "\n";
  }
  std::cout << "results=" << results.results_csv << "\n";
  std::cout << "summary=" << results.summary_csv << "\n";
}

int cmd_train(const CommonArgs& args, bool force_all_variants) {
  const cpt::ExperimentManifest m = load_with_overrides(args);
  const std::string out = args.out.empty()
                              ? default_out(force_all_variants ? "ablate" : "train")
                              : args.out;
  const cpt::ExperimentResults results =
      force_all_variants ? cpt::run_ablation(m, out, args.jobs)
                         : cpt::run_experiment(m, out, args.jobs);
  print_results(results);
  for (const cpt::RunResult& r : results.runs)
    if (r.failed) return 1;
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& bins_csv) {
  const cpt::ExperimentManifest m = load_with_overrides(args);
  const cpt::EncoderParams params = cpt::load_params(checkpoint);
  const cpt::Graph graph = cpt::load_dataset(m);
  cpt::Rng split_rng(cpt::substream_seed(m.seed, "split"));
  const cpt::ClassSplit split = cpt::split_classes(
      graph, m.split.base, m.split.validation, m.split.novel, split_rng);

  std::vector<double> all;
  for (std::int64_t rep = 0; rep < m.eval.repetitions; ++rep) {
    const std::uint64_t rep_seed =
        cpt::substream_seed(m.seed, "eval-rep", static_cast<std::uint64_t>(rep));
    const cpt::EvalReport r =
        cpt::meta_test(params, graph, split.novel, m.shapes.front(),
                       m.eval.num_tasks, rep_seed, m.train.meta);
    all.insert(all.end(), r.per_task.begin(), r.per_task.end());
  }
  const cpt::EvalReport report = cpt::detail::summarize(std::move(all));
  std::cout << "eval mean_accuracy=" << cpt::format_double(report.mean_accuracy)
            << " std_dev=" << cpt::format_double(report.std_dev)
            << " num_tasks=" << report.num_tasks << "\n";

  if (!bins_csv.empty()) {
    std::vector<std::int32_t> bounds;
    std::size_t start = 0;
    while (start <= bins_csv.size()) {
      const std::size_t comma = bins_csv.find(',', start);
      const std::string part = bins_csv.substr(start, comma - start);
      try {
        bounds.push_back(std::stoi(part));
      } catch (const std::exception&) {
        throw cpt::config_error("--bins: '" + part + "' is not an integer");
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    const auto bins = cpt::degree_binned_accuracy(
        params, graph, split.novel, m.shapes.front(), m.eval.num_tasks, bounds,
        cpt::substream_seed(m.seed, "eval-rep", 0), m.train.meta);
    for (const cpt::DegreeBin& b : bins) {
      std::cout << "bin lo=" << b.lo << " hi=";
      if (b.hi < 0)
        std::cout << "inf";
      else
        std::cout << b.hi;
      std::cout << " total=" << b.total << " correct=" << b.correct;
      if (b.total > 0)
        std::cout << " accuracy=" << cpt::format_double(b.accuracy());
      std::cout << "\n";
    }
  }

  if (!args.out.empty()) {
    fs::create_directories(args.out);
    const fs::path path = fs::path(args.out) / "eval_report.csv";
    std::ofstream csv(path);
    csv << "task,accuracy\n";
    for (std::size_t i = 0; i < report.per_task.size(); ++i)
      csv << i << ',' << cpt::format_double(report.per_task[i]) << '\n';
    if (!csv) throw cpt::io_error(path.string() + ": write failed");
    std::cout << "report=" << path.string() << "\n";
  }
  return 0;
}

int cmd_gen_sbm(const cpt::SbmSpec& spec, const std::string& out) {
  const cpt::Graph g = cpt::generate_sbm(spec);
  fs::create_directories(out);
  const std::string edges = (fs::path(out) / "edges.tsv").string();
  const std::string features = (fs::path(out) / "features.bin").string();
  const std::string labels = (fs::path(out) / "labels.txt").string();
  cpt::save_graph(g, edges, features, labels);
  std::cout << "wrote edges=" << edges << " features=" << features
            << " labels=" << labels << " nodes=" << g.num_nodes()
            << " edge_count=" << g.num_edges() << "\n";
  return 0;
}

int cmd_grad_check(std::int32_t trials, std::uint64_t seed, double epsilon,
                   double tolerance) {
  const double err = cpt::encoder_grad_trials(trials, seed, epsilon);
  std::cout << "max_rel_error=" << cpt::format_double(err)
            << " tolerance=" << cpt::format_double(tolerance)
            << " trials=" << trials << "\n";
  return err < tolerance ? 0 : 1;
}

int cmd_split(const CommonArgs& args) {
  const cpt::ExperimentManifest m = load_with_overrides(args);
  const cpt::Graph graph = cpt::load_dataset(m);
  cpt::Rng split_rng(cpt::substream_seed(m.seed, "split"));
  const cpt::ClassSplit split = cpt::split_classes(
      graph, m.split.base, m.split.validation, m.split.novel, split_rng);
  const auto print_pool = [](const char* name, const std::vector<cpt::ClassId>& pool) {
    std::cout << name << '=';
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (i) std::cout << ',';
      std::cout << pool[i];
    }
    std::cout << "\n";
  };
  print_pool("base", split.base);
  print_pool("validation", split.validation);
  print_pool("novel", split.novel);
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    nlohmann::json j;
    j["base"] = split.base;
    j["validation"] = split.validation;
    j["novel"] = split.novel;
    const fs::path path = fs::path(args.out) / "split.json";
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw cpt::io_error(path.string() + ": write failed");
    std::cout << "split=" << path.string() << "\n";
  }
  return 0;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_jobs) {
  cmd->add_option("--manifest", args.manifest, "experiment manifest (JSON)")
      ->required();
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--set", args.overrides,
                  "manifest override key=value (dotted keys, repeatable)");
  cmd->add_option("--seed", args.seed, "override the manifest root seed");
  if (with_jobs)
    cmd->add_option("--jobs", args.jobs, "max concurrent runs")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curriculum-hardened episodic training on graphs"};
  app.require_subcommand(1);

  CommonArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train every run in the manifest grid");
  add_common(train, train_args, true);

  CommonArgs eval_args;
  std::string checkpoint, bins_csv;
  CLI::App* eval = app.add_subcommand("eval", "meta-test a saved checkpoint");
  add_common(eval, eval_args, false);
  eval->add_option("--checkpoint", checkpoint, "encoder checkpoint file")->required();
  eval->add_option("--bins", bins_csv,
                   "comma-separated degree bin lower bounds (e.g. 0,2,4,8,16)");

  CommonArgs ablate_args;
  CLI::App* ablate =
      app.add_subcommand("ablate", "run all four variants with shared seeds");
  add_common(ablate, ablate_args, true);

  cpt::SbmSpec sbm;
  sbm.feature_dim = 16;
  std::string sbm_out;
  CLI::App* gen = app.add_subcommand("gen-sbm", "generate a synthetic dataset");
  gen->add_option("--classes", sbm.num_classes, "number of planted classes")->required();
  gen->add_option("--per-class", sbm.nodes_per_class, "nodes per class")->required();
  gen->add_option("--intra", sbm.intra_p, "within-class edge probability")->required();
  gen->add_option("--inter", sbm.inter_p, "cross-class edge probability")->required();
  gen->add_option("--feature-dim", sbm.feature_dim, "feature dimension");
  gen->add_option("--noise", sbm.noise, "feature noise stddev");
  gen->add_option("--seed", sbm.seed, "generator seed");
  gen->add_option("--out", sbm_out, "output directory");

  std::int32_t trials = 20;
  std::uint64_t gc_seed = 0;
  double epsilon = 1e-5, tolerance = 1e-4;
  CLI::App* grad = app.add_subcommand(
      "grad-check", "finite-difference check of the encoder gradients");
  grad->add_option("--trials", trials, "random instances to check");
  grad->add_option("--seed", gc_seed, "trial seed");
  grad->add_option("--epsilon", epsilon, "finite-difference step");
  grad->add_option("--tolerance", tolerance, "max allowed relative error");

  CommonArgs split_args;
  CLI::App* split = app.add_subcommand("split", "print the seeded class split");
  add_common(split, split_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*train) return cmd_train(train_args, false);
    if (*eval) return cmd_eval(eval_args, checkpoint, bins_csv);
    if (*ablate) return cmd_train(ablate_args, true);
    if (*gen) return cmd_gen_sbm(sbm, sbm_out.empty() ? default_out("gen-sbm") : sbm_out);
    if (*grad) return cmd_grad_check(trials, gc_seed, epsilon, tolerance);
    if (*split) return cmd_split(split_args);
  } catch (const cpt::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 2;
}
