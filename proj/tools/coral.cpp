#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "coral/bench.hpp"
#include "coral/data.hpp"
#include "coral/errors.hpp"
#include "coral/io_util.hpp"
#include "coral/irt.hpp"
#include "coral/metrics.hpp"
#include "coral/model.hpp"
#include "coral/trainer.hpp"

namespace {

using namespace coral;

struct SplitFlags {
  double train_ratio = 0.7;
  double valid_ratio = 0.1;
  double test_ratio = 0.2;
};

void add_split_flags(CLI::App* cmd, SplitFlags& f) {
  cmd->add_option("--train-ratio", f.train_ratio, "Training fraction")
      ->capture_default_str();
  cmd->add_option("--valid-ratio", f.valid_ratio, "Validation fraction")
      ->capture_default_str();
  cmd->add_option("--test-ratio", f.test_ratio, "Test fraction")
      ->capture_default_str();
}

// Train-style hyperparameter flags. A --config file overrides flag values
// (documented precedence); --seed always wins over the file.
struct ConfigFlags {
  TrainConfig cfg;
  std::string config_path;
  std::string policy_text = "base";
  std::string ablation_text = "none";
  CLI::Option* seed_opt = nullptr;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool allow_ablation_flag) {
  cmd->add_option("--config", f.config_path,
                  "key = value file; overrides the flags below");
  cmd->add_option("--d", f.cfg.dim, "Latent dimensions per concept")
      ->capture_default_str();
  cmd->add_option("--hidden", f.cfg.hidden, "MLP hidden width")
      ->capture_default_str();
  cmd->add_option("--layers", f.cfg.layers, "Aggregation layers")
      ->capture_default_str();
  cmd->add_option("--batch", f.cfg.batch, "Batch size")->capture_default_str();
  cmd->add_option("--lr", f.cfg.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--alpha", f.cfg.alpha, "Encoder BCE weight")
      ->capture_default_str();
  cmd->add_option("--beta", f.cfg.beta, "KL weight")->capture_default_str();
  cmd->add_option("--k", f.cfg.k, "Neighbors per (learner, concept)")
      ->capture_default_str();
  cmd->add_option("--knn-k", f.cfg.knn_k,
                  "Neighbor count for the knn ablation (0 = follow --k)")
      ->capture_default_str();
  cmd->add_option("--epochs", f.cfg.epochs, "Training epochs")
      ->capture_default_str();
  cmd->add_option("--patience", f.cfg.patience,
                  "Early-stop patience on validation AUC (0 = off)")
      ->capture_default_str();
  cmd->add_option("--policy", f.policy_text,
                  "base | n-sample:<n> | m-select:<m> | full-kit:<n>:<m>")
      ->capture_default_str();
  if (allow_ablation_flag) {
    cmd->add_option("--ablation", f.ablation_text,
                    "none | no_kl | no_collab | knn")
        ->capture_default_str();
  }
  f.seed_opt = cmd->add_option("--seed", f.cfg.seed, "Master random seed")
                   ->capture_default_str();
}

TrainConfig resolve_config(const ConfigFlags& f) {
  TrainConfig cfg = f.cfg;
  cfg.policy = CandidatePolicy::parse(f.policy_text);
  cfg.ablation = parse_ablation(f.ablation_text);
  if (!f.config_path.empty()) {
    uint64_t flag_seed = cfg.seed;
    apply_config_file(f.config_path, cfg);
    if (f.seed_opt && f.seed_opt->count() > 0) cfg.seed = flag_seed;
  }
  for (const std::string& w : validate_config(cfg)) {
    std::cerr << "warning: " << w << "\n";
  }
  return cfg;
}

DatasetSplit load_split(const std::string& interactions_path,
                        const SplitFlags& ratios, uint64_t seed,
                        InteractionLog* full_log = nullptr) {
  InteractionLog log = load_interactions(interactions_path);
  if (full_log) *full_log = log;
  return split_dataset(log, ratios.train_ratio, ratios.valid_ratio,
                       ratios.test_ratio, seed);
}

void report_unknown(const std::set<std::string>& missing) {
  if (missing.empty()) return;
  std::string msg = "records reference ids unknown to the checkpoint:";
  int shown = 0;
  for (const std::string& m : missing) {
    if (shown == 8) {
      msg += " and " + std::to_string(missing.size() - 8) + " more";
      break;
    }
    msg += " " + m;
    ++shown;
  }
  throw DataError(msg);
}

std::vector<Interaction> remap_records(const std::vector<Interaction>& records,
                                       const InteractionLog& file_log,
                                       const Checkpoint& ckpt) {
  std::vector<Interaction> out;
  out.reserve(records.size());
  std::set<std::string> missing;
  for (const Interaction& r : records) {
    const std::string& lname = file_log.learners.names[size_t(r.learner)];
    const std::string& qname = file_log.questions.names[size_t(r.question)];
    int32_t u = ckpt.learners.get(lname);
    int32_t q = ckpt.questions.get(qname);
    if (u < 0) missing.insert("learner:" + lname);
    if (q < 0) missing.insert("question:" + qname);
    if (u >= 0 && q >= 0) out.push_back({u, q, r.correct});
  }
  report_unknown(missing);
  return out;
}

QMatrix remap_qmatrix(const QMatrix& file_qm, const InteractionLog& file_log,
                      const Checkpoint& ckpt) {
  QMatrix out;
  out.concepts = ckpt.concepts;
  out.concepts_of.resize(size_t(ckpt.questions.size()));
  std::set<std::string> missing;
  for (int32_t fq = 0; fq < file_log.question_count(); ++fq) {
    int32_t qi = ckpt.questions.get(file_log.questions.names[size_t(fq)]);
    if (qi < 0) continue;  // not referenced by the checkpoint
    std::vector<int32_t>& tags = out.concepts_of[size_t(qi)];
    for (int32_t fc : file_qm.concepts_of[size_t(fq)]) {
      int32_t ci = ckpt.concepts.get(file_qm.concepts.names[size_t(fc)]);
      if (ci < 0) {
        missing.insert("concept:" + file_qm.concepts.names[size_t(fc)]);
      } else {
        tags.push_back(ci);
      }
    }
    std::sort(tags.begin(), tags.end());
  }
  report_unknown(missing);
  return out;
}

// ---- synth ----

struct SynthArgs {
  SyntheticSpec spec;
  std::string out_dir;
};

void run_synth(const SynthArgs& a) {
  SyntheticData data = generate_synthetic(a.spec);
  std::filesystem::create_directories(a.out_dir);
  write_interactions(data.log, a.out_dir + "/interactions.csv");
  write_qmatrix(data.qmatrix, data.log, a.out_dir + "/qmatrix.csv");
  write_ground_truth(data.truth, data.log, data.qmatrix,
                     a.out_dir + "/truth_proficiency.csv",
                     a.out_dir + "/truth_groups.csv");
  std::cout << "wrote " << data.log.records.size() << " interactions, "
            << data.log.question_count() << " questions, "
            << data.log.learner_count() << " learners to " << a.out_dir
            << "\n";
}

// ---- train / ablate ----

struct TrainArgs {
  std::string interactions;
  std::string qmatrix;
  std::string out = "coral.ckpt";
  std::string log_path;
  SplitFlags ratios;
  ConfigFlags config;
  double sparse_p = -1.0;
  bool serial = false;
};

void run_train(const TrainArgs& a) {
  TrainConfig cfg = resolve_config(a.config);
  InteractionLog full_log;
  DatasetSplit split = load_split(a.interactions, a.ratios, cfg.seed, &full_log);
  QMatrix qm = load_qmatrix(a.qmatrix, full_log);
  if (a.sparse_p >= 0.0) split = make_sparse(split, a.sparse_p, cfg.seed);

  std::ostringstream log;
  TrainResult result = train(split, qm, cfg, &log, !a.serial);
  save_checkpoint(result.checkpoint, a.out);

  std::cout << log.str();
  if (!a.log_path.empty()) atomic_write_file(a.log_path, log.str());
  std::cout << "checkpoint: " << a.out << " (epoch "
            << result.checkpoint.epoch << ")\n";
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string interactions;
  std::string qmatrix;
  std::string out = "metrics.json";
  std::string scenario = "normal";
  double sparse_p = 0.8;
  SplitFlags ratios;
  uint64_t seed = 0;
  bool serial = false;
};

void run_eval(const EvalArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  InteractionLog full_log;
  DatasetSplit split = load_split(a.interactions, a.ratios, a.seed, &full_log);
  QMatrix file_qm = load_qmatrix(a.qmatrix, full_log);

  Scenario scenario;
  if (a.scenario == "normal") {
    scenario = Scenario::kNormal;
  } else if (a.scenario == "sparse") {
    scenario = Scenario::kSparse;
    split = make_sparse(split, a.sparse_p, a.seed);
  } else if (a.scenario == "cold-start" || a.scenario == "cold_start") {
    scenario = Scenario::kColdStart;
    split = make_cold_start(split, file_qm);
  } else {
    throw ConfigError("unknown scenario '" + a.scenario +
                      "' (expected normal, sparse, or cold-start)");
  }

  std::vector<Interaction> test = remap_records(split.test.records, full_log, ckpt);
  if (test.empty()) throw DataError("no test records for scenario " + a.scenario);
  QMatrix qm = remap_qmatrix(file_qm, full_log, ckpt);

  ModelRef m = ckpt.model();
  const CollabGraph* gp = ckpt.graph.empty() ? nullptr : &ckpt.graph;
  std::vector<double> probs =
      predict_records(m, qm, gp, test, ckpt.config.layers, !a.serial);
  MetricReport report =
      compute_metrics(probs, test, 0.5, scenario_name(scenario));
  std::string json = metrics_to_json(report);
  atomic_write_file(a.out, json);
  std::cout << json;
}

// ---- diagnose ----

struct DiagnoseArgs {
  std::string checkpoint;
  std::string out = "proficiency.csv";
  std::string learner;
  bool all = false;
  bool percent = false;
  bool serial = false;
};

void run_diagnose(const DiagnoseArgs& a) {
  if (a.all == !a.learner.empty()) {
    throw ConfigError("pass exactly one of --learner <id> or --all");
  }
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  ModelRef m = ckpt.model();
  const CollabGraph* gp = ckpt.graph.empty() ? nullptr : &ckpt.graph;
  std::vector<double> fused =
      fused_means(m, gp, ckpt.config.layers, !a.serial);
  std::vector<double> prof = proficiency_from_states(
      fused, ckpt.dims.learners, ckpt.dims.concepts, ckpt.dims.dim);

  if (a.all) {
    export_proficiency_csv(prof, ckpt.learners, ckpt.concepts, a.percent, a.out);
  } else {
    int32_t u = ckpt.learners.get(a.learner);
    if (u < 0) throw DataError("unknown learner '" + a.learner + "'");
    IdMap one;
    one.add_or_get(a.learner);
    std::span<const double> row(prof.data() +
                                    size_t(u) * size_t(ckpt.dims.concepts),
                                size_t(ckpt.dims.concepts));
    export_proficiency_csv(row, one, ckpt.concepts, a.percent, a.out);
  }
  std::cout << "wrote " << a.out << "\n";
}

// ---- neighbors ----

struct NeighborsArgs {
  std::string checkpoint;
  std::string out = "neighbors.csv";
};

void run_neighbors(const NeighborsArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  export_neighbors_csv(ckpt.graph, ckpt.learners, ckpt.concepts, a.out);
  std::cout << "wrote " << a.out << "\n";
}

// ---- bench ----

struct BenchArgs {
  std::string interactions;
  std::string qmatrix;
  std::string out = "bench.json";
  std::string policies = "base";
  SplitFlags ratios;
  ConfigFlags config;
  bool serial = false;
};

void run_bench(const BenchArgs& a) {
  TrainConfig cfg = resolve_config(a.config);
  std::vector<CandidatePolicy> policies;
  std::stringstream ss(a.policies);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string text = trim(item);
    if (!text.empty()) policies.push_back(CandidatePolicy::parse(text));
  }
  if (policies.empty()) throw ConfigError("--policies needs at least one entry");

  InteractionLog full_log;
  DatasetSplit split = load_split(a.interactions, a.ratios, cfg.seed, &full_log);
  QMatrix qm = load_qmatrix(a.qmatrix, full_log);

  std::ostringstream log;
  std::vector<BenchReport> reports =
      run_policy_sweep(split, qm, cfg, policies, &log, !a.serial);
  std::string json = bench_to_json(reports);
  atomic_write_file(a.out, json);
  std::cout << log.str() << json;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "coral: collaborative cognitive diagnosis on learner response logs"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate a clustered synthetic dataset");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")
      ->required();
  synth_cmd->add_option("--learners,--M", synth.spec.learners, "Learners")
      ->capture_default_str();
  synth_cmd->add_option("--questions,--N", synth.spec.questions, "Questions")
      ->capture_default_str();
  synth_cmd->add_option("--concepts,--C", synth.spec.concepts, "Concepts")
      ->capture_default_str();
  synth_cmd->add_option("--groups,--G", synth.spec.groups, "Learner groups")
      ->capture_default_str();
  synth_cmd->add_option("--sigma-p", synth.spec.sigma_p,
                        "Within-group proficiency noise")
      ->capture_default_str();
  synth_cmd->add_option("--steepness", synth.spec.steepness,
                        "Response curve steepness")
      ->capture_default_str();
  synth_cmd
      ->add_option("--min-tags", synth.spec.min_concepts_per_question,
                   "Min concepts per question")
      ->capture_default_str();
  synth_cmd
      ->add_option("--max-tags", synth.spec.max_concepts_per_question,
                   "Max concepts per question")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed, "Random seed")
      ->capture_default_str();
  synth_cmd->callback([&] { run_synth(synth); });

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--interactions", train_args.interactions,
                        "Response log CSV")
      ->required();
  train_cmd->add_option("--qmatrix", train_args.qmatrix, "Question-concept CSV")
      ->required();
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")
      ->capture_default_str();
  train_cmd->add_option("--log", train_args.log_path, "Epoch log path");
  train_cmd->add_option("--sparse-p", train_args.sparse_p,
                        "Drop this fraction of training records first");
  train_cmd->add_flag("--serial", train_args.serial,
                      "Disable internal parallelism");
  add_split_flags(train_cmd, train_args.ratios);
  add_config_flags(train_cmd, train_args.config, true);
  train_cmd->callback([&] { run_train(train_args); });

  TrainArgs ablate_args;
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "Train with an ablation (shorthand for train --ablation)");
  ablate_cmd->add_option("--interactions", ablate_args.interactions,
                         "Response log CSV")
      ->required();
  ablate_cmd->add_option("--qmatrix", ablate_args.qmatrix,
                         "Question-concept CSV")
      ->required();
  ablate_cmd->add_option("--out", ablate_args.out, "Checkpoint path")
      ->capture_default_str();
  ablate_cmd->add_option("--log", ablate_args.log_path, "Epoch log path");
  ablate_cmd->add_flag("--serial", ablate_args.serial,
                       "Disable internal parallelism");
  add_split_flags(ablate_cmd, ablate_args.ratios);
  add_config_flags(ablate_cmd, ablate_args.config, false);
  ablate_cmd
      ->add_option("--ablation", ablate_args.config.ablation_text,
                   "no_kl | no_collab | knn")
      ->required();
  ablate_cmd->callback([&] { run_train(ablate_args); });

  EvalArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Score a checkpoint on a held-out scenario");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint path")
      ->required();
  eval_cmd->add_option("--interactions", eval_args.interactions,
                       "Response log CSV")
      ->required();
  eval_cmd->add_option("--qmatrix", eval_args.qmatrix, "Question-concept CSV")
      ->required();
  eval_cmd->add_option("--out", eval_args.out, "Metrics JSON path")
      ->capture_default_str();
  eval_cmd->add_option("--scenario", eval_args.scenario,
                       "normal | sparse | cold-start")
      ->capture_default_str();
  eval_cmd->add_option("--sparse-p", eval_args.sparse_p,
                       "Training-record drop fraction for --scenario sparse")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval_args.seed,
                       "Split seed (match the training run)")
      ->capture_default_str();
  eval_cmd->add_flag("--serial", eval_args.serial,
                     "Disable internal parallelism");
  add_split_flags(eval_cmd, eval_args.ratios);
  eval_cmd->callback([&] { run_eval(eval_args); });

  DiagnoseArgs diag_args;
  CLI::App* diag_cmd =
      app.add_subcommand("diagnose", "Export proficiency estimates");
  diag_cmd->add_option("--checkpoint", diag_args.checkpoint, "Checkpoint path")
      ->required();
  diag_cmd->add_option("--out", diag_args.out, "Output CSV path")
      ->capture_default_str();
  diag_cmd->add_option("--learner", diag_args.learner, "Single learner id");
  diag_cmd->add_flag("--all", diag_args.all, "Every learner");
  diag_cmd->add_flag("--percent", diag_args.percent,
                     "Add a x100 percentage column");
  diag_cmd->add_flag("--serial", diag_args.serial,
                     "Disable internal parallelism");
  diag_cmd->callback([&] { run_diagnose(diag_args); });

  NeighborsArgs nbr_args;
  CLI::App* nbr_cmd = app.add_subcommand(
      "neighbors", "Export the checkpoint's neighbor lists");
  nbr_cmd->add_option("--checkpoint", nbr_args.checkpoint, "Checkpoint path")
      ->required();
  nbr_cmd->add_option("--out", nbr_args.out, "Output CSV path")
      ->capture_default_str();
  nbr_cmd->callback([&] { run_neighbors(nbr_args); });

  BenchArgs bench_args;
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "Compare candidate policies: counters and test metrics");
  bench_cmd->add_option("--interactions", bench_args.interactions,
                        "Response log CSV")
      ->required();
  bench_cmd->add_option("--qmatrix", bench_args.qmatrix,
                        "Question-concept CSV")
      ->required();
  bench_cmd->add_option("--policies", bench_args.policies,
                        "Comma-separated policy list")
      ->capture_default_str();
  bench_cmd->add_option("--out", bench_args.out, "Report JSON path")
      ->capture_default_str();
  bench_cmd->add_flag("--serial", bench_args.serial,
                      "Disable internal parallelism");
  add_split_flags(bench_cmd, bench_args.ratios);
  add_config_flags(bench_cmd, bench_args.config, true);
  bench_cmd->callback([&] { run_bench(bench_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
