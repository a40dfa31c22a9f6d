#include "coral/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "coral/errors.hpp"
#include "coral/io_util.hpp"
#include "coral/metrics.hpp"
#include "coral/rng.hpp"

namespace coral {

Ablation parse_ablation(const std::string& text) {
  if (text == "none") return Ablation::kNone;
  if (text == "no_kl") return Ablation::kNoKl;
  if (text == "no_collab") return Ablation::kNoCollab;
  if (text == "knn") return Ablation::kKnn;
  throw ConfigError("unknown ablation '" + text +
                    "' (expected none, no_kl, no_collab, or knn)");
}

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoKl: return "no_kl";
    case Ablation::kNoCollab: return "no_collab";
    case Ablation::kKnn: return "knn";
  }
  return "none";
}

namespace {

constexpr double kLrGrid[] = {0.002, 0.005, 0.01, 0.02, 0.05};
constexpr double kAlphaGrid[] = {0.05, 0.1, 0.5, 1.0};
constexpr double kBetaGrid[] = {0.25, 0.5, 1.0};
constexpr int32_t kMaxSweptK = 50;

bool in_grid(double v, std::span<const double> grid) {
  return std::find(grid.begin(), grid.end(), v) != grid.end();
}

std::string grid_text(std::span<const double> grid) {
  std::string s = "{";
  for (size_t i = 0; i < grid.size(); ++i) {
    if (i) s += ", ";
    s += format_double(grid[i]);
  }
  return s + "}";
}

int64_t parse_int_field(const std::string& text, const std::string& where) {
  size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &pos);
  } catch (...) {
    throw ConfigError(where + ": expected integer, got '" + text + "'");
  }
  if (pos != text.size()) {
    throw ConfigError(where + ": expected integer, got '" + text + "'");
  }
  return v;
}

uint64_t parse_uint_field(const std::string& text, const std::string& where) {
  size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (...) {
    throw ConfigError(where + ": expected unsigned integer, got '" + text + "'");
  }
  if (pos != text.size() || (!text.empty() && text[0] == '-')) {
    throw ConfigError(where + ": expected unsigned integer, got '" + text + "'");
  }
  return v;
}

double parse_double_field(const std::string& text, const std::string& where) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (...) {
    throw ConfigError(where + ": expected number, got '" + text + "'");
  }
  if (pos != text.size() || !std::isfinite(v)) {
    throw ConfigError(where + ": expected number, got '" + text + "'");
  }
  return v;
}

}  // namespace

std::vector<std::string> validate_config(const TrainConfig& cfg) {
  if (cfg.dim < 1) throw ConfigError("d must be positive");
  if (cfg.hidden < 1) throw ConfigError("hidden width must be positive");
  if (cfg.layers < 1) throw ConfigError("layers must be positive");
  if (cfg.batch < 1) throw ConfigError("batch size must be positive");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) {
    throw ConfigError("lr must be a positive number");
  }
  if (cfg.alpha < 0.0 || !std::isfinite(cfg.alpha)) {
    throw ConfigError("alpha must be non-negative");
  }
  if (cfg.beta < 0.0 || !std::isfinite(cfg.beta)) {
    throw ConfigError("beta must be non-negative");
  }
  if (cfg.k < 0) throw ConfigError("k must be non-negative");
  if (cfg.knn_k < 0) throw ConfigError("knn_k must be non-negative");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.patience < 0) throw ConfigError("patience must be non-negative");

  std::vector<std::string> warnings;
  if (!in_grid(cfg.lr, kLrGrid)) {
    warnings.push_back("lr=" + format_double(cfg.lr) +
                       " is outside the tuned grid " + grid_text(kLrGrid));
  }
  if (!in_grid(cfg.alpha, kAlphaGrid)) {
    warnings.push_back("alpha=" + format_double(cfg.alpha) +
                       " is outside the tuned grid " + grid_text(kAlphaGrid));
  }
  if (!in_grid(cfg.beta, kBetaGrid)) {
    warnings.push_back("beta=" + format_double(cfg.beta) +
                       " is outside the tuned grid " + grid_text(kBetaGrid));
  }
  if (cfg.k > kMaxSweptK) {
    warnings.push_back("k=" + std::to_string(cfg.k) +
                       " is outside the tuned range 0.." +
                       std::to_string(kMaxSweptK));
  }
  return warnings;
}

void apply_config_file(const std::string& path, TrainConfig& cfg) {
  std::istringstream in(read_file(path));
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;

    std::string where = path + ":" + std::to_string(line_no);
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(where + ": expected key = value");
    }

    if (key == "d") {
      cfg.dim = int32_t(parse_int_field(value, where));
    } else if (key == "hidden") {
      cfg.hidden = int32_t(parse_int_field(value, where));
    } else if (key == "layers") {
      cfg.layers = int32_t(parse_int_field(value, where));
    } else if (key == "batch") {
      cfg.batch = int32_t(parse_int_field(value, where));
    } else if (key == "lr") {
      cfg.lr = parse_double_field(value, where);
    } else if (key == "alpha") {
      cfg.alpha = parse_double_field(value, where);
    } else if (key == "beta") {
      cfg.beta = parse_double_field(value, where);
    } else if (key == "k") {
      cfg.k = int32_t(parse_int_field(value, where));
    } else if (key == "knn_k") {
      cfg.knn_k = int32_t(parse_int_field(value, where));
    } else if (key == "epochs") {
      cfg.epochs = int32_t(parse_int_field(value, where));
    } else if (key == "patience") {
      cfg.patience = int32_t(parse_int_field(value, where));
    } else if (key == "seed") {
      cfg.seed = parse_uint_field(value, where);
    } else if (key == "policy") {
      try {
        cfg.policy = CandidatePolicy::parse(value);
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    } else if (key == "ablation") {
      try {
        cfg.ablation = parse_ablation(value);
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

namespace {

CollabGraph empty_graph(int32_t learners, int32_t concepts) {
  CollabGraph g;
  g.learners = learners;
  g.concepts = concepts;
  g.k = 0;
  g.policy = "none";
  return g;
}

// Per-epoch graph refresh from the current posterior means. no_collab and
// K=0 share the same empty graph so their runs stay bit-identical.
CollabGraph rebuild_graph(const ModelRef& m, const TrainConfig& cfg,
                          uint64_t seed, bool parallel) {
  const std::vector<double>& mu = m.params->array(m.id_mu).value;
  int32_t M = m.dims.learners;
  int32_t C = m.dims.concepts;
  if (cfg.ablation == Ablation::kNoCollab) return empty_graph(M, C);
  if (cfg.ablation == Ablation::kKnn) {
    int32_t kk = cfg.effective_knn_k();
    if (kk <= 0) return empty_graph(M, C);
    return build_knn_graph(mu, M, C, m.dims.dim, kk, parallel);
  }
  if (cfg.k <= 0) return empty_graph(M, C);
  return build_graph(mu, M, C, m.dims.dim, cfg.k, cfg.policy, seed, parallel);
}

void snapshot(Checkpoint& ckpt, const ParamStore& params,
              const CollabGraph& graph, int32_t epoch, double val_auc,
              bool has_auc) {
  ckpt.params = params;
  ckpt.graph = graph;
  ckpt.epoch = epoch;
  ckpt.best_val_auc = val_auc;
  ckpt.has_val_auc = has_auc;
}

void log_epoch(std::ostream& out, const EpochStats& s, bool has_valid) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "epoch %3d  loss %.6f (enc %.6f kl %.6f dec %.6f)", s.epoch,
                s.loss.total, s.loss.bce_encoder, s.loss.kl,
                s.loss.bce_decoder);
  out << buf;
  if (has_valid) {
    std::snprintf(buf, sizeof(buf), "  val acc %.4f", s.val_acc);
    out << buf;
    if (s.val_auc_defined) {
      std::snprintf(buf, sizeof(buf), " auc %.4f", s.val_auc);
      out << buf;
    } else {
      out << " auc n/a";
    }
  } else {
    out << "  val n/a";
  }
  std::snprintf(buf, sizeof(buf), "  graph %.3fs ops %llu", s.graph_seconds,
                (unsigned long long)s.scoring_ops);
  out << buf << "\n";
}

}  // namespace

TrainResult train(const DatasetSplit& data, const QMatrix& qm,
                  const TrainConfig& cfg, std::ostream* log, bool parallel) {
  validate_config(cfg);
  if (data.train.records.empty()) throw DataError("training split is empty");

  ModelDims dims;
  dims.learners = data.train.learner_count();
  dims.questions = data.train.question_count();
  dims.concepts = qm.concept_count();
  dims.dim = cfg.dim;
  dims.hidden = cfg.hidden;

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = cfg;
  ckpt.dims = dims;
  ckpt.learners = data.train.learners;
  ckpt.questions = data.train.questions;
  ckpt.concepts = qm.concepts;

  RngStream root(cfg.seed);
  ParamStore params;
  ModelRef model = init_model(params, dims, root.derive("init"));
  RngStream graph_seeds = root.derive("graph-seed");

  double beta_eff = cfg.ablation == Ablation::kNoKl ? 0.0 : cfg.beta;
  bool has_valid = !data.valid.records.empty();

  if (cfg.epochs == 0) {
    CollabGraph graph =
        rebuild_graph(model, cfg, graph_seeds.derive(uint64_t(0)).next_u64(),
                      parallel);
    result.scoring_ops_total = graph.scoring_ops;
    result.build_seconds_total = graph.build_seconds;
    snapshot(ckpt, params, graph, 0, 0.0, false);
    return result;
  }

  GradResult grads = make_zero_grads(params);
  std::vector<Interaction> shuffled = data.train.records;
  std::vector<int32_t> perm(shuffled.size());
  int64_t global_step = 0;
  bool have_best = false;
  int32_t stale_epochs = 0;

  for (int32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    CollabGraph graph = rebuild_graph(
        model, cfg, graph_seeds.derive(uint64_t(epoch)).next_u64(), parallel);
    const CollabGraph* gp = graph.empty() ? nullptr : &graph;

    std::iota(perm.begin(), perm.end(), 0);
    root.derive("shuffle").derive(uint64_t(epoch)).shuffle(std::span<int32_t>(perm));
    for (size_t i = 0; i < perm.size(); ++i) {
      shuffled[i] = data.train.records[size_t(perm[i])];
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.graph_seconds = graph.build_seconds;
    stats.scoring_ops = graph.scoring_ops;
    result.scoring_ops_total += graph.scoring_ops;
    result.build_seconds_total += graph.build_seconds;

    RngStream eps_epoch = root.derive("reparam").derive(uint64_t(epoch));
    int64_t n = int64_t(shuffled.size());
    double w_total = 0.0;
    for (int64_t lo = 0, batch_idx = 0; lo < n; lo += cfg.batch, ++batch_idx) {
      int64_t hi = std::min<int64_t>(lo + cfg.batch, n);
      std::span<const Interaction> batch(shuffled.data() + lo, size_t(hi - lo));

      BatchEvalConfig bc;
      bc.alpha = cfg.alpha;
      bc.beta = beta_eff;
      bc.layers = cfg.layers;
      bc.sample = true;
      bc.parallel = parallel;
      bc.eps_root = eps_epoch.derive(uint64_t(batch_idx));

      for (std::vector<double>& g : grads.grads) {
        std::fill(g.begin(), g.end(), 0.0);
      }
      LossBreakdown b = batch_gradients(model, qm, gp, batch, bc, grads);
      adam_step(params, grads, cfg.lr, ++global_step);

      double w = double(b.n_records);
      stats.loss.total += b.total * w;
      stats.loss.bce_encoder += b.bce_encoder * w;
      stats.loss.kl += b.kl * w;
      stats.loss.bce_decoder += b.bce_decoder * w;
      stats.loss.n_records += b.n_records;
      w_total += w;
    }
    stats.loss.total /= w_total;
    stats.loss.bce_encoder /= w_total;
    stats.loss.kl /= w_total;
    stats.loss.bce_decoder /= w_total;

    if (has_valid) {
      std::vector<double> probs = predict_records(model, qm, gp,
                                                  data.valid.records,
                                                  cfg.layers, parallel);
      MetricReport report = compute_metrics(probs, data.valid.records);
      stats.val_acc = report.acc;
      stats.val_auc = report.auc;
      stats.val_auc_defined = report.auc_defined;
    }

    bool improved = stats.val_auc_defined &&
                    (!have_best || stats.val_auc > ckpt.best_val_auc);
    if (improved) {
      snapshot(ckpt, params, graph, epoch, stats.val_auc, true);
      have_best = true;
      stale_epochs = 0;
    } else if (have_best || stats.val_auc_defined) {
      ++stale_epochs;
    }

    if (log) log_epoch(*log, stats, has_valid);
    result.epochs.push_back(stats);

    if (cfg.patience > 0 && have_best && stale_epochs >= cfg.patience) {
      if (log) {
        *log << "early stop: no validation AUC gain in " << stale_epochs
             << " epochs\n";
      }
      // Final state is discarded; the snapshot from the best epoch wins.
      break;
    }

    if (!have_best && epoch == cfg.epochs) {
      // Keep the final state when validation never produced a usable AUC.
      snapshot(ckpt, params, graph, epoch, 0.0, false);
      if (log) {
        *log << (has_valid
                     ? "warning: validation AUC undefined every epoch; "
                       "keeping the final model\n"
                     : "warning: empty validation split; keeping the final "
                       "model\n");
      }
    }
  }
  return result;
}

}  // namespace coral
