#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coral/data.hpp"
#include "coral/graph.hpp"
#include "coral/model.hpp"
#include "coral/param_store.hpp"

namespace coral {

enum class Ablation { kNone, kNoKl, kNoCollab, kKnn };

Ablation parse_ablation(const std::string& text);
const char* ablation_name(Ablation a);

struct TrainConfig {
  int32_t dim = 20;
  int32_t hidden = 16;
  int32_t layers = 2;
  int32_t batch = 512;
  double lr = 0.005;
  double alpha = 0.5;
  double beta = 0.5;
  int32_t k = 10;
  int32_t knn_k = 0;  // 0 means follow k
  int32_t epochs = 50;
  int32_t patience = 10;
  uint64_t seed = 0;
  CandidatePolicy policy;
  Ablation ablation = Ablation::kNone;

  int32_t effective_knn_k() const { return knn_k > 0 ? knn_k : k; }
};

// Validates ranges (hard errors) and returns one warning line per
// hyperparameter sitting outside its declared sweep grid.
std::vector<std::string> validate_config(const TrainConfig& cfg);

// key = value lines, '#' comments. Recognizes every TrainConfig field;
// unknown keys are rejected. Values override whatever is already in cfg
// (the CLI re-applies an explicit --seed afterwards).
void apply_config_file(const std::string& path, TrainConfig& cfg);

struct Checkpoint {
  static constexpr uint32_t kVersion = 1;
  TrainConfig config;
  ModelDims dims;
  IdMap learners;
  IdMap questions;
  IdMap concepts;
  ParamStore params;
  CollabGraph graph;  // graph of the selected epoch
  int32_t epoch = 0;
  double best_val_auc = 0.0;
  bool has_val_auc = false;

  ModelRef model() { return attach_model(params, dims); }
};

struct EpochStats {
  int32_t epoch = 0;
  LossBreakdown loss;
  double val_acc = 0.0;
  double val_auc = 0.0;
  bool val_auc_defined = false;
  double graph_seconds = 0.0;
  uint64_t scoring_ops = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> epochs;
  uint64_t scoring_ops_total = 0;
  double build_seconds_total = 0.0;
};

// Epoch loop: rebuild the neighbor graph from current posterior means
// (seed derived per epoch), take Adam steps over shuffled batches, score
// validation AUC, and keep the best-scoring snapshot. Early-stops after
// `patience` epochs without improvement. Fully deterministic for a given
// seed. Writes one log line per epoch to `log` when given.
TrainResult train(const DatasetSplit& data, const QMatrix& qm,
                  const TrainConfig& cfg, std::ostream* log = nullptr,
                  bool parallel = true);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace coral
