#pragma once

#include <span>
#include <string>
#include <vector>

#include "coral/data.hpp"
#include "coral/encoder.hpp"
#include "coral/graph.hpp"

namespace coral {

struct MetricReport {
  std::string scenario = "normal";
  int64_t n_records = 0;
  double threshold = 0.5;
  double acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double rmse = 0.0;
  bool auc_defined = false;
  bool f1_defined = false;
};

// ACC / F1 at the threshold, rank-based AUC with tied scores counted 1/2,
// RMSE against the 0/1 labels. Single-class inputs leave AUC (and F1 when
// there are no positive labels) flagged undefined instead of emitting NaN.
MetricReport compute_metrics(std::span<const double> probs,
                             std::span<const Interaction> records,
                             double threshold = 0.5,
                             const std::string& scenario = "normal");

// Rank statistic AUC; NaN when a class is missing.
double auc_rank(std::span<const double> probs, std::span<const int8_t> labels);

std::string metrics_to_json(const MetricReport& report);

// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

// Mean pairwise absolute coordinate gap of one C x d state block,
// averaged over concepts: (1/C) sum_c (2 / (d(d-1))) sum_{i<j} |z_i - z_j|.
double independence_level_learner(std::span<const double> z_u, int32_t concepts,
                                  int32_t dim);

// Sum over learners of the per-learner level, on an M x C x d table.
double independence_level_total(std::span<const double> states, int32_t learners,
                                int32_t concepts, int32_t dim);

// Mean over dimensions of the fused state, per (learner, concept): the
// diagnosed proficiency readout. Returns M x C.
std::vector<double> proficiency_from_states(std::span<const double> fused,
                                            int32_t learners, int32_t concepts,
                                            int32_t dim);

void export_embeddings_csv(std::span<const double> fused, const IdMap& learners,
                           const IdMap& concepts, int32_t dim,
                           const std::string& path);

void export_proficiency_csv(std::span<const double> proficiency,
                            const IdMap& learners, const IdMap& concepts,
                            bool percent, const std::string& path);

}  // namespace coral
