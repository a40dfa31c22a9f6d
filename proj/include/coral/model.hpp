#pragma once

#include <span>
#include <vector>

#include "coral/aggregate.hpp"
#include "coral/encoder.hpp"
#include "coral/graph.hpp"
#include "coral/tape.hpp"

namespace coral {

struct LossBreakdown {
  double total = 0.0;
  double bce_encoder = 0.0;
  double kl = 0.0;
  double bce_decoder = 0.0;
  int64_t n_records = 0;
};

struct BatchEvalConfig {
  double alpha = 1.0;
  double beta = 1.0;
  int32_t layers = 2;
  bool sample = true;      // reparameterized draws; false reads posterior means
  bool parallel = true;
  RngStream eps_root{0};   // stream for this batch's reparameterization noise
};

// Joint objective over one batch:
//   alpha * mean encoder BCE + beta * (sum of per-learner KL / batch size)
//   + mean decoder BCE
// where the decoder path runs each sampled state through the graph
// aggregation and the residual fusion z + r. Gradients are accumulated
// into `out` (zeroed buffers aligned with the store). Work is chunked by
// learner; chunk results are folded in a fixed order, so the numbers do
// not depend on thread count. Pass graph == nullptr to drop the
// collaborative path entirely (r = 0).
LossBreakdown batch_gradients(const ModelRef& m, const QMatrix& qm,
                              const CollabGraph* graph,
                              std::span<const Interaction> batch,
                              const BatchEvalConfig& cfg, GradResult& out);

// Same forward pass without the backward sweep.
LossBreakdown batch_loss(const ModelRef& m, const QMatrix& qm,
                         const CollabGraph* graph,
                         std::span<const Interaction> batch,
                         const BatchEvalConfig& cfg);

// Inference predictions: decoder path on posterior means. Used for
// validation, test metrics, and the diagnose/export commands.
std::vector<double> predict_records(const ModelRef& m, const QMatrix& qm,
                                    const CollabGraph* graph,
                                    std::span<const Interaction> records,
                                    int32_t layers, bool parallel = true);

// Fused states z + r on posterior means, M x C x d.
std::vector<double> fused_means(const ModelRef& m, const CollabGraph* graph,
                                int32_t layers, bool parallel = true);

}  // namespace coral
