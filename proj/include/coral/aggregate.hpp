#pragma once

#include <span>
#include <vector>

#include "coral/encoder.hpp"
#include "coral/graph.hpp"

namespace coral {

// Channel projector for concept c: l2-normalized sigmoid(W_c z + b_c).
// Every entry is positive and the output has unit norm.
void channel_project_value(const ModelRef& m, int32_t c,
                           std::span<const double> z, std::span<double> out);

// Softmax over the stored match scores of one neighbor list.
std::vector<double> f_softmax(std::span<const NeighborEntry> neighbors);

// Two-term attention: dot(zhat_u, zhat_v) / sum_j dot(zhat_u, zhat_j)
// plus softmax of the match scores. Weights sum to 2 over the list.
// zhat_neighbors is |N| x d, row per neighbor.
std::vector<double> attention_weights(std::span<const double> zhat_u,
                                      std::span<const double> zhat_neighbors,
                                      std::span<const double> f_weights,
                                      int32_t dim);

// Residuals r for every (learner, concept): `layers` rounds of attention
// aggregation over the graph. features is the M x C x d state table the
// projections read from (posterior means at inference time). Empty
// neighbor lists yield zero residuals.
std::vector<double> aggregate_all(const ModelRef& m, const CollabGraph& graph,
                                  std::span<const double> features, int32_t layers,
                                  bool parallel = true);

// z + r, same layout as features. With an empty graph this is a copy.
std::vector<double> fuse_states(std::span<const double> features,
                                std::span<const double> residuals);

}  // namespace coral
