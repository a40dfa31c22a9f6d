#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coral/data.hpp"
#include "coral/rng.hpp"

namespace coral {

struct NeighborEntry {
  int32_t v = -1;
  double f = 0.0;     // match score at selection time
  int32_t step = 0;   // 1-based position in the list
};

// Per-(learner, concept) neighbor lists plus construction metadata.
struct CollabGraph {
  int32_t learners = 0;
  int32_t concepts = 0;
  int32_t k = 0;
  std::vector<std::vector<NeighborEntry>> lists;  // index u * concepts + c
  uint64_t seed = 0;
  std::string policy;
  uint64_t scoring_ops = 0;
  double build_seconds = 0.0;  // not serialized

  const std::vector<NeighborEntry>& at(int32_t u, int32_t c) const {
    return lists[size_t(u) * size_t(concepts) + size_t(c)];
  }
  bool empty() const { return lists.empty() || k <= 0; }
};

// Candidate filtering for the greedy search:
//   base            score every non-neighbor each step
//   n-sample:<n>    score a fresh uniform sample of n candidates per step
//   m-select:<m>    take the top-m scored candidates per step
//   full-kit:<n>:<m> sample n, then take the top-m
struct CandidatePolicy {
  enum class Kind { kBase, kNSample, kMSelect, kFullKit };
  Kind kind = Kind::kBase;
  int32_t n = 0;
  int32_t m = 0;

  static CandidatePolicy parse(const std::string& text);
  std::string to_string() const;
};

// (z_u - z_v) / max(||z_u - z_v||, 1e-8); the self term uses z_u itself.
void relative_feature(std::span<const double> z_u, std::span<const double> z_v,
                      std::span<double> out);

// Sum of relative features over the context set (which contains u).
std::vector<double> context_vector(int32_t u, std::span<const int32_t> context,
                                   std::span<const double> z, int32_t dim);

double match_score(std::span<const double> z_v, std::span<const double> rc);

// Greedy context-aware selection for one (learner, concept) channel.
// z is the M x dim feature table for that concept. Appends the per-step
// number of scored candidates to *scoring_ops when given.
std::vector<NeighborEntry> select_neighbors(int32_t u, std::span<const double> z,
                                            int32_t m_learners, int32_t dim,
                                            int32_t k, const CandidatePolicy& policy,
                                            RngStream stream,
                                            uint64_t* scoring_ops = nullptr);

// Builds neighbor lists for every (learner, concept) pair from the
// M x C x dim posterior-mean table. Parallelizes over pairs; results are
// identical to the serial build.
CollabGraph build_graph(std::span<const double> means, int32_t m_learners,
                        int32_t concepts, int32_t dim, int32_t k,
                        const CandidatePolicy& policy, uint64_t seed,
                        bool parallel = true);

CollabGraph build_graph_serial(std::span<const double> means, int32_t m_learners,
                               int32_t concepts, int32_t dim, int32_t k,
                               const CandidatePolicy& policy, uint64_t seed);

// Euclidean k-nearest-neighbor lists with uniform f scores, used by the
// knn ablation.
CollabGraph build_knn_graph(std::span<const double> means, int32_t m_learners,
                            int32_t concepts, int32_t dim, int32_t k,
                            bool parallel = true);

void export_neighbors_csv(const CollabGraph& graph, const IdMap& learners,
                          const IdMap& concepts, const std::string& path);

}  // namespace coral
