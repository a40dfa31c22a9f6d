#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coral/metrics.hpp"
#include "coral/trainer.hpp"

namespace coral {

struct BenchReport {
  std::string policy;
  uint64_t scoring_ops_build = 0;  // one rebuild (the selected epoch's)
  uint64_t scoring_ops_total = 0;  // summed over every epoch's rebuild
  double build_seconds_total = 0.0;
  int32_t best_epoch = 0;
  MetricReport test;
};

// Trains one model per candidate policy with a shared config/seed and
// reports the instrumented graph counters next to test metrics. The base
// policy is prepended as the reference when the list does not already
// start with it.
std::vector<BenchReport> run_policy_sweep(const DatasetSplit& data,
                                          const QMatrix& qm,
                                          const TrainConfig& base_config,
                                          std::vector<CandidatePolicy> policies,
                                          std::ostream* log = nullptr,
                                          bool parallel = true);

std::string bench_to_json(const std::vector<BenchReport>& reports);

}  // namespace coral
