#include "coral/bench.hpp"

#include <ostream>

#include "json.hpp"

#include "coral/errors.hpp"
#include "coral/model.hpp"

namespace coral {

std::vector<BenchReport> run_policy_sweep(const DatasetSplit& data,
                                          const QMatrix& qm,
                                          const TrainConfig& base_config,
                                          std::vector<CandidatePolicy> policies,
                                          std::ostream* log, bool parallel) {
  if (policies.empty() ||
      policies.front().kind != CandidatePolicy::Kind::kBase) {
    policies.insert(policies.begin(), CandidatePolicy{});
  }
  if (data.test.records.empty()) {
    throw DataError("policy sweep needs a non-empty test split");
  }

  std::vector<BenchReport> reports;
  reports.reserve(policies.size());
  for (const CandidatePolicy& policy : policies) {
    TrainConfig cfg = base_config;
    cfg.policy = policy;
    if (log) *log << "policy " << policy.to_string() << "\n";
    TrainResult tr = train(data, qm, cfg, log, parallel);

    Checkpoint& ckpt = tr.checkpoint;
    ModelRef m = ckpt.model();
    const CollabGraph* gp = ckpt.graph.empty() ? nullptr : &ckpt.graph;
    std::vector<double> probs =
        predict_records(m, qm, gp, data.test.records, cfg.layers, parallel);

    BenchReport r;
    r.policy = policy.to_string();
    r.scoring_ops_build = ckpt.graph.scoring_ops;
    r.scoring_ops_total = tr.scoring_ops_total;
    r.build_seconds_total = tr.build_seconds_total;
    r.best_epoch = ckpt.epoch;
    r.test = compute_metrics(probs, data.test.records);
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string bench_to_json(const std::vector<BenchReport>& reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const BenchReport& r : reports) {
    nlohmann::json item{{"policy", r.policy},
                        {"scoring_ops_build", r.scoring_ops_build},
                        {"scoring_ops_total", r.scoring_ops_total},
                        {"build_seconds_total", r.build_seconds_total},
                        {"best_epoch", r.best_epoch},
                        {"test", nlohmann::json::parse(metrics_to_json(r.test))}};
    out.push_back(std::move(item));
  }
  return out.dump(2) + "\n";
}

}  // namespace coral
