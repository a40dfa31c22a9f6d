#include "coral/irt.hpp"

#include <cmath>

#include "coral/errors.hpp"
#include "coral/param_store.hpp"

namespace coral {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double IrtModel::predict(int32_t u, int32_t q) const {
  return stable_sigmoid(ability[size_t(u)] - difficulty[size_t(q)]);
}

IrtModel fit_irt(std::span<const Interaction> train, int32_t learners,
                 int32_t questions, const IrtConfig& cfg) {
  if (train.empty()) throw DataError("IRT fit needs at least one record");
  if (learners < 1 || questions < 1) {
    throw ConfigError("IRT fit needs positive learner and question counts");
  }

  ParamStore params;
  int id_a = params.register_array("irt.a", {learners});
  int id_b = params.register_array("irt.b", {questions});
  GradResult grads = make_zero_grads(params);

  double inv_n = 1.0 / double(train.size());
  for (int32_t step = 1; step <= cfg.steps; ++step) {
    const std::vector<double>& a = params.array(id_a).value;
    const std::vector<double>& b = params.array(id_b).value;
    std::vector<double>& ga = grads.grads[size_t(id_a)];
    std::vector<double>& gb = grads.grads[size_t(id_b)];
    std::fill(ga.begin(), ga.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);

    for (const Interaction& r : train) {
      double p = stable_sigmoid(a[size_t(r.learner)] - b[size_t(r.question)]);
      double g = (p - double(r.correct)) * inv_n;
      ga[size_t(r.learner)] += g;
      gb[size_t(r.question)] -= g;
    }
    adam_step(params, grads, cfg.lr, step);
  }

  IrtModel model;
  model.learners = learners;
  model.questions = questions;
  model.ability = params.array(id_a).value;
  model.difficulty = params.array(id_b).value;
  return model;
}

MetricReport irt_baseline(const DatasetSplit& data, const IrtConfig& cfg) {
  IrtModel model = fit_irt(data.train.records, data.train.learner_count(),
                           data.train.question_count(), cfg);
  std::vector<double> probs;
  probs.reserve(data.test.records.size());
  for (const Interaction& r : data.test.records) {
    probs.push_back(model.predict(r.learner, r.question));
  }
  return compute_metrics(probs, data.test.records);
}

}  // namespace coral
