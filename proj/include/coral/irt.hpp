#pragma once

#include <span>
#include <vector>

#include "coral/data.hpp"
#include "coral/metrics.hpp"

namespace coral {

struct IrtConfig {
  double lr = 0.05;
  int32_t steps = 500;
};

// One ability scalar per learner, one difficulty scalar per question,
// p = sigmoid(a_u - b_i). The sanity comparator for the full model.
struct IrtModel {
  int32_t learners = 0;
  int32_t questions = 0;
  std::vector<double> ability;
  std::vector<double> difficulty;

  double predict(int32_t u, int32_t q) const;
};

// Full-batch Adam on the mean BCE. Parameters start at zero, so the fit
// is deterministic with no seed involved.
IrtModel fit_irt(std::span<const Interaction> train, int32_t learners,
                 int32_t questions, const IrtConfig& cfg = {});

// Fit on the split's training records, score its test records.
MetricReport irt_baseline(const DatasetSplit& data, const IrtConfig& cfg = {});

}  // namespace coral
