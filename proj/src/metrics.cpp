#include "coral/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "coral/errors.hpp"
#include "coral/io_util.hpp"

namespace coral {

namespace {

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> values) {
  size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = 0.5 * double(i + j) + 1.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double auc_rank(std::span<const double> probs, std::span<const int8_t> labels) {
  if (probs.size() != labels.size()) throw ConfigError("auc: size mismatch");
  int64_t pos = 0, neg = 0;
  for (int8_t y : labels) (y ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nan("");
  std::vector<double> ranks = average_ranks(probs);
  double rank_sum = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) rank_sum += ranks[i];
  }
  return (rank_sum - 0.5 * double(pos) * double(pos + 1)) /
         (double(pos) * double(neg));
}

MetricReport compute_metrics(std::span<const double> probs,
                             std::span<const Interaction> records,
                             double threshold, const std::string& scenario) {
  if (probs.size() != records.size()) {
    throw ConfigError("compute_metrics: size mismatch");
  }
  if (probs.empty()) throw ConfigError("compute_metrics: no records");
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw NumericError("prediction outside [0,1]: " + std::to_string(p));
    }
  }

  MetricReport r;
  r.scenario = scenario;
  r.n_records = int64_t(records.size());
  r.threshold = threshold;

  int64_t correct = 0, tp = 0, fp = 0, fn = 0, pos = 0;
  double se = 0.0;
  std::vector<int8_t> labels(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    int8_t y = records[i].correct;
    labels[i] = y;
    pos += y;
    int pred = probs[i] >= threshold ? 1 : 0;
    correct += (pred == y);
    tp += (pred == 1 && y == 1);
    fp += (pred == 1 && y == 0);
    fn += (pred == 0 && y == 1);
    double diff = probs[i] - double(y);
    se += diff * diff;
  }
  r.acc = double(correct) / double(records.size());
  r.rmse = std::sqrt(se / double(records.size()));

  if (pos > 0) {
    r.f1_defined = true;
    r.f1 = (2 * tp + fp + fn) > 0 ? 2.0 * double(tp) / double(2 * tp + fp + fn)
                                  : 0.0;
  }

  double auc = auc_rank(probs, labels);
  if (!std::isnan(auc)) {
    r.auc_defined = true;
    r.auc = auc;
  }
  return r;
}

std::string metrics_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["scenario"] = report.scenario;
  j["n_records"] = report.n_records;
  j["threshold"] = report.threshold;
  j["acc"] = report.acc;
  j["rmse"] = report.rmse;
  std::vector<std::string> undefined;
  if (report.auc_defined) {
    j["auc"] = report.auc;
  } else {
    undefined.push_back("auc");
  }
  if (report.f1_defined) {
    j["f1"] = report.f1;
  } else {
    undefined.push_back("f1");
  }
  j["undefined_flags"] = undefined;
  return j.dump(2) + "\n";
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ConfigError("spearman: need two equal-length series");
  }
  std::vector<double> ra = average_ranks(a);
  std::vector<double> rb = average_ranks(b);
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= double(ra.size());
  mb /= double(rb.size());
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::nan("");
  return cov / std::sqrt(va * vb);
}

double independence_level_learner(std::span<const double> z_u, int32_t concepts,
                                  int32_t dim) {
  if (dim < 2) throw ConfigError("independence level needs dim >= 2");
  if (z_u.size() != size_t(concepts) * size_t(dim)) {
    throw ConfigError("independence level: bad state size");
  }
  double acc = 0.0;
  double pair_norm = 2.0 / (double(dim) * double(dim - 1));
  for (int32_t c = 0; c < concepts; ++c) {
    const double* z = z_u.data() + size_t(c) * size_t(dim);
    double sum = 0.0;
    for (int32_t i = 0; i < dim; ++i) {
      for (int32_t j = i + 1; j < dim; ++j) {
        sum += std::fabs(z[i] - z[j]);
      }
    }
    acc += pair_norm * sum;
  }
  return acc / double(concepts);
}

double independence_level_total(std::span<const double> states, int32_t learners,
                                int32_t concepts, int32_t dim) {
  if (states.size() != size_t(learners) * size_t(concepts) * size_t(dim)) {
    throw ConfigError("independence level: bad table size");
  }
  double total = 0.0;
  size_t row = size_t(concepts) * size_t(dim);
  for (int32_t u = 0; u < learners; ++u) {
    total += independence_level_learner(
        states.subspan(size_t(u) * row, row), concepts, dim);
  }
  return total;
}

std::vector<double> proficiency_from_states(std::span<const double> fused,
                                            int32_t learners, int32_t concepts,
                                            int32_t dim) {
  if (fused.size() != size_t(learners) * size_t(concepts) * size_t(dim)) {
    throw ConfigError("proficiency: bad table size");
  }
  std::vector<double> out(size_t(learners) * size_t(concepts));
  for (size_t i = 0; i < out.size(); ++i) {
    const double* z = fused.data() + i * size_t(dim);
    double acc = 0.0;
    for (int32_t t = 0; t < dim; ++t) acc += z[t];
    out[i] = acc / double(dim);
  }
  return out;
}

void export_embeddings_csv(std::span<const double> fused, const IdMap& learners,
                           const IdMap& concepts, int32_t dim,
                           const std::string& path) {
  std::ostringstream out;
  out << "learner_id,concept_id,dim,value\n";
  size_t idx = 0;
  for (int32_t u = 0; u < learners.size(); ++u) {
    for (int32_t c = 0; c < concepts.size(); ++c) {
      for (int32_t t = 0; t < dim; ++t, ++idx) {
        out << learners.names[size_t(u)] << ',' << concepts.names[size_t(c)]
            << ',' << t << ',' << format_double(fused[idx]) << '\n';
      }
    }
  }
  atomic_write_file(path, out.str());
}

void export_proficiency_csv(std::span<const double> proficiency,
                            const IdMap& learners, const IdMap& concepts,
                            bool percent, const std::string& path) {
  std::ostringstream out;
  out << (percent ? "learner_id,concept_id,proficiency,proficiency_pct\n"
                  : "learner_id,concept_id,proficiency\n");
  size_t idx = 0;
  for (int32_t u = 0; u < learners.size(); ++u) {
    for (int32_t c = 0; c < concepts.size(); ++c, ++idx) {
      out << learners.names[size_t(u)] << ',' << concepts.names[size_t(c)]
          << ',' << format_double(proficiency[idx]);
      if (percent) out << ',' << format_double(100.0 * proficiency[idx]);
      out << '\n';
    }
  }
  atomic_write_file(path, out.str());
}

}  // namespace coral
