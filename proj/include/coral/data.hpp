#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "coral/rng.hpp"

namespace coral {

struct Interaction {
  int32_t learner = 0;
  int32_t question = 0;
  int8_t correct = 0;
};

// String ids mapped to dense indices in first-appearance order.
struct IdMap {
  std::vector<std::string> names;
  std::unordered_map<std::string, int32_t> index;

  int32_t add_or_get(const std::string& name);
  int32_t get(const std::string& name) const;  // -1 if absent
  int32_t size() const { return int32_t(names.size()); }
};

struct InteractionLog {
  std::vector<Interaction> records;
  IdMap learners;
  IdMap questions;

  int32_t learner_count() const { return learners.size(); }
  int32_t question_count() const { return questions.size(); }
};

struct QMatrix {
  std::vector<std::vector<int32_t>> concepts_of;  // per question, sorted
  IdMap concepts;

  int32_t concept_count() const { return concepts.size(); }
  const std::vector<int32_t>& tagged(int32_t question) const {
    return concepts_of[size_t(question)];
  }
};

enum class Scenario { kNormal, kSparse, kColdStart };

const char* scenario_name(Scenario s);

struct DatasetSplit {
  InteractionLog train;
  InteractionLog valid;
  InteractionLog test;
  uint64_t seed = 0;
  Scenario scenario = Scenario::kNormal;
  double sparse_p = 0.0;
};

// Loads `learner_id,question_id,correct[,timestamp]`. For repeated
// (learner, question) pairs only the first attempt is kept: smallest
// timestamp when the column is present (file order breaking ties),
// file order otherwise.
InteractionLog load_interactions(const std::string& path);

// Loads `question_id,concept_id` pairs. Every question in the log must
// appear, and every question in the file must exist in the log.
QMatrix load_qmatrix(const std::string& path, const InteractionLog& log);

void write_interactions(const InteractionLog& log, const std::string& path);
void write_qmatrix(const QMatrix& qm, const InteractionLog& log,
                   const std::string& path);

// Per-learner stratified split. Each learner's records are shuffled with a
// stream derived from (seed, learner); floor(n * valid_ratio) go to
// validation, floor(n * test_ratio) to test, the remainder to train.
// Learners with fewer than 3 records contribute to train only.
DatasetSplit split_dataset(const InteractionLog& log, double train_ratio,
                           double valid_ratio, double test_ratio,
                           uint64_t seed);

// Uniformly removes floor(p * |train|) training records. Validation and
// test are untouched.
DatasetSplit make_sparse(const DatasetSplit& base, double p, uint64_t seed);

// Keeps only test records whose tagged concepts are all unseen in the
// learner's training records. Errors if nothing survives.
DatasetSplit make_cold_start(const DatasetSplit& base, const QMatrix& qm);

struct SyntheticSpec {
  int32_t learners = 200;   // M
  int32_t questions = 100;  // N
  int32_t concepts = 8;     // C
  int32_t groups = 5;       // G
  double sigma_p = 0.1;
  double steepness = 4.0;   // s
  int32_t min_concepts_per_question = 1;
  int32_t max_concepts_per_question = 2;
  uint64_t seed = 0;
};

struct GroundTruth {
  int32_t learners = 0;
  int32_t concepts = 0;
  std::vector<double> proficiency;  // learners x concepts
  std::vector<int32_t> group;       // per learner
  std::vector<double> difficulty;   // per question

  double prof(int32_t u, int32_t c) const {
    return proficiency[size_t(u) * size_t(concepts) + size_t(c)];
  }
};

struct SyntheticData {
  InteractionLog log;
  QMatrix qmatrix;
  GroundTruth truth;
};

// Clustered generator: G prototype vectors uniform in [0,1]^C, learner u
// joins group u mod G with proficiency clamp(prototype + N(0, sigma_p^2)),
// question difficulty uniform in [0,1], and
// P(correct) = sigmoid(s * (mean tagged proficiency - difficulty)).
// Every (learner, question) pair is emitted once.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

double synthetic_response_prob(double mean_proficiency, double difficulty,
                               double steepness);

void write_ground_truth(const GroundTruth& truth, const InteractionLog& log,
                        const QMatrix& qm, const std::string& proficiency_path,
                        const std::string& groups_path);

}  // namespace coral
