#include "coral/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "coral/errors.hpp"
#include "coral/io_util.hpp"

namespace coral {

int32_t IdMap::add_or_get(const std::string& name) {
  auto it = index.find(name);
  if (it != index.end()) return it->second;
  int32_t id = int32_t(names.size());
  names.push_back(name);
  index.emplace(name, id);
  return id;
}

int32_t IdMap::get(const std::string& name) const {
  auto it = index.find(name);
  return it == index.end() ? -1 : it->second;
}

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kNormal:
      return "normal";
    case Scenario::kSparse:
      return "sparse";
    case Scenario::kColdStart:
      return "cold_start";
  }
  return "normal";
}

namespace {

struct RawRow {
  std::string learner, question;
  int8_t correct;
  double timestamp;
  size_t order;
};

[[noreturn]] void row_error(const std::string& path, size_t line_no,
                            const std::string& what) {
  throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
}

double parse_number(const std::string& s, const std::string& path,
                    size_t line_no, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    row_error(path, line_no, std::string("bad ") + what + ": '" + s + "'");
  }
}

}  // namespace

InteractionLog load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  auto header = split_csv_line(trim(line));
  bool with_ts = false;
  if (header.size() == 4 && trim(header[3]) == "timestamp") {
    with_ts = true;
  } else if (header.size() != 3) {
    throw DataError(path + ": expected header learner_id,question_id,correct[,timestamp]");
  }
  if (trim(header[0]) != "learner_id" || trim(header[1]) != "question_id" ||
      trim(header[2]) != "correct") {
    throw DataError(path + ": expected header learner_id,question_id,correct[,timestamp]");
  }

  std::vector<RawRow> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    auto cells = split_csv_line(t);
    if (cells.size() != (with_ts ? 4u : 3u)) {
      row_error(path, line_no, "wrong column count");
    }
    RawRow r;
    r.learner = trim(cells[0]);
    r.question = trim(cells[1]);
    if (r.learner.empty() || r.question.empty()) {
      row_error(path, line_no, "empty id");
    }
    std::string c = trim(cells[2]);
    if (c == "0") {
      r.correct = 0;
    } else if (c == "1") {
      r.correct = 1;
    } else {
      row_error(path, line_no, "correct must be 0 or 1, got '" + c + "'");
    }
    r.timestamp = with_ts ? parse_number(trim(cells[3]), path, line_no, "timestamp") : 0.0;
    r.order = rows.size();
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(path + ": no records");

  // First attempt per (learner, question): smallest timestamp, then file
  // order. Without timestamps file order alone decides.
  std::unordered_map<std::string, size_t> best;
  best.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    std::string key = rows[i].learner + "\x1f" + rows[i].question;
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(std::move(key), i);
    } else if (with_ts && rows[i].timestamp < rows[it->second].timestamp) {
      it->second = i;
    }
  }

  std::vector<size_t> kept;
  kept.reserve(best.size());
  for (auto& kv : best) kept.push_back(kv.second);
  std::sort(kept.begin(), kept.end());

  InteractionLog log;
  log.records.reserve(kept.size());
  for (size_t i : kept) {
    Interaction rec;
    rec.learner = log.learners.add_or_get(rows[i].learner);
    rec.question = log.questions.add_or_get(rows[i].question);
    rec.correct = rows[i].correct;
    log.records.push_back(rec);
  }
  return log;
}

QMatrix load_qmatrix(const std::string& path, const InteractionLog& log) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  auto header = split_csv_line(trim(line));
  if (header.size() != 2 || trim(header[0]) != "question_id" ||
      trim(header[1]) != "concept_id") {
    throw DataError(path + ": expected header question_id,concept_id");
  }

  QMatrix qm;
  qm.concepts_of.resize(size_t(log.question_count()));
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    auto cells = split_csv_line(t);
    if (cells.size() != 2) row_error(path, line_no, "wrong column count");
    std::string q = trim(cells[0]);
    std::string c = trim(cells[1]);
    if (q.empty() || c.empty()) row_error(path, line_no, "empty id");
    int32_t qi = log.questions.get(q);
    if (qi < 0) {
      row_error(path, line_no, "unknown question id '" + q + "'");
    }
    int32_t ci = qm.concepts.add_or_get(c);
    qm.concepts_of[size_t(qi)].push_back(ci);
  }

  for (int32_t q = 0; q < log.question_count(); ++q) {
    auto& list = qm.concepts_of[size_t(q)];
    if (list.empty()) {
      throw DataError(path + ": question '" + log.questions.names[size_t(q)] +
                      "' has no tagged concepts");
    }
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return qm;
}

void write_interactions(const InteractionLog& log, const std::string& path) {
  std::ostringstream out;
  out << "learner_id,question_id,correct\n";
  for (const Interaction& r : log.records) {
    out << log.learners.names[size_t(r.learner)] << ','
        << log.questions.names[size_t(r.question)] << ',' << int(r.correct)
        << '\n';
  }
  atomic_write_file(path, out.str());
}

void write_qmatrix(const QMatrix& qm, const InteractionLog& log,
                   const std::string& path) {
  std::ostringstream out;
  out << "question_id,concept_id\n";
  for (size_t q = 0; q < qm.concepts_of.size(); ++q) {
    for (int32_t c : qm.concepts_of[q]) {
      out << log.questions.names[q] << ',' << qm.concepts.names[size_t(c)]
          << '\n';
    }
  }
  atomic_write_file(path, out.str());
}

namespace {

InteractionLog subset_log(const InteractionLog& src,
                          const std::vector<size_t>& indices) {
  InteractionLog out;
  out.learners = src.learners;
  out.questions = src.questions;
  out.records.reserve(indices.size());
  for (size_t i : indices) out.records.push_back(src.records[i]);
  return out;
}

}  // namespace

DatasetSplit split_dataset(const InteractionLog& log, double train_ratio,
                           double valid_ratio, double test_ratio,
                           uint64_t seed) {
  double total = train_ratio + valid_ratio + test_ratio;
  if (!(train_ratio > 0.0) || valid_ratio < 0.0 || test_ratio < 0.0 ||
      std::fabs(total - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }

  std::vector<std::vector<size_t>> by_learner(size_t(log.learner_count()));
  for (size_t i = 0; i < log.records.size(); ++i) {
    by_learner[size_t(log.records[i].learner)].push_back(i);
  }

  RngStream root = RngStream(seed).derive("split");
  std::vector<size_t> train_idx, valid_idx, test_idx;
  for (int32_t u = 0; u < log.learner_count(); ++u) {
    std::vector<size_t>& own = by_learner[size_t(u)];
    if (own.size() < 3) {
      train_idx.insert(train_idx.end(), own.begin(), own.end());
      continue;
    }
    RngStream stream = root.derive(uint64_t(u));
    stream.shuffle(std::span<size_t>(own));
    size_t n = own.size();
    size_t n_valid = size_t(std::floor(double(n) * valid_ratio));
    size_t n_test = size_t(std::floor(double(n) * test_ratio));
    for (size_t i = 0; i < n; ++i) {
      if (i < n_valid) {
        valid_idx.push_back(own[i]);
      } else if (i < n_valid + n_test) {
        test_idx.push_back(own[i]);
      } else {
        train_idx.push_back(own[i]);
      }
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(valid_idx.begin(), valid_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  DatasetSplit out;
  out.train = subset_log(log, train_idx);
  out.valid = subset_log(log, valid_idx);
  out.test = subset_log(log, test_idx);
  out.seed = seed;
  return out;
}

DatasetSplit make_sparse(const DatasetSplit& base, double p, uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("sparse fraction must be in [0, 1)");
  DatasetSplit out = base;
  out.scenario = Scenario::kSparse;
  out.sparse_p = p;
  size_t drop = size_t(std::floor(p * double(base.train.records.size())));
  if (drop == 0) return out;

  std::vector<size_t> idx(base.train.records.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  RngStream stream = RngStream(seed).derive("sparse");
  stream.shuffle(std::span<size_t>(idx));
  idx.resize(idx.size() - drop);
  std::sort(idx.begin(), idx.end());
  out.train = subset_log(base.train, idx);
  return out;
}

DatasetSplit make_cold_start(const DatasetSplit& base, const QMatrix& qm) {
  // Concepts each learner saw during training.
  std::vector<std::vector<char>> seen(size_t(base.train.learner_count()),
                                      std::vector<char>(size_t(qm.concept_count()), 0));
  for (const Interaction& r : base.train.records) {
    for (int32_t c : qm.tagged(r.question)) {
      seen[size_t(r.learner)][size_t(c)] = 1;
    }
  }

  std::vector<size_t> kept;
  for (size_t i = 0; i < base.test.records.size(); ++i) {
    const Interaction& r = base.test.records[i];
    bool all_unseen = true;
    for (int32_t c : qm.tagged(r.question)) {
      if (seen[size_t(r.learner)][size_t(c)]) {
        all_unseen = false;
        break;
      }
    }
    if (all_unseen) kept.push_back(i);
  }
  if (kept.empty()) {
    throw DataError(
        "cold-start filter removed every test record; try another split seed");
  }

  DatasetSplit out = base;
  out.scenario = Scenario::kColdStart;
  out.test = subset_log(base.test, kept);
  return out;
}

double synthetic_response_prob(double mean_proficiency, double difficulty,
                               double steepness) {
  double x = steepness * (mean_proficiency - difficulty);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.learners < 1 || spec.questions < 1 || spec.concepts < 1 ||
      spec.groups < 1) {
    throw ConfigError("synthetic sizes must be positive");
  }
  if (spec.groups > spec.learners) {
    throw ConfigError("more groups than learners");
  }
  if (spec.min_concepts_per_question < 1 ||
      spec.max_concepts_per_question < spec.min_concepts_per_question ||
      spec.max_concepts_per_question > spec.concepts) {
    throw ConfigError("bad concepts-per-question range");
  }
  if (spec.sigma_p < 0.0) throw ConfigError("sigma_p must be non-negative");
  if (!(spec.steepness > 0.0)) throw ConfigError("steepness must be positive");

  RngStream root(spec.seed);
  RngStream proto_stream = root.derive("prototypes");
  RngStream prof_stream = root.derive("proficiency");
  RngStream diff_stream = root.derive("difficulty");
  RngStream tag_stream = root.derive("tags");
  RngStream resp_stream = root.derive("responses");

  int32_t M = spec.learners, N = spec.questions, C = spec.concepts;

  std::vector<double> prototypes(size_t(spec.groups) * size_t(C));
  for (double& v : prototypes) v = proto_stream.next_double();

  GroundTruth truth;
  truth.learners = M;
  truth.concepts = C;
  truth.proficiency.resize(size_t(M) * size_t(C));
  truth.group.resize(size_t(M));
  for (int32_t u = 0; u < M; ++u) {
    int32_t g = u % spec.groups;
    truth.group[size_t(u)] = g;
    RngStream stream = prof_stream.derive(uint64_t(u));
    for (int32_t c = 0; c < C; ++c) {
      double v = prototypes[size_t(g) * size_t(C) + size_t(c)] +
                 spec.sigma_p * stream.next_normal();
      truth.proficiency[size_t(u) * size_t(C) + size_t(c)] =
          std::min(std::max(v, 0.0), 1.0);
    }
  }

  truth.difficulty.resize(size_t(N));
  for (double& v : truth.difficulty) v = diff_stream.next_double();

  SyntheticData out;
  for (int32_t u = 0; u < M; ++u) {
    out.log.learners.add_or_get("u" + std::to_string(u));
  }
  for (int32_t q = 0; q < N; ++q) {
    out.log.questions.add_or_get("q" + std::to_string(q));
  }
  for (int32_t c = 0; c < C; ++c) {
    out.qmatrix.concepts.add_or_get("c" + std::to_string(c));
  }

  out.qmatrix.concepts_of.resize(size_t(N));
  for (int32_t q = 0; q < N; ++q) {
    RngStream stream = tag_stream.derive(uint64_t(q));
    int32_t span = spec.max_concepts_per_question - spec.min_concepts_per_question + 1;
    int32_t count = spec.min_concepts_per_question +
                    int32_t(stream.next_below(uint64_t(span)));
    std::vector<int32_t> pool(static_cast<size_t>(C));
    for (int32_t c = 0; c < C; ++c) pool[size_t(c)] = c;
    // Partial Fisher-Yates: first `count` entries are a uniform draw
    // without replacement.
    for (int32_t i = 0; i < count; ++i) {
      int32_t j = i + int32_t(stream.next_below(uint64_t(C - i)));
      std::swap(pool[size_t(i)], pool[size_t(j)]);
    }
    pool.resize(size_t(count));
    std::sort(pool.begin(), pool.end());
    out.qmatrix.concepts_of[size_t(q)] = std::move(pool);
  }

  out.log.records.reserve(size_t(M) * size_t(N));
  for (int32_t u = 0; u < M; ++u) {
    RngStream stream = resp_stream.derive(uint64_t(u));
    for (int32_t q = 0; q < N; ++q) {
      const auto& tags = out.qmatrix.concepts_of[size_t(q)];
      double mean_prof = 0.0;
      for (int32_t c : tags) mean_prof += truth.prof(u, c);
      mean_prof /= double(tags.size());
      double p = synthetic_response_prob(mean_prof, truth.difficulty[size_t(q)],
                                         spec.steepness);
      Interaction rec;
      rec.learner = u;
      rec.question = q;
      rec.correct = stream.next_double() < p ? 1 : 0;
      out.log.records.push_back(rec);
    }
  }

  out.truth = std::move(truth);
  return out;
}

void write_ground_truth(const GroundTruth& truth, const InteractionLog& log,
                        const QMatrix& qm, const std::string& proficiency_path,
                        const std::string& groups_path) {
  std::ostringstream prof;
  prof << "learner_id,concept_id,proficiency\n";
  for (int32_t u = 0; u < truth.learners; ++u) {
    for (int32_t c = 0; c < truth.concepts; ++c) {
      prof << log.learners.names[size_t(u)] << ',' << qm.concepts.names[size_t(c)]
           << ',' << format_double(truth.prof(u, c)) << '\n';
    }
  }
  atomic_write_file(proficiency_path, prof.str());

  std::ostringstream grp;
  grp << "learner_id,group\n";
  for (int32_t u = 0; u < truth.learners; ++u) {
    grp << log.learners.names[size_t(u)] << ',' << truth.group[size_t(u)] << '\n';
  }
  atomic_write_file(groups_path, grp.str());
}

}  // namespace coral
