#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "coral/bench.hpp"
#include "coral/data.hpp"
#include "coral/errors.hpp"
#include "coral/irt.hpp"
#include "coral/metrics.hpp"
#include "coral/model.hpp"
#include "coral/trainer.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace coral;

namespace {

std::vector<Interaction> label_records(const std::vector<int8_t>& labels) {
  std::vector<Interaction> out;
  out.reserve(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    out.push_back({int32_t(i), 0, labels[i]});
  return out;
}

}  // namespace

TEST_CASE("compute_metrics worked examples") {
  SUBCASE("perfect two-record split") {
    std::vector<double> probs{0.9, 0.1};
    auto recs = label_records({1, 0});
    MetricReport r = compute_metrics(probs, recs);
    CHECK(r.acc == 1.0);
    CHECK(r.auc_defined);
    CHECK(r.auc == 1.0);
    CHECK(r.f1_defined);
    CHECK(r.f1 == 1.0);
    CHECK(r.rmse == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.n_records == 2);
    CHECK(r.threshold == 0.5);
    CHECK(r.scenario == "normal");
  }
  SUBCASE("uninformative scores on a balanced set") {
    std::vector<double> probs{0.5, 0.5, 0.5, 0.5};
    auto recs = label_records({1, 0, 1, 0});
    MetricReport r = compute_metrics(probs, recs);
    CHECK(r.auc == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.acc == 0.5);  // >= threshold predicts 1 for everything
    CHECK(r.rmse == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("single-class labels flag the undefined statistics") {
    std::vector<double> probs{0.6, 0.7};
    MetricReport pos_only = compute_metrics(probs, label_records({1, 1}));
    CHECK_FALSE(pos_only.auc_defined);
    CHECK(pos_only.f1_defined);

    MetricReport neg_only = compute_metrics(probs, label_records({0, 0}));
    CHECK_FALSE(neg_only.auc_defined);
    CHECK_FALSE(neg_only.f1_defined);
  }
  SUBCASE("threshold is inclusive and adjustable") {
    std::vector<double> probs{0.5};
    MetricReport r = compute_metrics(probs, label_records({1}));
    CHECK(r.acc == 1.0);
    r = compute_metrics(probs, label_records({1}), 0.6, "sparse");
    CHECK(r.acc == 0.0);
    CHECK(r.scenario == "sparse");
  }
  SUBCASE("bad inputs are rejected") {
    std::vector<double> probs{0.5, 0.5};
    auto recs = label_records({1, 0});
    CHECK_THROWS_AS(
        (void)compute_metrics(std::span<const double>(probs.data(), 1), recs),
        ConfigError);
    CHECK_THROWS_AS((void)compute_metrics({}, {}), ConfigError);
    std::vector<double> high{1.2, 0.3};
    CHECK_THROWS_AS((void)compute_metrics(high, recs), NumericError);
    std::vector<double> nan_probs{std::nan(""), 0.3};
    CHECK_THROWS_AS((void)compute_metrics(nan_probs, recs), NumericError);
  }
}

TEST_CASE("rank auc equals the pairwise definition on small sets") {
  RngStream root(301);
  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    RngStream s = root.derive(uint64_t(trial));
    size_t n = 2 + s.next_below(49);
    std::vector<double> probs(n);
    std::vector<int8_t> labels(n);
    for (size_t i = 0; i < n; ++i) {
      // lattice scores force plenty of exact ties
      probs[i] = double(s.next_below(8)) / 8.0;
      labels[i] = int8_t(s.next_below(2));
    }
    double got = auc_rank(probs, labels);
    double want = oracle::pairwise_auc(probs, labels);
    if (std::isnan(want)) {
      CHECK(std::isnan(got));
      continue;
    }
    CHECK(got == want);
    ++compared;
  }
  CHECK(compared > 30);
}

TEST_CASE("metrics json carries the schema and the undefined flags") {
  std::vector<double> probs{0.9, 0.2, 0.7};
  auto recs = label_records({1, 0, 1});
  MetricReport r = compute_metrics(probs, recs, 0.5, "cold_start");
  nlohmann::json j = nlohmann::json::parse(metrics_to_json(r));
  CHECK(j.at("scenario") == "cold_start");
  CHECK(j.at("n_records") == 3);
  CHECK(j.at("threshold") == 0.5);
  CHECK(j.at("acc").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("auc").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("f1").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("rmse").get<double>() > 0.0);
  CHECK(j.at("undefined_flags").empty());

  MetricReport oneclass = compute_metrics(probs, label_records({1, 1, 1}));
  nlohmann::json j2 = nlohmann::json::parse(metrics_to_json(oneclass));
  CHECK_FALSE(j2.contains("auc"));
  CHECK(j2.contains("f1"));
  std::vector<std::string> flags =
      j2.at("undefined_flags").get<std::vector<std::string>>();
  CHECK(flags == std::vector<std::string>{"auc"});
}

TEST_CASE("spearman rank correlation") {
  std::vector<double> a{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> up{2.0, 4.0, 6.0, 8.0, 10.0};
  std::vector<double> down{5.0, 4.0, 3.0, 2.0, 1.0};
  CHECK(spearman(a, up) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(a, down) == doctest::Approx(-1.0).epsilon(1e-12));

  // any monotone transform leaves the statistic at 1
  std::vector<double> warped(a.size());
  for (size_t i = 0; i < a.size(); ++i) warped[i] = std::exp(a[i]);
  CHECK(spearman(a, warped) == doctest::Approx(1.0).epsilon(1e-12));

  // ties share average ranks; a hand-checked example
  std::vector<double> x{1.0, 1.0, 2.0};
  std::vector<double> y{1.0, 2.0, 3.0};
  // ranks x = {1.5, 1.5, 3}, y = {1, 2, 3}: cov = 1.5, va = 1.5, vb = 2
  CHECK(spearman(x, y) ==
        doctest::Approx(1.5 / std::sqrt(1.5 * 2.0)).epsilon(1e-12));

  std::vector<double> flat{2.0, 2.0, 2.0};
  CHECK(std::isnan(spearman(flat, y)));

  std::vector<double> one{1.0};
  CHECK_THROWS_AS((void)spearman(one, one), ConfigError);
  CHECK_THROWS_AS((void)spearman(a, x), ConfigError);
}

TEST_CASE("independence level") {
  SUBCASE("hand values") {
    std::vector<double> z{0.0, 1.0};
    CHECK(independence_level_learner(z, 1, 2) == doctest::Approx(1.0));
    std::vector<double> flat{0.3, 0.3, 0.3};
    CHECK(independence_level_learner(flat, 1, 3) == 0.0);
    // two concepts, d = 2: mean of |gaps| 1 and 3
    std::vector<double> two{0.0, 1.0, 5.0, 2.0};
    CHECK(independence_level_learner(two, 2, 2) == doctest::Approx(2.0));
  }
  SUBCASE("coordinate permutations leave it unchanged") {
    RngStream s(618);
    std::vector<double> z(6);
    for (double& v : z) v = s.next_uniform(-2.0, 2.0);
    double base = independence_level_learner(z, 1, 6);
    std::vector<double> rev(z.rbegin(), z.rend());
    CHECK(independence_level_learner(rev, 1, 6) ==
          doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("total sums the per-learner levels") {
    std::vector<double> table{0.0, 1.0, 0.5, 0.5, 2.0, -1.0, 0.0, 0.0};
    double total = independence_level_total(table, 2, 2, 2);
    double want =
        independence_level_learner(std::span<const double>(table.data(), 4), 2, 2) +
        independence_level_learner(std::span<const double>(table.data() + 4, 4),
                                   2, 2);
    CHECK(total == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("degenerate shapes are rejected") {
    std::vector<double> z{0.0, 1.0};
    CHECK_THROWS_AS((void)independence_level_learner(z, 2, 1), ConfigError);
    CHECK_THROWS_AS((void)independence_level_learner(z, 3, 2), ConfigError);
    CHECK_THROWS_AS((void)independence_level_total(z, 4, 1, 2), ConfigError);
  }
}

TEST_CASE("proficiency readout is the per-pair coordinate mean") {
  std::vector<double> fused{0.4, 0.6, 1.0, 0.0};
  auto prof = proficiency_from_states(fused, 1, 2, 2);
  REQUIRE(prof.size() == 2);
  CHECK(prof[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(prof[1] == doctest::Approx(0.5).epsilon(1e-15));

  for (double& v : fused) v += 0.25;
  auto shifted = proficiency_from_states(fused, 1, 2, 2);
  CHECK(shifted[0] == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS_AS((void)proficiency_from_states(fused, 2, 2, 2), ConfigError);
}

TEST_CASE("irt fit learns an always-correct learner") {
  std::vector<Interaction> train{{0, 0, 1}, {0, 1, 1}, {0, 0, 1}, {0, 1, 1}};
  IrtModel m = fit_irt(train, 1, 2);
  CHECK(m.predict(0, 0) > 0.9);
  CHECK(m.predict(0, 1) > 0.9);

  IrtModel again = fit_irt(train, 1, 2);
  CHECK(again.ability == m.ability);
  CHECK(again.difficulty == m.difficulty);

  CHECK_THROWS_AS((void)fit_irt({}, 1, 2), DataError);
  CHECK_THROWS_AS((void)fit_irt(train, 0, 2), ConfigError);
}

TEST_CASE("irt separates easy and hard questions") {
  // learners answer question 0 correctly and question 1 incorrectly
  std::vector<Interaction> train;
  for (int32_t u = 0; u < 6; ++u) {
    train.push_back({u, 0, 1});
    train.push_back({u, 1, 0});
  }
  IrtModel m = fit_irt(train, 6, 2);
  CHECK(m.difficulty[0] < m.difficulty[1]);
  for (int32_t u = 0; u < 6; ++u) {
    CHECK(m.predict(u, 0) > 0.7);
    CHECK(m.predict(u, 1) < 0.3);
  }
}

TEST_CASE("irt baseline tracks signal and stays flat on noise") {
  SUBCASE("clustered synthetic data is learnable") {
    SyntheticSpec spec;
    spec.learners = 40;
    spec.questions = 30;
    spec.concepts = 4;
    spec.groups = 3;
    spec.seed = 7;
    SyntheticData data = generate_synthetic(spec);
    DatasetSplit split = split_dataset(data.log, 0.7, 0.1, 0.2, 8);
    MetricReport r = irt_baseline(split);
    CHECK(r.auc_defined);
    CHECK(r.auc > 0.55);
    CHECK(r.n_records == int64_t(split.test.records.size()));
  }
  SUBCASE("coin-flip labels give no separation") {
    RngStream s(92);
    InteractionLog log;
    for (int u = 0; u < 20; ++u) {
      int32_t ui = log.learners.add_or_get("u" + std::to_string(u));
      for (int q = 0; q < 20; ++q) {
        int32_t qi = log.questions.add_or_get("q" + std::to_string(q));
        log.records.push_back({ui, qi, int8_t(s.next_below(2))});
      }
    }
    DatasetSplit split = split_dataset(log, 0.7, 0.1, 0.2, 17);
    MetricReport r = irt_baseline(split);
    CHECK(r.auc_defined);
    CHECK(r.auc > 0.25);
    CHECK(r.auc < 0.75);
  }
}

TEST_CASE("policy sweep reports the base reference first") {
  SyntheticSpec spec;
  spec.learners = 12;
  spec.questions = 10;
  spec.concepts = 2;
  spec.groups = 3;
  spec.seed = 31;
  SyntheticData data = generate_synthetic(spec);
  DatasetSplit split = split_dataset(data.log, 0.7, 0.1, 0.2, 32);
  REQUIRE_FALSE(split.test.records.empty());

  TrainConfig cfg;
  cfg.dim = 3;
  cfg.hidden = 4;
  cfg.batch = 32;
  cfg.epochs = 2;
  cfg.patience = 0;
  cfg.k = 2;
  cfg.seed = 5;

  SUBCASE("base is prepended when missing and kept when given") {
    auto reports = run_policy_sweep(split, data.qmatrix, cfg,
                                    {CandidatePolicy::parse("full-kit:6:2")});
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].policy == "base");
    CHECK(reports[1].policy == "full-kit:6:2");

    auto kept = run_policy_sweep(
        split, data.qmatrix, cfg,
        {CandidatePolicy{}, CandidatePolicy::parse("m-select:2")});
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].policy == "base");
    CHECK(kept[1].policy == "m-select:2");
    CHECK(kept[0].test.acc == reports[0].test.acc);
  }

  SUBCASE("a sample pool covering every candidate reproduces base exactly") {
    auto reports = run_policy_sweep(split, data.qmatrix, cfg,
                                    {CandidatePolicy::parse("n-sample:12")});
    REQUIRE(reports.size() == 2);
    CHECK(reports[1].scoring_ops_total == reports[0].scoring_ops_total);
    CHECK(reports[1].test.acc == reports[0].test.acc);
    CHECK(reports[1].test.rmse == reports[0].test.rmse);
    CHECK(reports[1].best_epoch == reports[0].best_epoch);
  }

  SUBCASE("json serialization round-trips the fields") {
    auto reports = run_policy_sweep(split, data.qmatrix, cfg, {});
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].test.acc >= 0.0);
    CHECK(reports[0].test.acc <= 1.0);
    CHECK(reports[0].test.rmse >= 0.0);
    CHECK(reports[0].scoring_ops_build > 0);
    CHECK(reports[0].scoring_ops_total >= reports[0].scoring_ops_build);

    nlohmann::json j = nlohmann::json::parse(bench_to_json(reports));
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 1);
    CHECK(j[0].at("policy") == "base");
    CHECK(j[0].at("scoring_ops_build").get<uint64_t>() ==
          reports[0].scoring_ops_build);
    CHECK(j[0].at("test").contains("acc"));
  }

  SUBCASE("an empty test split is rejected") {
    DatasetSplit no_test = split;
    no_test.test.records.clear();
    CHECK_THROWS_AS(
        (void)run_policy_sweep(no_test, data.qmatrix, cfg, {}), DataError);
  }
}
