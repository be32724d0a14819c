#include <cmath>
#include <vector>

#include "doctest.h"
#include "modfront/errors.hpp"
#include "modfront/metrics.hpp"
#include "oracles.hpp"

using namespace modfront;

TEST_CASE("perfect ranking scores a full roc auc") {
  auto auc = roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
  REQUIRE(auc.has_value());
  CHECK(*auc == 1.0);
}

TEST_CASE("all-tied scores give half") {
  auto auc = roc_auc({0.4, 0.4, 0.4, 0.4}, {0, 1, 0, 1});
  REQUIRE(auc.has_value());
  CHECK(*auc == 0.5);
}

TEST_CASE("a mixed ranking counts exactly its winning pairs") {
  std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
  std::vector<int> labels = {0, 0, 1, 1};
  auto auc = roc_auc(scores, labels);
  REQUIRE(auc.has_value());
  CHECK(*auc == 0.75);  // 3 of 4 positive/negative pairs ranked correctly
  CHECK(*auc == *oracle::brute_roc(scores, labels));
}

TEST_CASE("single-class inputs have no roc auc") {
  CHECK_FALSE(roc_auc({0.1, 0.2}, {1, 1}).has_value());
  CHECK_FALSE(roc_auc({0.1, 0.2}, {0, 0}).has_value());
}

TEST_CASE("roc auc is invariant under strictly increasing score transforms") {
  Rng rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 4 + rng.index(12);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-2.0, 2.0);
      labels[i] = int(rng.index(2));
    }
    std::vector<double> warped(n);
    for (std::size_t i = 0; i < n; ++i) warped[i] = std::tanh(scores[i]) * 3.0 + 7.0;
    auto a = roc_auc(scores, labels);
    auto b = roc_auc(warped, labels);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(*a == *b);
  }
}

TEST_CASE("swapping the labels complements the roc auc for tie-free scores") {
  Rng rng(109);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 5 + rng.index(10);
    std::vector<double> scores(n);
    std::vector<int> labels(n), flipped(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform(0.0, 1.0);  // continuous, ties have measure zero
      labels[i] = int(rng.index(2));
      flipped[i] = 1 - labels[i];
    }
    auto a = roc_auc(scores, labels), b = roc_auc(scores, flipped);
    if (a && b) CHECK(*a + *b == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pr auc is one when every positive outranks every negative") {
  auto ap = pr_auc({0.9, 0.7, 0.3, 0.2}, {1, 1, 0, 0});
  REQUIRE(ap.has_value());
  CHECK(*ap == 1.0);
}

TEST_CASE("a single positive ranked last scores one over n") {
  auto ap = pr_auc({0.9, 0.8, 0.7, 0.6, 0.1}, {0, 0, 0, 0, 1});
  REQUIRE(ap.has_value());
  CHECK(*ap == 0.2);
}

TEST_CASE("pr auc without positives is undefined") {
  CHECK_FALSE(pr_auc({0.2, 0.8}, {0, 0}).has_value());
}

TEST_CASE("both metrics equal brute-force oracles on random small instances") {
  Rng rng(113);
  int compared_roc = 0, compared_pr = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng.index(19);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool coarse = rng.index(2) == 0;  // half the instances force score ties
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = coarse ? double(rng.index(5)) / 4.0 : rng.uniform(0.0, 1.0);
      labels[i] = int(rng.index(2));
    }
    auto lib_roc = roc_auc(scores, labels);
    auto ref_roc = oracle::brute_roc(scores, labels);
    REQUIRE(lib_roc.has_value() == ref_roc.has_value());
    if (lib_roc) {
      CHECK(*lib_roc == *ref_roc);
      ++compared_roc;
    }
    auto lib_pr = pr_auc(scores, labels);
    auto ref_pr = oracle::brute_pr(scores, labels);
    REQUIRE(lib_pr.has_value() == ref_pr.has_value());
    if (lib_pr) {
      CHECK(*lib_pr == *ref_pr);
      ++compared_pr;
    }
  }
  CHECK(compared_roc > 150);  // the sampler rarely produces degenerate columns
  CHECK(compared_pr > 150);
}

TEST_CASE("metric inputs are validated") {
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1}), ConfigError);
  CHECK_THROWS_AS(roc_auc({}, {}), ConfigError);
  CHECK_THROWS_AS(roc_auc({0.1, std::nan("")}, {0, 1}), NumericError);
  CHECK_THROWS_AS(pr_auc({0.1, 0.2}, {1, 0, 0}), ConfigError);
}

namespace {

// Two-class table: column 0 scores 0.8 by pair counting, column 1 is perfect.
PredictionTable mixed_table() {
  PredictionTable t;
  t.class_names = {"first", "second"};
  t.scores = Matrix(7, 2);
  t.labels = Matrix(7, 2);
  const double s0[7] = {0.9, 0.35, 0.5, 0.4, 0.3, 0.2, 0.1};
  const double l0[7] = {1, 1, 0, 0, 0, 0, 0};
  const double s1[7] = {0.9, 0.1, 0.8, 0.2, 0.2, 0.2, 0.2};
  const double l1[7] = {1, 0, 1, 0, 0, 0, 0};
  for (std::size_t r = 0; r < 7; ++r) {
    t.scores(r, 0) = s0[r];
    t.labels(r, 0) = l0[r];
    t.scores(r, 1) = s1[r];
    t.labels(r, 1) = l1[r];
  }
  return t;
}

}  // namespace

TEST_CASE("macro average is the unweighted mean over defined classes") {
  MacroResult res = macro_average(mixed_table(), MetricKind::roc);
  REQUIRE(res.per_class.size() == 2);
  CHECK(res.per_class[0].value == 0.8);
  CHECK(res.per_class[1].value == 1.0);
  CHECK(res.per_class[0].name == "first");
  CHECK(res.num_defined == 2);
  CHECK(res.value == 0.9);
}

TEST_CASE("undefined classes are flagged and excluded from the macro mean") {
  PredictionTable t = mixed_table();
  for (std::size_t r = 0; r < 7; ++r) t.labels(r, 1) = 1.0;  // all-positive column
  MacroResult res = macro_average(t, MetricKind::roc);
  CHECK_FALSE(res.per_class[1].defined);
  CHECK(res.per_class[0].defined);
  CHECK(res.num_defined == 1);
  CHECK(res.value == 0.8);

  // a fully undefined table cannot be averaged
  for (std::size_t r = 0; r < 7; ++r) t.labels(r, 0) = 1.0;
  CHECK_THROWS_AS(macro_average(t, MetricKind::roc), ConfigError);
}

TEST_CASE("identical columns average to the single-column value") {
  PredictionTable t;
  t.class_names = {"a", "b"};
  t.scores = Matrix(4, 2);
  t.labels = Matrix(4, 2);
  const double s[4] = {0.1, 0.4, 0.35, 0.8};
  const double l[4] = {0, 0, 1, 1};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      t.scores(r, c) = s[r];
      t.labels(r, c) = l[r];
    }
  MacroResult res = macro_average(t, MetricKind::roc);
  CHECK(res.value == 0.75);
  MacroResult pr = macro_average(t, MetricKind::pr);
  CHECK(pr.value == pr.per_class[0].value);
}
