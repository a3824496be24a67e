#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "sempl/errors.hpp"
#include "sempl/evaluation.hpp"

using namespace sempl;

namespace {

// Independent oracle: confusion by filtering, AUC by enumerating every
// (positive, negative) pair. Deliberately O(n^2), no shared code with
// compute_metrics.
struct OracleReport {
  double auc, precision, recall, f1, accuracy;
  std::size_t tp, fp, fn, tn;
};

OracleReport oracle_metrics(const std::vector<Prediction>& preds,
                            const std::vector<int>& golds) {
  OracleReport o{};
  const std::size_t n = preds.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (preds[i].label == 1 && golds[i] == 1) ++o.tp;
    if (preds[i].label == 1 && golds[i] == 0) ++o.fp;
    if (preds[i].label == 0 && golds[i] == 1) ++o.fn;
    if (preds[i].label == 0 && golds[i] == 0) ++o.tn;
  }
  o.precision = (o.tp + o.fp) ? static_cast<double>(o.tp) / (o.tp + o.fp) : 0.0;
  o.recall = (o.tp + o.fn) ? static_cast<double>(o.tp) / (o.tp + o.fn) : 0.0;
  o.f1 = (o.precision + o.recall) > 0
             ? 2 * o.precision * o.recall / (o.precision + o.recall)
             : 0.0;
  o.accuracy = static_cast<double>(o.tp + o.tn) / n;

  double pairs = 0.0, wins = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (golds[i] != 1) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (golds[j] != 0) continue;
      pairs += 1.0;
      if (preds[i].score > preds[j].score) wins += 1.0;
      else if (preds[i].score == preds[j].score) wins += 0.5;
    }
  }
  o.auc = pairs > 0 ? wins / pairs : 0.5;
  return o;
}

std::vector<Prediction> from_scores(const std::vector<double>& scores,
                                    const std::vector<int>& labels) {
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    out.push_back({labels[i], scores[i], false});
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("perfect classifier") {
  auto preds = from_scores({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0});
  MetricsReport m = compute_metrics(preds, {1, 0, 1, 0});
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.accuracy == 1.0);
  CHECK(m.auc == 1.0);
  CHECK(m.confusion.tp == 2);
  CHECK(m.confusion.tn == 2);
}

TEST_CASE("half-right classifier with crossed scores") {
  // golds [1,0,1,0], predicted labels [1,1,0,0], scores [0.9,0.8,0.2,0.1]:
  // confusion 1/1/1/1, P=R=F1=Acc=0.5, AUC = 3 of 4 pairs = 0.75.
  auto preds = from_scores({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
  MetricsReport m = compute_metrics(preds, {1, 0, 1, 0});
  CHECK(m.confusion.tp == 1);
  CHECK(m.confusion.fp == 1);
  CHECK(m.confusion.fn == 1);
  CHECK(m.confusion.tn == 1);
  CHECK(m.precision == doctest::Approx(0.5));
  CHECK(m.recall == doctest::Approx(0.5));
  CHECK(m.f1 == doctest::Approx(0.5));
  CHECK(m.accuracy == doctest::Approx(0.5));
  CHECK(m.auc == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("matches the brute-force oracle on random instances") {
  std::mt19937_64 rng(4242);
  for (int iter = 0; iter < 1000; ++iter) {
    std::size_t n = 1 + bounded_rand(rng, 20);
    std::vector<Prediction> preds;
    std::vector<int> golds;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(gen::prediction(rng));
      golds.push_back(static_cast<int>(bounded_rand(rng, 2)));
    }
    MetricsReport m = compute_metrics(preds, golds);
    OracleReport o = oracle_metrics(preds, golds);
    CHECK(m.confusion.tp == o.tp);
    CHECK(m.confusion.fp == o.fp);
    CHECK(m.confusion.fn == o.fn);
    CHECK(m.confusion.tn == o.tn);
    CHECK(std::abs(m.precision - o.precision) <= 1e-12);
    CHECK(std::abs(m.recall - o.recall) <= 1e-12);
    CHECK(std::abs(m.f1 - o.f1) <= 1e-12);
    CHECK(std::abs(m.accuracy - o.accuracy) <= 1e-12);
    CHECK(std::abs(m.auc - o.auc) <= 1e-12);
  }
}

TEST_CASE("joint permutation leaves metrics unchanged") {
  std::mt19937_64 rng(99);
  std::vector<Prediction> preds;
  std::vector<int> golds;
  for (int i = 0; i < 17; ++i) {
    preds.push_back(gen::prediction(rng));
    golds.push_back(static_cast<int>(bounded_rand(rng, 2)));
  }
  MetricsReport base = compute_metrics(preds, golds);
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int trial = 0; trial < 20; ++trial) {
    deterministic_shuffle(order, rng);
    std::vector<Prediction> p2;
    std::vector<int> g2;
    for (auto i : order) {
      p2.push_back(preds[i]);
      g2.push_back(golds[i]);
    }
    MetricsReport m = compute_metrics(p2, g2);
    CHECK(m.auc == doctest::Approx(base.auc).epsilon(1e-12));
    CHECK(m.precision == doctest::Approx(base.precision).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(base.recall).epsilon(1e-12));
    CHECK(m.accuracy == doctest::Approx(base.accuracy).epsilon(1e-12));
  }
}

TEST_CASE("label-flip symmetry") {
  std::mt19937_64 rng(555);
  for (int iter = 0; iter < 50; ++iter) {
    std::size_t n = 2 + bounded_rand(rng, 18);
    std::vector<Prediction> preds;
    std::vector<int> golds;
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(gen::prediction(rng));
      golds.push_back(static_cast<int>(bounded_rand(rng, 2)));
      (golds.back() ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;

    std::vector<Prediction> flipped;
    std::vector<int> flipped_golds;
    for (std::size_t i = 0; i < n; ++i) {
      flipped.push_back({1 - preds[i].label, 1.0 - preds[i].score, false});
      flipped_golds.push_back(1 - golds[i]);
    }
    MetricsReport m = compute_metrics(preds, golds);
    MetricsReport f = compute_metrics(flipped, flipped_golds);

    // P/R of class 1 after the flip equal P/R of class 0 before it.
    const auto& c = m.confusion;
    double p0 = (c.tn + c.fn) ? static_cast<double>(c.tn) / (c.tn + c.fn) : 0.0;
    double r0 = (c.tn + c.fp) ? static_cast<double>(c.tn) / (c.tn + c.fp) : 0.0;
    if (c.tn + c.fn) CHECK(f.precision == doctest::Approx(p0).epsilon(1e-12));
    if (c.tn + c.fp) CHECK(f.recall == doctest::Approx(r0).epsilon(1e-12));
    CHECK(f.auc == doctest::Approx(m.auc).epsilon(1e-12));
    CHECK(f.accuracy == doctest::Approx(m.accuracy).epsilon(1e-12));
  }
}

TEST_CASE("accuracy equals AUC for hard-label scores on balanced golds") {
  std::mt19937_64 rng(777);
  for (int iter = 0; iter < 100; ++iter) {
    std::size_t half = 1 + bounded_rand(rng, 10);
    std::vector<Prediction> preds;
    std::vector<int> golds;
    for (std::size_t i = 0; i < 2 * half; ++i) {
      int label = static_cast<int>(bounded_rand(rng, 2));
      preds.push_back({label, static_cast<double>(label), false});
      golds.push_back(i < half ? 1 : 0);
    }
    MetricsReport m = compute_metrics(preds, golds);
    CHECK(m.auc == doctest::Approx(m.accuracy).epsilon(1e-12));
  }
}

TEST_CASE("single-class golds degrade to AUC 0.5 with a flag") {
  auto preds = from_scores({0.9, 0.4}, {1, 0});
  MetricsReport m = compute_metrics(preds, {1, 1});
  CHECK(m.auc == 0.5);
  CHECK(m.auc_degenerate);
  CHECK(m.recall == doctest::Approx(0.5));
  CHECK_FALSE(m.precision_zero_division);
}

TEST_CASE("zero-division flags") {
  // no predicted positives -> precision undefined
  auto preds = from_scores({0.1, 0.2}, {0, 0});
  MetricsReport m = compute_metrics(preds, {1, 0});
  CHECK(m.precision == 0.0);
  CHECK(m.precision_zero_division);
}

TEST_CASE("usage errors") {
  auto preds = from_scores({0.9}, {1});
  CHECK_THROWS_AS(compute_metrics(preds, {1, 0}), UsageError);
  CHECK_THROWS_AS(compute_metrics({}, {}), UsageError);
  CHECK_THROWS_AS(compute_metrics(preds, {2}), UsageError);
}

TEST_CASE("error analysis counts wrong predictions by flag") {
  auto make = [](int pred, int gold, bool verb_unknown, bool trivial) {
    ScoredRecord r;
    r.record.prompt = "p";
    r.record.label = gold;
    r.record.flags.verb_unknown = verb_unknown;
    r.record.flags.has_trivial_entity_type = trivial;
    r.prediction = {pred, pred ? 0.9 : 0.1, false};
    r.gold = gold;
    return r;
  };

  SUBCASE("all correct") {
    std::vector<ScoredRecord> records{make(1, 1, true, true), make(0, 0, false, true)};
    ErrorAnalysisReport r = error_analysis(records);
    CHECK(r.wrong_total == 0);
    CHECK(r.wrong_with_unknown_event_type == 0);
    CHECK(r.wrong_with_trivial_entity_type == 0);
  }

  SUBCASE("10 records, 4 wrong, 3 verb-unknown, 2 trivial") {
    std::vector<ScoredRecord> records;
    records.push_back(make(1, 0, true, true));   // wrong, both
    records.push_back(make(0, 1, true, false));  // wrong, verb unknown
    records.push_back(make(1, 0, true, false));  // wrong, verb unknown
    records.push_back(make(0, 1, false, true));  // wrong, trivial
    for (int i = 0; i < 6; ++i) records.push_back(make(1, 1, true, true));  // correct
    ErrorAnalysisReport r = error_analysis(records);
    CHECK(r.wrong_total == 4);
    CHECK(r.wrong_with_unknown_event_type == 3);
    CHECK(r.wrong_with_trivial_entity_type == 2);
  }
}

TEST_SUITE_END();
