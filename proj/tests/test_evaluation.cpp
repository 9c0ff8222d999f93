#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ruc/evaluation.hpp"
#include "ruc/rng.hpp"
#include "test_util.hpp"

using namespace ruc;

namespace {

// Reference confusion matrices of the three 2 s models (window 30/60/120)
// with their expected per-class and macro F1 scores.
constexpr std::int64_t kMatrix30[4][4] = {
    {92, 0, 0, 1}, {2, 106, 0, 7}, {0, 1, 62, 32}, {0, 2, 42, 109}};
constexpr std::int64_t kMatrix60[4][4] = {
    {45, 0, 0, 0}, {0, 53, 0, 3}, {0, 0, 33, 13}, {0, 3, 8, 60}};
constexpr std::int64_t kMatrix120[4][4] = {
    {20, 1, 0, 0}, {0, 28, 0, 0}, {0, 0, 15, 6}, {0, 0, 3, 26}};

ConfusionMatrix from_rows(const std::int64_t rows[4][4]) {
  ConfusionMatrix cm;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) cm.counts[r][c] = rows[r][c];
  }
  return cm;
}

// Brute-force per-class binary precision/recall, the oracle for f1_report.
double binary_f1(const ConfusionMatrix& cm, int cls) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (r == cls && c == cls) tp += cm.counts[r][c];
      else if (c == cls) fp += cm.counts[r][c];
      else if (r == cls) fn += cm.counts[r][c];
    }
  }
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * p * r / (p + r);
}

// A stub "network" is awkward here; instead evaluation helpers are
// exercised with real tiny networks whose predictions we can force.
FeatureSequence constant_sequence(RoadUserClass label, double fill, int T = 4) {
  FeatureSequence seq;
  seq.label = label;
  seq.steps.assign(static_cast<std::size_t>(T), FeatureVector{fill, fill, fill, fill, fill});
  return seq;
}

}  // namespace

TEST_CASE("reference matrices reproduce their expected f1 scores") {
  const F1Report r30 = f1_report(from_rows(kMatrix30));
  CHECK(std::fabs(r30.f1[0] - 0.9840) < 5e-4);
  CHECK(std::fabs(r30.f1[1] - 0.9464) < 5e-4);
  CHECK(std::fabs(r30.f1[2] - 0.6231) < 5e-4);
  CHECK(std::fabs(r30.f1[3] - 0.7219) < 5e-4);
  CHECK(std::fabs(r30.macro_f1 - 0.8189) < 5e-4);

  const F1Report r60 = f1_report(from_rows(kMatrix60));
  CHECK(std::fabs(r60.f1[0] - 1.0000) < 5e-4);
  CHECK(std::fabs(r60.f1[1] - 0.9464) < 5e-4);
  CHECK(std::fabs(r60.f1[2] - 0.7586) < 5e-4);
  CHECK(std::fabs(r60.f1[3] - 0.8163) < 5e-4);
  CHECK(std::fabs(r60.macro_f1 - 0.8803) < 5e-4);

  const F1Report r120 = f1_report(from_rows(kMatrix120));
  CHECK(std::fabs(r120.f1[0] - 0.9756) < 5e-4);
  CHECK(std::fabs(r120.f1[1] - 0.9825) < 5e-4);
  CHECK(std::fabs(r120.f1[2] - 0.7692) < 5e-4);
  CHECK(std::fabs(r120.f1[3] - 0.8525) < 5e-4);
  CHECK(std::fabs(r120.macro_f1 - 0.8950) < 5e-4);

  // row sums are the per-class test counts; the 1 min matrix covers 456
  // test sequences (93 + 115 + 95 + 153)
  const ConfusionMatrix m30 = from_rows(kMatrix30);
  CHECK(m30.row_sum(0) == 93);
  CHECK(m30.row_sum(1) == 115);
  CHECK(m30.row_sum(2) == 95);
  CHECK(m30.row_sum(3) == 153);
  CHECK(m30.total() == 456);
}

TEST_CASE("perfect diagonal gives all ones") {
  ConfusionMatrix cm;
  cm.counts[0][0] = 10;
  cm.counts[1][1] = 20;
  cm.counts[2][2] = 5;
  cm.counts[3][3] = 7;
  const F1Report r = f1_report(cm);
  for (double f1 : r.f1) CHECK(f1 == 1.0);
  CHECK(r.macro_f1 == 1.0);
}

TEST_CASE("degenerate rows and columns give zero f1") {
  ConfusionMatrix cm;
  // class 1 never appears and is never predicted
  cm.counts[0][0] = 4;
  cm.counts[2][0] = 1;
  cm.counts[3][3] = 2;
  const F1Report r = f1_report(cm);
  CHECK(r.f1[1] == 0.0);
  CHECK(r.f1[2] == 0.0);  // row present, diagonal zero
  CHECK(r.f1[0] > 0.0);
}

TEST_CASE("f1_report matches the brute-force oracle on random matrices") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionMatrix cm;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) cm.counts[r][c] = static_cast<std::int64_t>(rng.next_below(20));
    }
    const F1Report report = f1_report(cm);
    double macro = 0.0;
    for (int c = 0; c < 4; ++c) {
      const double expected = binary_f1(cm, c);
      CHECK(report.f1[c] == doctest::Approx(expected).epsilon(1e-12));
      CHECK(report.f1[c] >= 0.0);
      CHECK(report.f1[c] <= 1.0);
      macro += expected;
    }
    CHECK(report.macro_f1 == doctest::Approx(macro / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("argmax tie-break picks the lowest class index") {
  CHECK(predicted_class({0.25, 0.25, 0.25, 0.25}) == 0);
  CHECK(predicted_class({0.1, 0.4, 0.4, 0.1}) == 1);
  CHECK(predicted_class({0.1, 0.2, 0.3, 0.4}) == 3);
}

TEST_CASE("confusion matrix and error curve from a live network") {
  // zero-weight network predicts uniform rows -> always class 0
  const Network net = make_network({1, 1, 1, 4, Activation::tanh});
  std::vector<FeatureSequence> test;
  for (int i = 0; i < 3; ++i) test.push_back(constant_sequence(RoadUserClass::pedestrian, 0.1 * i));
  for (int i = 0; i < 2; ++i) test.push_back(constant_sequence(RoadUserClass::cyclist, 0.2 * i));
  test.push_back(constant_sequence(RoadUserClass::passenger_car, 0.5));
  test.push_back(constant_sequence(RoadUserClass::motorcyclist, 0.3));

  const ConfusionMatrix cm = confusion_matrix(net, test);
  CHECK(cm.total() == 7);
  CHECK(cm.counts[0][0] == 3);  // pedestrians "right" via the tie-break
  CHECK(cm.counts[1][0] == 2);
  CHECK(cm.col_sum(0) == 7);  // constant predictor: one nonzero column

  const ErrorCurve curve = error_rate_curve(net, test);
  REQUIRE(curve.errors.size() == 4);
  for (const auto& row : curve.errors) {
    CHECK(row[0] == 0.0);  // pedestrians never wrong under the tie-break
    CHECK(row[1] == 1.0);
    CHECK(row[2] == 1.0);
    CHECK(row[3] == 1.0);
  }

  // final-timestep curve agrees with the confusion matrix
  const F1Report f1 = f1_report(cm);
  (void)f1;
  for (int c = 0; c < kClassCount; ++c) {
    const double row_total = static_cast<double>(cm.row_sum(c));
    if (row_total == 0.0) continue;
    const double diag = static_cast<double>(cm.counts[c][c]);
    CHECK(curve.errors.back()[c] == doctest::Approx(1.0 - diag / row_total).epsilon(1e-12));
  }
}

TEST_CASE("evaluation outputs are order invariant") {
  const Network net = build_network({1, 1, 1, 5, Activation::tanh}, 33);
  SplitMix64 rng(5);
  std::vector<FeatureSequence> test;
  for (int i = 0; i < 12; ++i) {
    FeatureSequence seq = constant_sequence(kAllClasses[i % 4], 0.0, 6);
    for (auto& step : seq.steps) {
      step = FeatureVector{rng.next_double(-1, 1), rng.next_double(-1, 1),
                           rng.next_double(-1, 1), rng.next_double(-1, 1),
                           rng.next_double(-1, 1)};
    }
    test.push_back(std::move(seq));
  }

  const ConfusionMatrix a = confusion_matrix(net, test);
  std::vector<FeatureSequence> reversed(test.rbegin(), test.rend());
  const ConfusionMatrix b = confusion_matrix(net, reversed);
  CHECK(a.counts == b.counts);

  const ErrorCurve ca = error_rate_curve(net, test);
  const ErrorCurve cb = error_rate_curve(net, reversed);
  REQUIRE(ca.errors.size() == cb.errors.size());
  for (std::size_t t = 0; t < ca.errors.size(); ++t) CHECK(ca.errors[t] == cb.errors[t]);
}

TEST_CASE("empty or ragged test sets are rejected") {
  const Network net = make_network({1, 1, 1, 4, Activation::tanh});
  std::vector<FeatureSequence> empty;
  CHECK_THROWS(confusion_matrix(net, empty));
  std::vector<FeatureSequence> ragged{constant_sequence(RoadUserClass::pedestrian, 0.0, 4),
                                      constant_sequence(RoadUserClass::cyclist, 0.0, 5)};
  CHECK_THROWS(error_rate_curve(net, ragged));
}

TEST_CASE("eval json and error curve csv") {
  ructest::TempDir tmp("eval");
  const ConfusionMatrix cm = from_rows(kMatrix60);
  write_eval_json(cm, f1_report(cm), tmp.path() / "eval.json");
  std::ifstream in(tmp.path() / "eval.json");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(content.find("\"macro_f1\"") != std::string::npos);
  CHECK(content.find("\"confusion_matrix\"") != std::string::npos);

  ErrorCurve curve;
  curve.errors.push_back({0.0, 0.5, 1.0, 0.25});
  const std::string csv = error_curve_csv(curve);
  CHECK(csv == "timestep,pedestrian,cyclist,motorcyclist,passenger_car\n1,0,0.5,1,0.25\n");
}
