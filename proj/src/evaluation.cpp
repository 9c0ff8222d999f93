#include "ruc/evaluation.hpp"

#include <stdexcept>

#include <json.hpp>

#include "text_util.hpp"

namespace ruc {

namespace {

void check_test_set(std::span<const FeatureSequence> test) {
  if (test.empty()) throw std::runtime_error("evaluation: empty test set");
  const std::size_t len = test.front().steps.size();
  for (const FeatureSequence& seq : test) {
    if (seq.steps.size() != len)
      throw std::runtime_error("evaluation: sequences have differing lengths");
  }
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  std::int64_t sum = 0;
  for (const auto& row : counts) {
    for (std::int64_t v : row) sum += v;
  }
  return sum;
}

std::int64_t ConfusionMatrix::row_sum(int true_class) const {
  std::int64_t sum = 0;
  for (std::int64_t v : counts[static_cast<std::size_t>(true_class)]) sum += v;
  return sum;
}

std::int64_t ConfusionMatrix::col_sum(int predicted_class) const {
  std::int64_t sum = 0;
  for (const auto& row : counts) sum += row[static_cast<std::size_t>(predicted_class)];
  return sum;
}

int predicted_class(const ProbRow& row) {
  int best = 0;
  for (int k = 1; k < kClassCount; ++k) {
    if (row[static_cast<std::size_t>(k)] > row[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

ConfusionMatrix confusion_matrix(const Network& net, std::span<const FeatureSequence> test) {
  check_test_set(test);
  ConfusionMatrix cm;
  for (const FeatureSequence& seq : test) {
    const auto probs = forward(net, seq);
    const int pred = predicted_class(probs.back());
    cm.counts[static_cast<std::size_t>(seq.label)][static_cast<std::size_t>(pred)] += 1;
  }
  return cm;
}

F1Report f1_report(const ConfusionMatrix& cm) {
  F1Report report;
  double sum = 0.0;
  for (int c = 0; c < kClassCount; ++c) {
    const double tp = static_cast<double>(cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
    const double col = static_cast<double>(cm.col_sum(c));
    const double row = static_cast<double>(cm.row_sum(c));
    const double precision = col > 0.0 ? tp / col : 0.0;
    const double recall = row > 0.0 ? tp / row : 0.0;
    const double denom = precision + recall;
    report.f1[static_cast<std::size_t>(c)] = denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
    sum += report.f1[static_cast<std::size_t>(c)];
  }
  report.macro_f1 = sum / kClassCount;
  return report;
}

ErrorCurve error_rate_curve(const Network& net, std::span<const FeatureSequence> test) {
  check_test_set(test);
  const std::size_t T = test.front().steps.size();

  std::array<std::int64_t, kClassCount> class_counts{};
  for (const FeatureSequence& seq : test) class_counts[static_cast<std::size_t>(seq.label)] += 1;

  ErrorCurve curve;
  curve.errors.assign(T, {});
  std::vector<std::array<std::int64_t, kClassCount>> wrong(T, std::array<std::int64_t, kClassCount>{});
  for (const FeatureSequence& seq : test) {
    const auto probs = forward(net, seq);
    const int truth = static_cast<int>(seq.label);
    for (std::size_t t = 0; t < T; ++t) {
      if (predicted_class(probs[t]) != truth) wrong[t][static_cast<std::size_t>(truth)] += 1;
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (int c = 0; c < kClassCount; ++c) {
      const std::int64_t n = class_counts[static_cast<std::size_t>(c)];
      curve.errors[t][static_cast<std::size_t>(c)] =
          n > 0 ? static_cast<double>(wrong[t][static_cast<std::size_t>(c)]) / static_cast<double>(n) : 0.0;
    }
  }
  return curve;
}

void write_eval_json(const ConfusionMatrix& cm, const F1Report& f1,
                     const std::filesystem::path& path) {
  nlohmann::json j;
  j["confusion_matrix"] = nlohmann::json::array();
  for (int r = 0; r < kClassCount; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < kClassCount; ++c) row.push_back(cm.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    j["confusion_matrix"].push_back(row);
  }
  j["class_order"] = nlohmann::json::array();
  for (RoadUserClass c : kAllClasses) j["class_order"].push_back(to_string(c));
  j["f1"] = nlohmann::json::object();
  for (int c = 0; c < kClassCount; ++c) j["f1"][to_string(kAllClasses[c])] = f1.f1[static_cast<std::size_t>(c)];
  j["macro_f1"] = f1.macro_f1;
  j["test_size"] = cm.total();
  detail::write_file(path, j.dump(2) + "\n");
}

std::string error_curve_csv(const ErrorCurve& curve) {
  std::string out = "timestep,pedestrian,cyclist,motorcyclist,passenger_car\n";
  for (std::size_t t = 0; t < curve.errors.size(); ++t) {
    out += std::to_string(t + 1);
    for (int c = 0; c < kClassCount; ++c) {
      out += ',';
      out += detail::format_double(curve.errors[t][static_cast<std::size_t>(c)]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace ruc
