#ifndef RUC_EVALUATION_HPP
#define RUC_EVALUATION_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ruc/network.hpp"

namespace ruc {

// Rows are true classes, columns predicted classes, in RoadUserClass order.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kClassCount>, kClassCount> counts{};

  std::int64_t total() const;
  std::int64_t row_sum(int true_class) const;
  std::int64_t col_sum(int predicted_class) const;
};

// argmax with ties resolved to the lowest class index.
int predicted_class(const ProbRow& row);

// Classifies each sequence by the argmax of its final timestep.
// All sequences must share one length.
ConfusionMatrix confusion_matrix(const Network& net, std::span<const FeatureSequence> test);

struct F1Report {
  std::array<double, kClassCount> f1{};
  double macro_f1 = 0.0;
};

// Per-class F1 = 2PR/(P+R) from the matrix diagonal; zero denominators give
// F1 = 0. Macro-F1 is the unweighted mean.
F1Report f1_report(const ConfusionMatrix& cm);

// errors[t][c] = fraction of class-c test sequences misclassified when
// judged by the argmax of timestep t alone.
struct ErrorCurve {
  std::vector<std::array<double, kClassCount>> errors;  // T rows
};

ErrorCurve error_rate_curve(const Network& net, std::span<const FeatureSequence> test);

void write_eval_json(const ConfusionMatrix& cm, const F1Report& f1,
                     const std::filesystem::path& path);

// `timestep,pedestrian,cyclist,motorcyclist,passenger_car`, timesteps 1-based.
std::string error_curve_csv(const ErrorCurve& curve);

}  // namespace ruc

#endif  // RUC_EVALUATION_HPP
