#ifndef RUC_NETWORK_HPP
#define RUC_NETWORK_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "ruc/features.hpp"
#include "ruc/rng.hpp"

namespace ruc {

inline constexpr int kInputWidth = kFeatureCount;  // 5 features per timestep
inline constexpr int kOutputWidth = kClassCount;   // 4 class probabilities

// Activation of the dense hidden layers. LSTM internals keep the standard
// sigmoid gates and tanh candidate regardless of this choice.
enum class Activation { tanh, relu };

const char* to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view name);

// Architecture knobs: number of input-to-recurrent dense layers, stacked
// LSTM layers, recurrent-to-output dense layers, units per hidden layer,
// and hidden activation.
struct HyperParams {
  int in2rec_layers = 1;
  int lstm_layers = 1;
  int rec2out_layers = 1;
  int width = 32;
  Activation activation = Activation::tanh;
};

void validate(const HyperParams& params);

// Closed-form parameter count for the layer chain build_network creates.
std::size_t parameter_count(const HyperParams& params);

struct DenseLayer {
  int in = 0;
  int out = 0;
  Activation act = Activation::tanh;
  bool softmax_output = false;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

// Gate blocks stacked in the order input, forget, candidate, output.
struct LstmLayer {
  int in = 0;
  int width = 0;
  std::vector<double> wx;  // 4*width x in, row-major
  std::vector<double> wh;  // 4*width x width, row-major
  std::vector<double> b;   // 4*width
};

using Layer = std::variant<DenseLayer, LstmLayer>;

struct Network {
  HyperParams spec;
  std::vector<Layer> layers;
};

// fan_out x fan_in entries, i.i.d. uniform on [-L, L], L = sqrt(6/(fan_in+fan_out)).
std::vector<double> glorot_uniform(int fan_in, int fan_out, SplitMix64& rng);
std::vector<double> glorot_uniform(int fan_in, int fan_out, std::uint64_t seed);

// Layer chain without weights (all zeros): dense(5->n) then (l_i2r - 1) x
// dense(n->n), l_r LSTM layers of width n, l_r2o x dense(n->n), and a
// softmax dense(n->4) output.
Network make_network(const HyperParams& params);

// Same chain with Glorot-initialized weights and zero biases, deterministic
// per seed.
Network build_network(const HyperParams& params, std::uint64_t seed);

// Parameter tensors in a fixed order (per layer: dense w, b; lstm wx, wh, b).
// Gradients and optimizer state use the same order.
std::vector<std::span<double>> parameter_tensors(Network& net);
std::vector<std::span<const double>> parameter_tensors(const Network& net);
std::size_t parameter_count(const Network& net);

using ProbRow = std::array<double, kOutputWidth>;

// Runs the sequence through the network with recurrent state starting at
// zero; returns one probability row per timestep (entries in (0, 1), each
// row summing to 1).
std::vector<ProbRow> forward(const Network& net, const FeatureSequence& seq);

// One cell update; `state` carries h and c (zeros at sequence start).
struct LstmState {
  std::vector<double> h, c;
};
LstmState make_lstm_state(const LstmLayer& layer);
void lstm_step(const LstmLayer& layer, std::span<const double> input, LstmState& state);

// Gradient tensors shape-matched to parameter_tensors order.
struct GradientSet {
  std::vector<std::vector<double>> tensors;
};

GradientSet make_zero_gradients(const Network& net);
void accumulate(GradientSet& into, const GradientSet& grads);
void scale(GradientSet& grads, double factor);

// Backpropagation through time of the per-sequence loss (mean categorical
// cross-entropy across all temporal outputs) with respect to every
// parameter. Returns the gradients and the loss value.
struct BackwardResult {
  GradientSet grads;
  double loss = 0.0;
};
BackwardResult backward(const Network& net, const FeatureSequence& seq, RoadUserClass target);

}  // namespace ruc

#endif  // RUC_NETWORK_HPP
