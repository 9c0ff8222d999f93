#include "ruc/network.hpp"

#include <cmath>
#include <stdexcept>

namespace ruc {

namespace {

constexpr double kProbFloor = 1e-300;
const double kProbCeil = std::nextafter(1.0, 0.0);

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double activate(Activation act, double x) {
  return act == Activation::tanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

// Derivative expressed through the activation output.
double activate_deriv(Activation act, double out) {
  return act == Activation::tanh ? 1.0 - out * out : (out > 0.0 ? 1.0 : 0.0);
}

// y = W x + b, W is rows x cols row-major
void matvec(const std::vector<double>& w, int rows, int cols, const double* x,
            const std::vector<double>& b, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w.data() + static_cast<std::size_t>(r) * cols;
    double acc = b[static_cast<std::size_t>(r)];
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

// y += W^T g
void matvec_transposed_acc(const std::vector<double>& w, int rows, int cols, const double* g,
                           double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w.data() + static_cast<std::size_t>(r) * cols;
    const double gr = g[r];
    for (int c = 0; c < cols; ++c) y[c] += row[c] * gr;
  }
}

// dw += g x^T
void outer_acc(std::vector<double>& dw, const double* g, int rows, const double* x, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = dw.data() + static_cast<std::size_t>(r) * cols;
    const double gr = g[r];
    for (int c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

void softmax_inplace(double* z, int n) {
  double m = z[0];
  for (int k = 1; k < n; ++k) m = std::max(m, z[k]);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    z[k] = std::exp(z[k] - m);
    sum += z[k];
  }
  for (int k = 0; k < n; ++k) z[k] = std::clamp(z[k] / sum, kProbFloor, kProbCeil);
}

int output_width(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->out;
  return std::get<LstmLayer>(layer).width;
}

// scratch must hold 4*width entries
void lstm_cell(const LstmLayer& layer, const double* x, const double* h_prev,
               const double* c_prev, double* scratch, double* gi, double* gf, double* gg,
               double* go, double* c, double* tanh_c, double* h) {
  const int width = layer.width;
  const int rows = 4 * width;
  for (int r = 0; r < rows; ++r) {
    const double* row = layer.wx.data() + static_cast<std::size_t>(r) * layer.in;
    double acc = layer.b[static_cast<std::size_t>(r)];
    for (int j = 0; j < layer.in; ++j) acc += row[j] * x[j];
    scratch[r] = acc;
  }
  for (int r = 0; r < rows; ++r) {
    const double* row = layer.wh.data() + static_cast<std::size_t>(r) * width;
    double acc = scratch[r];
    for (int j = 0; j < width; ++j) acc += row[j] * h_prev[j];
    scratch[r] = acc;
  }
  for (int j = 0; j < width; ++j) {
    gi[j] = sigmoid(scratch[j]);
    gf[j] = sigmoid(scratch[width + j]);
    gg[j] = std::tanh(scratch[2 * width + j]);
    go[j] = sigmoid(scratch[3 * width + j]);
    c[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
    tanh_c[j] = std::tanh(c[j]);
    h[j] = go[j] * tanh_c[j];
  }
}

struct LstmTrace {
  std::vector<double> i, f, g, o, c, tanh_c;  // each T x width
};

struct Trace {
  // acts[0] holds the inputs (T x 5); acts[l + 1] the outputs of layer l.
  std::vector<std::vector<double>> acts;
  std::vector<LstmTrace> lstm;  // indexed by layer position; empty for dense
};

void forward_pass(const Network& net, const FeatureSequence& seq, Trace& tr) {
  const std::size_t T = seq.steps.size();
  if (T == 0) throw std::runtime_error("network: cannot run an empty sequence");
  const std::size_t L = net.layers.size();

  tr.acts.assign(L + 1, {});
  tr.lstm.assign(L, {});
  tr.acts[0].resize(T * kInputWidth);
  for (std::size_t t = 0; t < T; ++t) {
    const auto v = seq.steps[t].values();
    for (int f = 0; f < kInputWidth; ++f) tr.acts[0][t * kInputWidth + f] = v[f];
  }

  int max_width = kInputWidth;
  for (std::size_t l = 0; l < L; ++l) {
    const int w = output_width(net.layers[l]);
    max_width = std::max(max_width, w);
    tr.acts[l + 1].resize(T * static_cast<std::size_t>(w));
    if (std::holds_alternative<LstmLayer>(net.layers[l])) {
      LstmTrace& lt = tr.lstm[l];
      for (auto* buf : {&lt.i, &lt.f, &lt.g, &lt.o, &lt.c, &lt.tanh_c})
        buf->resize(T * static_cast<std::size_t>(w));
    }
  }

  std::vector<double> zeros(static_cast<std::size_t>(max_width), 0.0);
  std::vector<double> scratch(static_cast<std::size_t>(4 * max_width));

  for (std::size_t t = 0; t < T; ++t) {
    const double* cur = tr.acts[0].data() + t * kInputWidth;
    for (std::size_t l = 0; l < L; ++l) {
      if (const auto* d = std::get_if<DenseLayer>(&net.layers[l])) {
        double* out = tr.acts[l + 1].data() + t * static_cast<std::size_t>(d->out);
        matvec(d->w, d->out, d->in, cur, d->b, out);
        if (d->softmax_output) {
          softmax_inplace(out, d->out);
        } else {
          for (int j = 0; j < d->out; ++j) out[j] = activate(d->act, out[j]);
        }
        cur = out;
      } else {
        const auto& m = std::get<LstmLayer>(net.layers[l]);
        LstmTrace& lt = tr.lstm[l];
        const std::size_t w = static_cast<std::size_t>(m.width);
        const double* h_prev = t > 0 ? tr.acts[l + 1].data() + (t - 1) * w : zeros.data();
        const double* c_prev = t > 0 ? lt.c.data() + (t - 1) * w : zeros.data();
        double* h = tr.acts[l + 1].data() + t * w;
        lstm_cell(m, cur, h_prev, c_prev, scratch.data(), lt.i.data() + t * w,
                  lt.f.data() + t * w, lt.g.data() + t * w, lt.o.data() + t * w,
                  lt.c.data() + t * w, lt.tanh_c.data() + t * w, h);
        cur = h;
      }
    }
  }
}

}  // namespace

const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  return std::nullopt;
}

void validate(const HyperParams& params) {
  if (params.in2rec_layers < 1 || params.lstm_layers < 1 || params.rec2out_layers < 1)
    throw std::runtime_error("network: all layer counts must be >= 1");
  if (params.width < 1) throw std::runtime_error("network: width must be >= 1");
}

std::size_t parameter_count(const HyperParams& params) {
  const std::size_t n = static_cast<std::size_t>(params.width);
  const std::size_t in2rec =
      (kInputWidth * n + n) + static_cast<std::size_t>(params.in2rec_layers - 1) * (n * n + n);
  const std::size_t lstm =
      static_cast<std::size_t>(params.lstm_layers) * 4 * (n * n + n * n + n);
  const std::size_t rec2out = static_cast<std::size_t>(params.rec2out_layers) * (n * n + n);
  const std::size_t output = n * kOutputWidth + kOutputWidth;
  return in2rec + lstm + rec2out + output;
}

std::vector<double> glorot_uniform(int fan_in, int fan_out, SplitMix64& rng) {
  if (fan_in < 1 || fan_out < 1)
    throw std::runtime_error("glorot: fan_in and fan_out must be >= 1");
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> w(static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out));
  for (double& x : w) x = rng.next_double(-limit, limit);
  return w;
}

std::vector<double> glorot_uniform(int fan_in, int fan_out, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return glorot_uniform(fan_in, fan_out, rng);
}

Network make_network(const HyperParams& params) {
  validate(params);
  const int n = params.width;

  Network net;
  net.spec = params;

  auto dense = [&](int in, int out, bool softmax) {
    DenseLayer d;
    d.in = in;
    d.out = out;
    d.act = params.activation;
    d.softmax_output = softmax;
    d.w.assign(static_cast<std::size_t>(in) * out, 0.0);
    d.b.assign(static_cast<std::size_t>(out), 0.0);
    net.layers.emplace_back(std::move(d));
  };

  dense(kInputWidth, n, false);
  for (int l = 1; l < params.in2rec_layers; ++l) dense(n, n, false);
  for (int l = 0; l < params.lstm_layers; ++l) {
    LstmLayer m;
    m.in = n;
    m.width = n;
    m.wx.assign(static_cast<std::size_t>(4 * n) * n, 0.0);
    m.wh.assign(static_cast<std::size_t>(4 * n) * n, 0.0);
    m.b.assign(static_cast<std::size_t>(4 * n), 0.0);
    net.layers.emplace_back(std::move(m));
  }
  for (int l = 0; l < params.rec2out_layers; ++l) dense(n, n, false);
  dense(n, kOutputWidth, true);
  return net;
}

Network build_network(const HyperParams& params, std::uint64_t seed) {
  Network net = make_network(params);
  SplitMix64 rng(seed);
  for (Layer& layer : net.layers) {
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      d->w = glorot_uniform(d->in, d->out, rng);
    } else {
      auto& m = std::get<LstmLayer>(layer);
      // per-gate fans: each gate block is an independent width x in matrix
      for (int gate = 0; gate < 4; ++gate) {
        auto block = glorot_uniform(m.in, m.width, rng);
        std::copy(block.begin(), block.end(),
                  m.wx.begin() + static_cast<std::ptrdiff_t>(gate) * m.width * m.in);
      }
      for (int gate = 0; gate < 4; ++gate) {
        auto block = glorot_uniform(m.width, m.width, rng);
        std::copy(block.begin(), block.end(),
                  m.wh.begin() + static_cast<std::ptrdiff_t>(gate) * m.width * m.width);
      }
    }
  }
  return net;
}

std::vector<std::span<double>> parameter_tensors(Network& net) {
  std::vector<std::span<double>> tensors;
  for (Layer& layer : net.layers) {
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      tensors.emplace_back(d->w);
      tensors.emplace_back(d->b);
    } else {
      auto& m = std::get<LstmLayer>(layer);
      tensors.emplace_back(m.wx);
      tensors.emplace_back(m.wh);
      tensors.emplace_back(m.b);
    }
  }
  return tensors;
}

std::vector<std::span<const double>> parameter_tensors(const Network& net) {
  std::vector<std::span<const double>> tensors;
  for (const Layer& layer : net.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      tensors.emplace_back(d->w);
      tensors.emplace_back(d->b);
    } else {
      const auto& m = std::get<LstmLayer>(layer);
      tensors.emplace_back(m.wx);
      tensors.emplace_back(m.wh);
      tensors.emplace_back(m.b);
    }
  }
  return tensors;
}

std::size_t parameter_count(const Network& net) {
  std::size_t count = 0;
  for (const auto& t : parameter_tensors(net)) count += t.size();
  return count;
}

std::vector<ProbRow> forward(const Network& net, const FeatureSequence& seq) {
  Trace tr;
  forward_pass(net, seq, tr);
  const std::size_t T = seq.steps.size();
  const auto& out = tr.acts.back();

  std::vector<ProbRow> probs(T);
  for (std::size_t t = 0; t < T; ++t) {
    for (int k = 0; k < kOutputWidth; ++k) probs[t][k] = out[t * kOutputWidth + k];
  }
  return probs;
}

LstmState make_lstm_state(const LstmLayer& layer) {
  LstmState state;
  state.h.assign(static_cast<std::size_t>(layer.width), 0.0);
  state.c.assign(static_cast<std::size_t>(layer.width), 0.0);
  return state;
}

void lstm_step(const LstmLayer& layer, std::span<const double> input, LstmState& state) {
  if (static_cast<int>(input.size()) != layer.in ||
      static_cast<int>(state.h.size()) != layer.width)
    throw std::runtime_error("lstm_step: shape mismatch");
  const std::size_t w = static_cast<std::size_t>(layer.width);
  std::vector<double> scratch(4 * w), gi(w), gf(w), gg(w), go(w), c(w), tanh_c(w), h(w);
  lstm_cell(layer, input.data(), state.h.data(), state.c.data(), scratch.data(), gi.data(),
            gf.data(), gg.data(), go.data(), c.data(), tanh_c.data(), h.data());
  state.c = std::move(c);
  state.h = std::move(h);
}

GradientSet make_zero_gradients(const Network& net) {
  GradientSet grads;
  for (const auto& t : parameter_tensors(net)) grads.tensors.emplace_back(t.size(), 0.0);
  return grads;
}

void accumulate(GradientSet& into, const GradientSet& grads) {
  for (std::size_t i = 0; i < into.tensors.size(); ++i) {
    auto& dst = into.tensors[i];
    const auto& src = grads.tensors[i];
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

void scale(GradientSet& grads, double factor) {
  for (auto& t : grads.tensors) {
    for (double& x : t) x *= factor;
  }
}

BackwardResult backward(const Network& net, const FeatureSequence& seq, RoadUserClass target) {
  Trace tr;
  forward_pass(net, seq, tr);
  const std::size_t T = seq.steps.size();
  const std::size_t L = net.layers.size();
  const int target_idx = static_cast<int>(target);

  const auto& probs = tr.acts[L];
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t)
    loss -= std::log(std::max(probs[t * kOutputWidth + target_idx], 1e-12));
  loss /= static_cast<double>(T);

  BackwardResult result;
  result.loss = loss;
  result.grads = make_zero_gradients(net);

  // tensor slot of each layer's first gradient
  std::vector<std::size_t> slot(L);
  std::size_t next_slot = 0;
  int max_width = kInputWidth;
  for (std::size_t l = 0; l < L; ++l) {
    slot[l] = next_slot;
    next_slot += std::holds_alternative<DenseLayer>(net.layers[l]) ? 2 : 3;
    max_width = std::max(max_width, output_width(net.layers[l]));
  }

  // gradients carried across timesteps, one pair per LSTM layer
  std::vector<std::vector<double>> dh_carry(L), dc_carry(L);
  for (std::size_t l = 0; l < L; ++l) {
    if (std::holds_alternative<LstmLayer>(net.layers[l])) {
      const std::size_t w = static_cast<std::size_t>(output_width(net.layers[l]));
      dh_carry[l].assign(w, 0.0);
      dc_carry[l].assign(w, 0.0);
    }
  }

  std::vector<double> zeros(static_cast<std::size_t>(max_width), 0.0);
  std::vector<double> g_cur(static_cast<std::size_t>(max_width));
  std::vector<double> g_next(static_cast<std::size_t>(max_width));
  std::vector<double> da(static_cast<std::size_t>(4 * max_width));

  const double inv_t = 1.0 / static_cast<double>(T);
  for (std::size_t ti = T; ti-- > 0;) {
    // softmax + cross-entropy fused: dL/dz = (p - y) / T at the output layer
    for (int k = 0; k < kOutputWidth; ++k) {
      g_cur[static_cast<std::size_t>(k)] =
          (probs[ti * kOutputWidth + static_cast<std::size_t>(k)] - (k == target_idx ? 1.0 : 0.0)) *
          inv_t;
    }

    for (std::size_t l = L; l-- > 0;) {
      if (const auto* d = std::get_if<DenseLayer>(&net.layers[l])) {
        const double* out = tr.acts[l + 1].data() + ti * static_cast<std::size_t>(d->out);
        if (!d->softmax_output) {
          for (int j = 0; j < d->out; ++j) g_cur[static_cast<std::size_t>(j)] *= activate_deriv(d->act, out[j]);
        }
        const double* input = tr.acts[l].data() + ti * static_cast<std::size_t>(d->in);
        outer_acc(result.grads.tensors[slot[l]], g_cur.data(), d->out, input, d->in);
        auto& db = result.grads.tensors[slot[l] + 1];
        for (int j = 0; j < d->out; ++j) db[static_cast<std::size_t>(j)] += g_cur[static_cast<std::size_t>(j)];

        std::fill(g_next.begin(), g_next.begin() + d->in, 0.0);
        matvec_transposed_acc(d->w, d->out, d->in, g_cur.data(), g_next.data());
        std::swap(g_cur, g_next);
      } else {
        const auto& m = std::get<LstmLayer>(net.layers[l]);
        const LstmTrace& lt = tr.lstm[l];
        const std::size_t w = static_cast<std::size_t>(m.width);
        const double* gi = lt.i.data() + ti * w;
        const double* gf = lt.f.data() + ti * w;
        const double* gg = lt.g.data() + ti * w;
        const double* go = lt.o.data() + ti * w;
        const double* tanh_c = lt.tanh_c.data() + ti * w;
        const double* c_prev = ti > 0 ? lt.c.data() + (ti - 1) * w : zeros.data();
        const double* h_prev = ti > 0 ? tr.acts[l + 1].data() + (ti - 1) * w : zeros.data();

        for (std::size_t j = 0; j < w; ++j) {
          const double dh = g_cur[j] + dh_carry[l][j];
          const double d_out_gate = dh * tanh_c[j];
          const double dc = dh * go[j] * (1.0 - tanh_c[j] * tanh_c[j]) + dc_carry[l][j];
          da[j] = dc * gg[j] * gi[j] * (1.0 - gi[j]);                    // input gate
          da[w + j] = dc * c_prev[j] * gf[j] * (1.0 - gf[j]);           // forget gate
          da[2 * w + j] = dc * gi[j] * (1.0 - gg[j] * gg[j]);           // candidate
          da[3 * w + j] = d_out_gate * go[j] * (1.0 - go[j]);           // output gate
          dc_carry[l][j] = dc * gf[j];
        }

        const double* x_in = tr.acts[l].data() + ti * static_cast<std::size_t>(m.in);
        outer_acc(result.grads.tensors[slot[l]], da.data(), 4 * m.width, x_in, m.in);
        outer_acc(result.grads.tensors[slot[l] + 1], da.data(), 4 * m.width, h_prev, m.width);
        auto& db = result.grads.tensors[slot[l] + 2];
        for (std::size_t j = 0; j < 4 * w; ++j) db[j] += da[j];

        std::fill(g_next.begin(), g_next.begin() + m.in, 0.0);
        matvec_transposed_acc(m.wx, 4 * m.width, m.in, da.data(), g_next.data());
        std::fill(dh_carry[l].begin(), dh_carry[l].end(), 0.0);
        matvec_transposed_acc(m.wh, 4 * m.width, m.width, da.data(), dh_carry[l].data());
        std::swap(g_cur, g_next);
      }
    }
  }
  return result;
}

}  // namespace ruc
