#include "ruc/training.hpp"

#include <cassert>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "text_util.hpp"

namespace ruc {

namespace {

double validation_loss(const Network& net, const std::vector<FeatureSequence>& sequences) {
  double total = 0.0;
  for (const FeatureSequence& seq : sequences) total += sequence_loss(forward(net, seq), seq.label);
  return total / static_cast<double>(sequences.size());
}

void clip_gradients(GradientSet& grads, double clip_norm) {
  double sq = 0.0;
  for (const auto& t : grads.tensors) {
    for (double g : t) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > clip_norm) scale(grads, clip_norm / norm);
}

}  // namespace

void validate(const TrainConfig& config) {
  if (config.learning_rate <= 0.0 || config.beta1 <= 0.0 || config.beta1 >= 1.0 ||
      config.beta2 <= 0.0 || config.beta2 >= 1.0 || config.epsilon <= 0.0)
    throw std::runtime_error("training: Adam parameters out of range");
  if (config.batch_size < 1) throw std::runtime_error("training: batch size must be >= 1");
  if (config.clip_norm < 0.0) throw std::runtime_error("training: clip norm must be >= 0");
  if (config.patience < 1) throw std::runtime_error("training: patience must be >= 1");
  if (config.max_epochs < 1) throw std::runtime_error("training: max epochs must be >= 1");
}

double sequence_loss(std::span<const ProbRow> probs, RoadUserClass target) {
  if (probs.empty()) throw std::runtime_error("loss: no probability rows");
  const int t_idx = static_cast<int>(target);
  double total = 0.0;
  for (const ProbRow& row : probs) total -= std::log(std::max(row[t_idx], 1e-12));
  return total / static_cast<double>(probs.size());
}

AdamState make_adam_state(const Network& net) {
  AdamState state;
  for (const auto& t : parameter_tensors(net)) {
    state.m.emplace_back(t.size(), 0.0);
    state.v.emplace_back(t.size(), 0.0);
  }
  return state;
}

void adam_step(AdamState& state, Network& net, const GradientSet& grads,
               const TrainConfig& config) {
  auto params = parameter_tensors(net);
  if (params.size() != grads.tensors.size() || params.size() != state.m.size())
    throw std::runtime_error("adam: tensor count mismatch");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    const auto& g = grads.tensors[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      assert(std::isfinite(m[j]) && std::isfinite(v[j]));
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

std::pair<Network, TrainHistory> train(Network net, const LabeledDataset& data,
                                       const TrainConfig& config) {
  validate(config);
  if (data.train.empty()) throw std::runtime_error("training: empty train partition");
  if (data.validation.empty()) throw std::runtime_error("training: empty validation partition");

  const std::size_t n_train = data.train.size();
  AdamState adam = make_adam_state(net);
  TrainHistory history;

  Network best_net = net;
  double best_loss = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();

    SplitMix64 rng(mix_seed(config.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order, rng);

    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(n_train, start + static_cast<std::size_t>(config.batch_size));

      GradientSet batch_grads = make_zero_gradients(net);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const FeatureSequence& seq = data.train[order[k]];
        BackwardResult r = backward(net, seq, seq.label);
        accumulate(batch_grads, r.grads);
        batch_loss += r.loss;
      }
      if (!std::isfinite(batch_loss))
        throw TrainingDiverged("training: non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch_index));
      epoch_loss += batch_loss;
      scale(batch_grads, 1.0 / static_cast<double>(end - start));
      if (config.clip_norm > 0.0) clip_gradients(batch_grads, config.clip_norm);
      adam_step(adam, net, batch_grads, config);
    }

    const double train_loss = epoch_loss / static_cast<double>(n_train);
    const double val_loss = validation_loss(net, data.validation);
    if (!std::isfinite(val_loss))
      throw TrainingDiverged("training: non-finite validation loss at epoch " +
                             std::to_string(epoch));

    const auto epoch_end = std::chrono::steady_clock::now();
    history.train_loss.push_back(train_loss);
    history.validation_loss.push_back(val_loss);
    history.epoch_ms.push_back(
        std::chrono::duration_cast<std::chrono::milliseconds>(epoch_end - epoch_start).count());

    if (val_loss < best_loss) {
      best_loss = val_loss;
      history.best_epoch = epoch;
      best_net = net;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    if (epochs_since_best >= config.patience) {
      history.stop_reason = StopReason::patience;
      break;
    }
    if (epoch == config.max_epochs) history.stop_reason = StopReason::max_epochs;
  }

  return {std::move(best_net), std::move(history)};
}

std::string training_log_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,val_loss,elapsed_ms\n";
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    out += std::to_string(e + 1);
    out += ',';
    out += detail::format_double(history.train_loss[e]);
    out += ',';
    out += detail::format_double(history.validation_loss[e]);
    out += ',';
    out += std::to_string(history.epoch_ms[e]);
    out += '\n';
  }
  return out;
}

void write_history_json(const TrainHistory& history, const std::filesystem::path& path) {
  nlohmann::json j;
  j["train_loss"] = history.train_loss;
  j["validation_loss"] = history.validation_loss;
  j["epoch_ms"] = history.epoch_ms;
  j["best_epoch"] = history.best_epoch;
  j["best_validation_loss"] = history.best_validation_loss();
  j["epochs"] = history.train_loss.size();
  j["stop_reason"] = history.stop_reason == StopReason::patience ? "patience" : "max_epochs";
  detail::write_file(path, j.dump(2) + "\n");
}

std::string history_digest(const TrainHistory& history) {
  // FNV-1a over the canonical decimal forms of the loss curves
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto feed = [&hash](std::string_view text) {
    for (unsigned char c : text) {
      hash ^= c;
      hash *= 0x100000001b3ULL;
    }
  };
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    feed(detail::format_double(history.train_loss[e]));
    feed(",");
    feed(detail::format_double(history.validation_loss[e]));
    feed(";");
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace ruc
