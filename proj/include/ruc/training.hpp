#ifndef RUC_TRAINING_HPP
#define RUC_TRAINING_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ruc/dataset.hpp"
#include "ruc/network.hpp"

namespace ruc {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int patience = 10;       // epochs without validation improvement before stopping
  int max_epochs = 500;    // hard cap
  double clip_norm = 0.0;  // global L2 gradient clip per batch; 0 disables
  std::uint64_t shuffle_seed = 0;
};

void validate(const TrainConfig& config);

// Mean categorical cross-entropy over all temporal outputs of one sequence;
// probabilities are clamped to >= 1e-12 before the log.
double sequence_loss(std::span<const ProbRow> probs, RoadUserClass target);

struct AdamState {
  std::vector<std::vector<double>> m, v;  // shape-matched to parameter_tensors
  std::int64_t step = 0;
};

AdamState make_adam_state(const Network& net);

// Standard Adam update with bias correction.
void adam_step(AdamState& state, Network& net, const GradientSet& grads,
               const TrainConfig& config);

// Raised when a loss or gradient turns non-finite mid-training.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class StopReason { patience, max_epochs };

struct TrainHistory {
  std::vector<double> train_loss;       // one entry per epoch
  std::vector<double> validation_loss;  // one entry per epoch
  std::vector<std::int64_t> epoch_ms;
  int best_epoch = 0;  // 1-based epoch with the lowest validation loss
  StopReason stop_reason = StopReason::max_epochs;

  double best_validation_loss() const { return validation_loss.at(best_epoch - 1); }
};

// Minibatch training with per-epoch seeded shuffling, one Adam step per
// batch (mean-of-batch gradients, final partial batch kept), early stopping
// after `patience` epochs without strict validation improvement, and
// restoration of the best-epoch weights.
std::pair<Network, TrainHistory> train(Network net, const LabeledDataset& data,
                                       const TrainConfig& config);

// One `epoch,train_loss,val_loss,elapsed_ms` line per epoch.
std::string training_log_csv(const TrainHistory& history);
void write_history_json(const TrainHistory& history, const std::filesystem::path& path);

// Stable hex digest over the loss curves (timings excluded), used to tie a
// saved model to its training run without breaking byte determinism.
std::string history_digest(const TrainHistory& history);

}  // namespace ruc

#endif  // RUC_TRAINING_HPP
