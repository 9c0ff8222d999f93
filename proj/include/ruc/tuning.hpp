#ifndef RUC_TUNING_HPP
#define RUC_TUNING_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "ruc/training.hpp"

namespace ruc {

// Candidate values per hyperparameter axis. defaults() is the standard
// 3 * 3 * 3 * 4 * 2 = 216-combination grid.
struct GridSpec {
  std::vector<int> in2rec = {1, 2, 4};
  std::vector<int> lstm = {1, 2, 4};
  std::vector<int> rec2out = {1, 2, 4};
  std::vector<int> width = {32, 64, 128, 256};
  std::vector<Activation> activation = {Activation::tanh, Activation::relu};
};

void validate(const GridSpec& grid);

// Cartesian product in fixed nesting order: in2rec outermost, then lstm,
// rec2out, width, activation innermost.
std::vector<HyperParams> enumerate_grid(const GridSpec& grid);

struct GridRecord {
  int combo_index = -1;
  HyperParams params;
  bool ok = false;            // false = training diverged
  double val_loss = 0.0;      // best validation loss of the run
  int best_epoch = 0;
  std::int64_t elapsed_ms = 0;
};

struct GridResult {
  std::vector<GridRecord> records;  // ordered by combo_index
  int winner_index = -1;
};

// Lowest validation loss among successful records; ties broken by fewer
// parameters, then enumeration order. Returns -1 if nothing succeeded.
int select_winner(const std::vector<GridRecord>& records);

struct GridSearchOptions {
  int workers = 1;
  // Completed records to skip (resume support); matched by combo_index.
  std::vector<GridRecord> resume;
  // Invoked under a lock as each job finishes, in completion order.
  std::function<void(const GridRecord&)> on_record;
};

// Trains one model per grid combination, each with its own sub-seed derived
// from (base_seed, combo index) so results do not depend on worker
// scheduling. Diverged jobs are recorded as failed instead of aborting.
// Throws if every job fails.
GridResult grid_search(const LabeledDataset& data, const GridSpec& grid,
                       const TrainConfig& base_config, std::uint64_t base_seed,
                       const GridSearchOptions& options = {});

// Leaderboard CSV: `combo_index,l_in2rec,l_lstm,l_rec2out,n,activation,
// val_loss,best_epoch,status,elapsed_ms`.
std::string leaderboard_csv(const std::vector<GridRecord>& records);
std::vector<GridRecord> parse_leaderboard_csv(const std::string& content);

void write_grid_summary_json(const GridResult& result, const std::filesystem::path& path);

}  // namespace ruc

#endif  // RUC_TUNING_HPP
