#include "ruc/tuning.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "text_util.hpp"

namespace ruc {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

GridRecord run_combo(const LabeledDataset& data, const HyperParams& params,
                     const TrainConfig& base_config, std::uint64_t base_seed, int index) {
  GridRecord record;
  record.combo_index = index;
  record.params = params;

  TrainConfig config = base_config;
  config.shuffle_seed = mix_seed(base_seed, static_cast<std::uint64_t>(index), 1);

  const auto start = std::chrono::steady_clock::now();
  try {
    Network net = build_network(params, mix_seed(base_seed, static_cast<std::uint64_t>(index), 0));
    auto [trained, history] = train(std::move(net), data, config);
    record.ok = true;
    record.val_loss = history.best_validation_loss();
    record.best_epoch = history.best_epoch;
  } catch (const TrainingDiverged&) {
    record.ok = false;
  }
  const auto end = std::chrono::steady_clock::now();
  record.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
  return record;
}

}  // namespace

void validate(const GridSpec& grid) {
  if (grid.in2rec.empty() || grid.lstm.empty() || grid.rec2out.empty() || grid.width.empty() ||
      grid.activation.empty())
    fail("grid: every axis needs at least one candidate value");
}

std::vector<HyperParams> enumerate_grid(const GridSpec& grid) {
  validate(grid);
  std::vector<HyperParams> combos;
  combos.reserve(grid.in2rec.size() * grid.lstm.size() * grid.rec2out.size() *
                 grid.width.size() * grid.activation.size());
  for (int i2r : grid.in2rec) {
    for (int l : grid.lstm) {
      for (int r2o : grid.rec2out) {
        for (int n : grid.width) {
          for (Activation a : grid.activation) {
            HyperParams p{i2r, l, r2o, n, a};
            validate(p);
            combos.push_back(p);
          }
        }
      }
    }
  }
  return combos;
}

int select_winner(const std::vector<GridRecord>& records) {
  int winner = -1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const GridRecord& r = records[i];
    if (!r.ok) continue;
    if (winner < 0) {
      winner = static_cast<int>(i);
      continue;
    }
    const GridRecord& best = records[static_cast<std::size_t>(winner)];
    if (r.val_loss < best.val_loss ||
        (r.val_loss == best.val_loss &&
         parameter_count(r.params) < parameter_count(best.params))) {
      winner = static_cast<int>(i);
    }
  }
  return winner;
}

GridResult grid_search(const LabeledDataset& data, const GridSpec& grid,
                       const TrainConfig& base_config, std::uint64_t base_seed,
                       const GridSearchOptions& options) {
  const std::vector<HyperParams> combos = enumerate_grid(grid);

  GridResult result;
  result.records.resize(combos.size());
  std::vector<bool> done(combos.size(), false);
  for (const GridRecord& r : options.resume) {
    if (r.combo_index < 0 || r.combo_index >= static_cast<int>(combos.size())) continue;
    // a leaderboard from a different grid must not poison this search
    const HyperParams& expected = combos[static_cast<std::size_t>(r.combo_index)];
    if (r.params.in2rec_layers != expected.in2rec_layers ||
        r.params.lstm_layers != expected.lstm_layers ||
        r.params.rec2out_layers != expected.rec2out_layers ||
        r.params.width != expected.width || r.params.activation != expected.activation)
      continue;
    result.records[static_cast<std::size_t>(r.combo_index)] = r;
    done[static_cast<std::size_t>(r.combo_index)] = true;
  }

  std::atomic<std::size_t> next{0};
  std::mutex record_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= combos.size()) return;
      if (done[i]) continue;
      GridRecord record = run_combo(data, combos[i], base_config, base_seed,
                                    static_cast<int>(i));
      std::lock_guard<std::mutex> lock(record_mutex);
      result.records[i] = record;
      if (options.on_record) options.on_record(record);
    }
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  result.winner_index = select_winner(result.records);
  if (result.winner_index < 0) fail("grid: every combination failed to train");
  return result;
}

std::string leaderboard_csv(const std::vector<GridRecord>& records) {
  std::string out =
      "combo_index,l_in2rec,l_lstm,l_rec2out,n,activation,val_loss,best_epoch,status,elapsed_ms\n";
  for (const GridRecord& r : records) {
    out += std::to_string(r.combo_index);
    out += ',';
    out += std::to_string(r.params.in2rec_layers);
    out += ',';
    out += std::to_string(r.params.lstm_layers);
    out += ',';
    out += std::to_string(r.params.rec2out_layers);
    out += ',';
    out += std::to_string(r.params.width);
    out += ',';
    out += to_string(r.params.activation);
    out += ',';
    out += r.ok ? detail::format_double(r.val_loss) : "nan";
    out += ',';
    out += std::to_string(r.best_epoch);
    out += ',';
    out += r.ok ? "ok" : "failed";
    out += ',';
    out += std::to_string(r.elapsed_ms);
    out += '\n';
  }
  return out;
}

std::vector<GridRecord> parse_leaderboard_csv(const std::string& content) {
  auto lines = detail::split(content, '\n');
  if (lines.empty()) fail("leaderboard: empty file");
  std::vector<GridRecord> records;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    std::string_view line = detail::strip_cr(lines[li]);
    if (line.empty()) continue;
    auto fields = detail::split(line, ',');
    if (fields.size() != 10) fail("leaderboard line " + std::to_string(li + 1) + ": expected 10 fields");

    GridRecord r;
    std::int64_t tmp = 0;
    if (!detail::parse_int64(fields[0], tmp)) fail("leaderboard: malformed combo_index");
    r.combo_index = static_cast<int>(tmp);
    if (!detail::parse_int64(fields[1], tmp)) fail("leaderboard: malformed l_in2rec");
    r.params.in2rec_layers = static_cast<int>(tmp);
    if (!detail::parse_int64(fields[2], tmp)) fail("leaderboard: malformed l_lstm");
    r.params.lstm_layers = static_cast<int>(tmp);
    if (!detail::parse_int64(fields[3], tmp)) fail("leaderboard: malformed l_rec2out");
    r.params.rec2out_layers = static_cast<int>(tmp);
    if (!detail::parse_int64(fields[4], tmp)) fail("leaderboard: malformed n");
    r.params.width = static_cast<int>(tmp);
    auto act = parse_activation(fields[5]);
    if (!act) fail("leaderboard: unknown activation");
    r.params.activation = *act;
    r.ok = fields[8] == "ok";
    if (r.ok && !detail::parse_double(fields[6], r.val_loss))
      fail("leaderboard: malformed val_loss");
    if (!detail::parse_int64(fields[7], tmp)) fail("leaderboard: malformed best_epoch");
    r.best_epoch = static_cast<int>(tmp);
    if (!detail::parse_int64(fields[9], tmp)) fail("leaderboard: malformed elapsed_ms");
    r.elapsed_ms = tmp;
    records.push_back(r);
  }
  return records;
}

void write_grid_summary_json(const GridResult& result, const std::filesystem::path& path) {
  const GridRecord& w = result.records.at(static_cast<std::size_t>(result.winner_index));
  nlohmann::json j;
  j["combinations"] = result.records.size();
  int failed = 0;
  for (const GridRecord& r : result.records) {
    if (!r.ok) ++failed;
  }
  j["failed"] = failed;
  j["winner"] = {{"combo_index", w.combo_index},
                 {"l_in2rec", w.params.in2rec_layers},
                 {"l_lstm", w.params.lstm_layers},
                 {"l_rec2out", w.params.rec2out_layers},
                 {"n", w.params.width},
                 {"activation", to_string(w.params.activation)},
                 {"val_loss", w.val_loss},
                 {"best_epoch", w.best_epoch},
                 {"parameters", parameter_count(w.params)}};
  detail::write_file(path, j.dump(2) + "\n");
}

}  // namespace ruc
