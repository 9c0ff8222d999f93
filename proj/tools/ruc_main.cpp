// ruc: road user trajectory classification toolkit.
//
// Batch pipeline: synth -> prepare -> train/tune -> eval/curve/predict.
// Every stage is deterministic given its --seed; all randomness flows from
// explicit seeds, never the wall clock.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ruc/dataset.hpp"
#include "ruc/evaluation.hpp"
#include "ruc/model_store.hpp"
#include "ruc/synthetic.hpp"
#include "ruc/training.hpp"
#include "ruc/tuning.hpp"

namespace fs = std::filesystem;
using namespace ruc;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

Activation activation_from_flag(const std::string& name) {
  const auto act = parse_activation(name);
  if (!act) throw std::runtime_error("unknown activation '" + name + "' (tanh or relu)");
  return *act;
}

void check_model_matches_dataset(const LoadedModel& model, const LabeledDataset& ds) {
  if (model.standardizer.mean != ds.standardizer.mean ||
      model.standardizer.stddev != ds.standardizer.stddev)
    throw std::runtime_error(
        "model standardizer does not match the dataset archive; evaluate against the "
        "archive the model was trained on");
}

int run_synth(std::uint64_t seed, int per_class, double duration_s, double interval_s,
              const fs::path& out) {
  const auto collection = generate_synthetic_collection(default_synthetic_profiles(), per_class,
                                                        duration_s, interval_s, seed);
  write_collection(collection, out);
  const CollectionSummary summary = summarize(collection);
  std::printf("wrote %zu trajectories (%.2f h) to %s\n", collection.trajectories().size(),
              summary.total_duration_h, out.string().c_str());
  for (int c = 0; c < kClassCount; ++c)
    std::printf("  %-14s %3d trajectories  share %.3f\n", to_string(kAllClasses[c]),
                summary.trajectory_counts[c], summary.duration_share[c]);
  return 0;
}

int run_prepare(const fs::path& manifest, int stride, int window, std::uint64_t seed,
                const fs::path& out, double test_frac, double val_frac,
                std::optional<double> max_accuracy) {
  const TrajectoryCollection collection = load_collection_file(manifest, max_accuracy);
  const DatasetVariantSpec spec{stride, window};
  const LabeledDataset ds = build_variant(collection, spec, seed, test_frac, val_frac);
  const fs::path dir = out / variant_dir_name(spec);
  write_dataset_archive(ds, dir);
  std::printf("wrote %s: train=%zu validation=%zu test=%zu sequences of length %d\n",
              dir.string().c_str(), ds.train.size(), ds.validation.size(), ds.test.size(),
              spec.window_len);
  return 0;
}

int run_train(const fs::path& data_dir, const fs::path& model_out, const fs::path& log_out,
              const fs::path& history_out, const HyperParams& params, const TrainConfig& config,
              std::uint64_t seed) {
  const LabeledDataset ds = load_dataset_archive(data_dir);
  TrainConfig cfg = config;
  if (cfg.shuffle_seed == 0) cfg.shuffle_seed = mix_seed(seed, 1);

  Network net = build_network(params, seed);
  auto [trained, history] = train(std::move(net), ds, cfg);

  ModelProvenance provenance;
  provenance.network_seed = seed;
  provenance.shuffle_seed = cfg.shuffle_seed;
  provenance.split_seed = ds.split_seed;
  provenance.dataset_variant = variant_dir_name(ds.spec);
  provenance.history_digest = history_digest(history);
  save_model_file(trained, ds.standardizer, provenance, model_out);

  if (!log_out.empty()) write_file(log_out, training_log_csv(history));
  if (!history_out.empty()) write_history_json(history, history_out);

  std::printf("trained %d epochs (stop: %s), best epoch %d, val loss %.6f -> %s\n",
              static_cast<int>(history.train_loss.size()),
              history.stop_reason == StopReason::patience ? "patience" : "max_epochs",
              history.best_epoch, history.best_validation_loss(), model_out.string().c_str());
  return 0;
}

int run_tune(const fs::path& data_dir, const fs::path& out_dir, const GridSpec& grid,
             const TrainConfig& config, std::uint64_t seed, int workers, bool resume) {
  const LabeledDataset ds = load_dataset_archive(data_dir);
  fs::create_directories(out_dir);
  const fs::path leaderboard_path = out_dir / "leaderboard.csv";
  const std::string header =
      "combo_index,l_in2rec,l_lstm,l_rec2out,n,activation,val_loss,best_epoch,status,"
      "elapsed_ms\n";

  GridSearchOptions options;
  options.workers = workers;
  if (resume && fs::exists(leaderboard_path))
    options.resume = parse_leaderboard_csv(read_file(leaderboard_path));

  // stream finished records so an interrupted search can resume
  std::ofstream stream;
  if (!options.resume.empty()) {
    stream.open(leaderboard_path, std::ios::app);
  } else {
    stream.open(leaderboard_path, std::ios::trunc);
    stream << header;
  }
  options.on_record = [&stream, &header](const GridRecord& r) {
    stream << leaderboard_csv({r}).substr(header.size());
    stream.flush();
  };

  const GridResult result = grid_search(ds, grid, config, seed, options);
  stream.close();

  // final leaderboard sorted by combination index
  write_file(leaderboard_path, leaderboard_csv(result.records));
  write_grid_summary_json(result, out_dir / "gridsearch.json");

  const GridRecord& w = result.records[static_cast<std::size_t>(result.winner_index)];
  std::printf("explored %zu combinations; winner #%d: (%d, %d, %d, %d, %s) val loss %.6f\n",
              result.records.size(), w.combo_index, w.params.in2rec_layers,
              w.params.lstm_layers, w.params.rec2out_layers, w.params.width,
              to_string(w.params.activation), w.val_loss);
  return 0;
}

int run_eval(const fs::path& model_path, const fs::path& data_dir, const fs::path& out) {
  const LoadedModel model = load_model_file(model_path);
  const LabeledDataset ds = load_dataset_archive(data_dir);
  check_model_matches_dataset(model, ds);

  const ConfusionMatrix cm = confusion_matrix(model.net, ds.test);
  const F1Report f1 = f1_report(cm);
  write_eval_json(cm, f1, out);

  for (int c = 0; c < kClassCount; ++c)
    std::printf("F1 %-14s %.4f\n", to_string(kAllClasses[c]), f1.f1[c]);
  std::printf("macro-F1          %.4f  (test size %lld) -> %s\n", f1.macro_f1,
              static_cast<long long>(cm.total()), out.string().c_str());
  return 0;
}

int run_curve(const fs::path& model_path, const fs::path& data_dir, const fs::path& out) {
  const LoadedModel model = load_model_file(model_path);
  const LabeledDataset ds = load_dataset_archive(data_dir);
  check_model_matches_dataset(model, ds);

  const ErrorCurve curve = error_rate_curve(model.net, ds.test);
  write_file(out, error_curve_csv(curve));
  std::printf("wrote per-timestep error ratios for %zu timesteps to %s\n", curve.errors.size(),
              out.string().c_str());
  return 0;
}

int run_predict(const fs::path& model_path, const fs::path& input, const fs::path& out,
                const fs::path& features_out) {
  const LoadedModel model = load_model_file(model_path);
  // the label plays no role in inference; the parser merely wants one
  const Trajectory traj = parse_trajectory_file(read_file(input), input.filename().string(),
                                                RoadUserClass::pedestrian);
  const FeatureSequence raw = compute_features(traj);
  if (!features_out.empty()) write_file(features_out, feature_sequence_to_csv(raw));
  const FeatureSequence seq = apply_standardizer(model.standardizer, raw);
  const auto probs = forward(model.net, seq);
  const int cls = predicted_class(probs.back());

  std::printf("%s  p=[", to_string(kAllClasses[cls]));
  for (int k = 0; k < kOutputWidth; ++k) std::printf("%s%.4f", k ? ", " : "", probs.back()[k]);
  std::printf("]  over %zu timesteps\n", probs.size());

  if (!out.empty()) {
    nlohmann::json j;
    j["input"] = input.string();
    j["predicted_class"] = to_string(kAllClasses[cls]);
    j["final_probabilities"] = nlohmann::json::object();
    for (int k = 0; k < kOutputWidth; ++k)
      j["final_probabilities"][to_string(kAllClasses[k])] = probs.back()[k];
    j["per_timestep"] = nlohmann::json::array();
    for (const auto& row : probs) {
      nlohmann::json r = nlohmann::json::array();
      for (int k = 0; k < kOutputWidth; ++k) r.push_back(row[k]);
      j["per_timestep"].push_back(r);
    }
    write_file(out, j.dump(2) + "\n");
  }
  return 0;
}

int run_inspect(const fs::path& model_path, const fs::path& data_dir, const fs::path& manifest) {
  if (!model_path.empty()) {
    const LoadedModel model = load_model_file(model_path);
    const HyperParams& p = model.net.spec;
    std::printf("model %s\n", model_path.string().c_str());
    std::printf("  architecture: l_in2rec=%d l_lstm=%d l_rec2out=%d n=%d activation=%s\n",
                p.in2rec_layers, p.lstm_layers, p.rec2out_layers, p.width,
                to_string(p.activation));
    std::printf("  parameters: %zu\n", parameter_count(model.net));
    std::printf("  dataset variant: %s\n", model.provenance.dataset_variant.c_str());
    std::printf("  seeds: network=%llu shuffle=%llu split=%llu\n",
                static_cast<unsigned long long>(model.provenance.network_seed),
                static_cast<unsigned long long>(model.provenance.shuffle_seed),
                static_cast<unsigned long long>(model.provenance.split_seed));
    std::printf("  history digest: %s\n", model.provenance.history_digest.c_str());
    std::printf("  standardizer mean/std per feature:\n");
    for (int f = 0; f < kFeatureCount; ++f)
      std::printf("    %-13s %12.6f %12.6f\n", kFeatureNames[f], model.standardizer.mean[f],
                  model.standardizer.stddev[f]);
  }
  if (!data_dir.empty()) {
    const LabeledDataset ds = load_dataset_archive(data_dir);
    std::printf("dataset %s: stride=%d window=%d split_seed=%llu\n", data_dir.string().c_str(),
                ds.spec.sampling_stride, ds.spec.window_len,
                static_cast<unsigned long long>(ds.split_seed));
    std::printf("  train=%zu validation=%zu test=%zu\n", ds.train.size(), ds.validation.size(),
                ds.test.size());
  }
  if (!manifest.empty()) {
    const TrajectoryCollection collection = load_collection_file(manifest);
    const CollectionSummary summary = summarize(collection);
    std::printf("collection %s: %zu trajectories, %.2f h\n", manifest.string().c_str(),
                collection.trajectories().size(), summary.total_duration_h);
    for (int c = 0; c < kClassCount; ++c)
      std::printf("  %-14s %3d trajectories  %.2f h  share %.3f\n", to_string(kAllClasses[c]),
                  summary.trajectory_counts[c], summary.duration_h[c], summary.duration_share[c]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"road user trajectory classification toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled trajectory collection");
  std::uint64_t synth_seed = 1;
  int per_class = 10;
  double duration_s = 600.0, interval_s = 1.0;
  std::string synth_out;
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
  synth->add_option("--per-class", per_class, "trajectories per class")->capture_default_str();
  synth->add_option("--duration", duration_s, "trajectory duration in seconds")
      ->capture_default_str();
  synth->add_option("--interval", interval_s, "sampling interval in seconds")
      ->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  // prepare
  auto* prepare = app.add_subcommand("prepare", "build one dataset variant from a collection");
  std::string manifest_path, prepare_out;
  int stride = 1, window = 60;
  std::uint64_t prepare_seed = 1;
  double test_frac = 0.25, val_frac = 0.20;
  double max_accuracy = -1.0;
  prepare->add_option("--manifest", manifest_path, "collection manifest.json")->required();
  prepare->add_option("--stride", stride, "sampling stride (1 or 2)")->capture_default_str();
  prepare->add_option("--window", window, "window length in timesteps")->capture_default_str();
  prepare->add_option("--seed", prepare_seed, "split seed")->capture_default_str();
  prepare->add_option("--test-frac", test_frac, "test fraction")->capture_default_str();
  prepare->add_option("--val-frac", val_frac, "validation fraction of the train split")
      ->capture_default_str();
  prepare->add_option("--max-accuracy", max_accuracy,
                      "drop samples with accuracy above this many meters (off by default)");
  prepare->add_option("--out", prepare_out, "output directory (variant subdir is created)")
      ->required();

  // shared training knobs
  TrainConfig train_cfg;
  HyperParams hp;
  std::string activation_name = "tanh";
  std::uint64_t net_seed = 1;

  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--lr", train_cfg.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--batch", train_cfg.batch_size, "minibatch size")->capture_default_str();
    cmd->add_option("--patience", train_cfg.patience, "early stopping patience in epochs")
        ->capture_default_str();
    cmd->add_option("--max-epochs", train_cfg.max_epochs, "epoch cap")->capture_default_str();
    cmd->add_option("--clip-norm", train_cfg.clip_norm,
                    "global L2 gradient clip per batch (0 = off)")
        ->capture_default_str();
    cmd->add_option("--shuffle-seed", train_cfg.shuffle_seed,
                    "epoch shuffle seed (derived from --seed when 0)")
        ->capture_default_str();
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "train one network on a dataset variant");
  std::string train_data, model_out, log_out, history_out;
  train_cmd->add_option("--data", train_data, "dataset archive directory")->required();
  train_cmd->add_option("--out", model_out, "model artifact path (.rnnmodel.json)")->required();
  train_cmd->add_option("--log", log_out, "training log CSV path");
  train_cmd->add_option("--history", history_out, "history JSON path");
  train_cmd->add_option("--in2rec", hp.in2rec_layers, "input-to-recurrent dense layers")
      ->capture_default_str();
  train_cmd->add_option("--lstm", hp.lstm_layers, "stacked LSTM layers")->capture_default_str();
  train_cmd->add_option("--rec2out", hp.rec2out_layers, "recurrent-to-output dense layers")
      ->capture_default_str();
  train_cmd->add_option("--width", hp.width, "units per hidden layer")->capture_default_str();
  train_cmd->add_option("--activation", activation_name, "hidden activation (tanh|relu)")
      ->capture_default_str();
  train_cmd->add_option("--seed", net_seed, "weight initialization seed")->capture_default_str();
  add_train_flags(train_cmd);

  // tune
  auto* tune = app.add_subcommand("tune", "grid search over the hyperparameter grid");
  std::string tune_data, tune_out;
  std::uint64_t tune_seed = 1;
  int workers = 1;
  bool resume = false;
  std::vector<int> grid_in2rec{1, 2, 4}, grid_lstm{1, 2, 4}, grid_rec2out{1, 2, 4},
      grid_width{32, 64, 128, 256};
  std::vector<std::string> grid_activation{"tanh", "relu"};
  tune->add_option("--data", tune_data, "dataset archive directory")->required();
  tune->add_option("--out", tune_out, "output directory for leaderboard and summary")->required();
  tune->add_option("--seed", tune_seed, "base seed for per-combination sub-seeds")
      ->capture_default_str();
  tune->add_option("--workers", workers, "concurrent training jobs")->capture_default_str();
  tune->add_flag("--resume", resume, "skip combinations already in the leaderboard");
  tune->add_option("--grid-in2rec", grid_in2rec, "candidate input-to-recurrent layer counts")
      ->delimiter(',');
  tune->add_option("--grid-lstm", grid_lstm, "candidate LSTM layer counts")->delimiter(',');
  tune->add_option("--grid-rec2out", grid_rec2out, "candidate recurrent-to-output layer counts")
      ->delimiter(',');
  tune->add_option("--grid-width", grid_width, "candidate layer widths")->delimiter(',');
  tune->add_option("--grid-activation", grid_activation, "candidate activations")
      ->delimiter(',');
  add_train_flags(tune);

  // eval / curve
  auto* eval_cmd = app.add_subcommand("eval", "confusion matrix and F1 scores on the test split");
  std::string eval_model, eval_data, eval_out = "eval.json";
  eval_cmd->add_option("--model", eval_model, "model artifact")->required();
  eval_cmd->add_option("--data", eval_data, "dataset archive directory")->required();
  eval_cmd->add_option("--out", eval_out, "output JSON path")->capture_default_str();

  auto* curve_cmd =
      app.add_subcommand("curve", "per-timestep error ratio curves on the test split");
  std::string curve_model, curve_data, curve_out = "error_curve.csv";
  curve_cmd->add_option("--model", curve_model, "model artifact")->required();
  curve_cmd->add_option("--data", curve_data, "dataset archive directory")->required();
  curve_cmd->add_option("--out", curve_out, "output CSV path")->capture_default_str();

  // predict
  auto* predict = app.add_subcommand("predict", "classify one raw trajectory CSV end to end");
  std::string predict_model, predict_input, predict_out, predict_features;
  predict->add_option("--model", predict_model, "model artifact")->required();
  predict->add_option("--input", predict_input, "trajectory CSV")->required();
  predict->add_option("--out", predict_out, "optional JSON with per-timestep probabilities");
  predict->add_option("--features", predict_features,
                      "optional CSV dump of the raw (unstandardized) features");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "describe a model, dataset or collection");
  std::string inspect_model, inspect_data, inspect_manifest;
  inspect->add_option("--model", inspect_model, "model artifact");
  inspect->add_option("--data", inspect_data, "dataset archive directory");
  inspect->add_option("--manifest", inspect_manifest, "collection manifest.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return run_synth(synth_seed, per_class, duration_s, interval_s, synth_out);
    if (*prepare)
      return run_prepare(manifest_path, stride, window, prepare_seed, prepare_out, test_frac,
                         val_frac,
                         max_accuracy >= 0.0 ? std::optional<double>(max_accuracy) : std::nullopt);
    if (*train_cmd) {
      hp.activation = activation_from_flag(activation_name);
      return run_train(train_data, model_out, log_out, history_out, hp, train_cfg, net_seed);
    }
    if (*tune) {
      GridSpec grid;
      grid.in2rec = grid_in2rec;
      grid.lstm = grid_lstm;
      grid.rec2out = grid_rec2out;
      grid.width = grid_width;
      grid.activation.clear();
      for (const auto& name : grid_activation) grid.activation.push_back(activation_from_flag(name));
      return run_tune(tune_data, tune_out, grid, train_cfg, tune_seed, workers, resume);
    }
    if (*eval_cmd) return run_eval(eval_model, eval_data, eval_out);
    if (*curve_cmd) return run_curve(curve_model, curve_data, curve_out);
    if (*predict)
      return run_predict(predict_model, predict_input, predict_out, predict_features);
    if (*inspect) {
      if (inspect_model.empty() && inspect_data.empty() && inspect_manifest.empty())
        throw std::runtime_error("inspect: pass --model, --data and/or --manifest");
      return run_inspect(inspect_model, inspect_data, inspect_manifest);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
