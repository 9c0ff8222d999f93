#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ruc/synthetic.hpp"
#include "ruc/training.hpp"

using namespace ruc;

namespace {

FeatureSequence constant_sequence(RoadUserClass label, double fill, int T = 6) {
  FeatureSequence seq;
  seq.id = std::string("c_") + to_string(label);
  seq.label = label;
  seq.steps.assign(static_cast<std::size_t>(T), FeatureVector{fill, fill, fill, fill, fill});
  return seq;
}

LabeledDataset tiny_synthetic_dataset(std::uint64_t seed, int per_class = 6, int window = 12) {
  const auto col =
      generate_synthetic_collection(default_synthetic_profiles(), per_class, 60.0, 1.0, seed);
  return build_variant(col, {1, window}, seed);
}

double dataset_validation_loss(const Network& net, const LabeledDataset& data) {
  double total = 0.0;
  for (const auto& seq : data.validation) total += sequence_loss(forward(net, seq), seq.label);
  return total / static_cast<double>(data.validation.size());
}

}  // namespace

TEST_CASE("sequence loss arithmetic") {
  SUBCASE("perfect prediction") {
    std::vector<ProbRow> rows(5, ProbRow{1.0, 0.0, 0.0, 0.0});
    CHECK(sequence_loss(rows, RoadUserClass::pedestrian) <= 1e-11);
  }
  SUBCASE("uniform rows give ln 4") {
    std::vector<ProbRow> rows(7, ProbRow{0.25, 0.25, 0.25, 0.25});
    CHECK(sequence_loss(rows, RoadUserClass::motorcyclist) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("two-row mean") {
    std::vector<ProbRow> rows{{0.5, 0.5 / 3, 0.5 / 3, 0.5 / 3},
                              {0.25, 0.25, 0.25, 0.25}};
    CHECK(sequence_loss(rows, RoadUserClass::pedestrian) ==
          doctest::Approx(1.039721).epsilon(1e-6));
  }
}

TEST_CASE("adam first step and zero-gradient fixpoint") {
  Network net = build_network({1, 1, 1, 3, Activation::tanh}, 7);
  const TrainConfig config;
  AdamState state = make_adam_state(net);

  const auto before = parameter_tensors(net)[0][0];
  GradientSet grads = make_zero_gradients(net);
  grads.tensors[0][0] = 0.75;  // single nonzero gradient
  adam_step(state, net, grads, config);

  // bias-corrected first step moves by ~eta * sign(g)
  const auto after = parameter_tensors(net)[0][0];
  CHECK(std::fabs((before - after) - config.learning_rate) < 1e-6 * config.learning_rate);

  // all other parameters untouched
  const auto tensors = parameter_tensors(net);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    for (std::size_t j = 0; j < tensors[i].size(); ++j) {
      if (i == 0 && j == 0) continue;
      CHECK(grads.tensors[i][j] == 0.0);
    }
  }

  // zero gradients forever: parameters stay put
  Network frozen = build_network({1, 1, 1, 3, Activation::tanh}, 8);
  const Network reference = frozen;
  AdamState fstate = make_adam_state(frozen);
  const GradientSet zeros = make_zero_gradients(frozen);
  for (int s = 0; s < 5; ++s) adam_step(fstate, frozen, zeros, config);
  const auto ta = parameter_tensors(frozen);
  const auto tb = parameter_tensors(reference);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    for (std::size_t j = 0; j < ta[i].size(); ++j) CHECK(ta[i][j] == tb[i][j]);
  }
}

TEST_CASE("adam matches the scalar hand iteration") {
  // frozen from iterating the update equations by hand at g = 0.5
  const double expected[3] = {0.99900000002, 0.99800000004, 0.99700000006};

  Network net = build_network({1, 1, 1, 3, Activation::tanh}, 7);
  auto tensors = parameter_tensors(net);
  tensors[0][0] = 1.0;
  AdamState state = make_adam_state(net);
  GradientSet grads = make_zero_gradients(net);
  grads.tensors[0][0] = 0.5;

  const TrainConfig config;
  for (int s = 0; s < 3; ++s) {
    adam_step(state, net, grads, config);
    CHECK(parameter_tensors(net)[0][0] == doctest::Approx(expected[s]).epsilon(1e-12));
  }
}

TEST_CASE("single full batch epoch equals one hand-built adam step") {
  LabeledDataset data = tiny_synthetic_dataset(31);
  const int n = static_cast<int>(data.train.size());

  TrainConfig config;
  config.batch_size = n;  // one batch per epoch
  config.max_epochs = 1;
  config.patience = 5;
  config.shuffle_seed = 77;

  const Network start = build_network({1, 1, 1, 6, Activation::tanh}, 5);
  auto [trained, history] = train(start, data, config);
  CHECK(history.train_loss.size() == 1);

  // replicate: mean gradient over the whole train set in the same shuffled
  // accumulation order, one adam step
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(mix_seed(config.shuffle_seed, 1));
  shuffle(order, rng);

  Network manual = start;
  GradientSet grads = make_zero_gradients(manual);
  for (std::size_t k : order)
    accumulate(grads, backward(manual, data.train[k], data.train[k].label).grads);
  scale(grads, 1.0 / static_cast<double>(n));
  AdamState state = make_adam_state(manual);
  adam_step(state, manual, grads, config);

  const auto ta = parameter_tensors(trained);
  const auto tb = parameter_tensors(manual);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    for (std::size_t j = 0; j < ta[i].size(); ++j) CHECK(ta[i][j] == tb[i][j]);
  }
}

TEST_CASE("minibatch walk with a partial final batch is replicated bit-exactly") {
  LabeledDataset data = tiny_synthetic_dataset(32);
  const std::size_t n = data.train.size();
  REQUIRE(n > 4);

  TrainConfig config;
  config.batch_size = static_cast<int>(n - 2);  // forces a final partial batch of 2
  config.max_epochs = 1;
  config.shuffle_seed = 123;

  const Network start = build_network({1, 1, 1, 5, Activation::tanh}, 9);
  auto [trained, history] = train(start, data, config);

  // same shuffled order as the implementation derives for epoch 1
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(mix_seed(config.shuffle_seed, 1));
  shuffle(order, rng);

  Network manual = start;
  AdamState state = make_adam_state(manual);
  for (std::size_t start_idx = 0; start_idx < n;
       start_idx += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t end = std::min(n, start_idx + static_cast<std::size_t>(config.batch_size));
    GradientSet grads = make_zero_gradients(manual);
    for (std::size_t k = start_idx; k < end; ++k) {
      const auto& seq = data.train[order[k]];
      accumulate(grads, backward(manual, seq, seq.label).grads);
    }
    scale(grads, 1.0 / static_cast<double>(end - start_idx));
    adam_step(state, manual, grads, config);
  }
  CHECK(state.step == 2);  // ceil(n / batch) adam steps

  const auto ta = parameter_tensors(trained);
  const auto tb = parameter_tensors(manual);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    for (std::size_t j = 0; j < ta[i].size(); ++j) CHECK(ta[i][j] == tb[i][j]);
  }
}

TEST_CASE("rigged non-improving validation stops after 1 + patience epochs") {
  // train and validation carry the same inputs with contradictory labels, so
  // every step the optimizer takes makes the validation loss worse
  LabeledDataset data;
  data.spec = {1, 6};
  for (int i = 0; i < 8; ++i) {
    data.train.push_back(constant_sequence(RoadUserClass::pedestrian, 0.2 + 0.05 * i));
    data.validation.push_back(constant_sequence(RoadUserClass::passenger_car, 0.2 + 0.05 * i));
  }
  for (int f = 0; f < kFeatureCount; ++f) {
    data.standardizer.mean[f] = 0.0;
    data.standardizer.stddev[f] = 1.0;
  }

  TrainConfig config;
  config.patience = 10;
  config.max_epochs = 100;
  config.shuffle_seed = 3;

  const Network start = build_network({1, 1, 1, 4, Activation::tanh}, 21);
  auto [trained, history] = train(start, data, config);

  CHECK(history.stop_reason == StopReason::patience);
  CHECK(history.best_epoch == 1);
  CHECK(history.train_loss.size() == 11);  // 1 + patience

  // validation got strictly worse from the start
  for (std::size_t e = 1; e < history.validation_loss.size(); ++e)
    CHECK(history.validation_loss[e] > history.validation_loss[0]);

  // restored weights reproduce the recorded best validation loss
  const double restored = dataset_validation_loss(trained, data);
  CHECK(std::fabs(restored - history.best_validation_loss()) < 1e-12);
}

TEST_CASE("training a separable synthetic dataset reduces the loss") {
  LabeledDataset data = tiny_synthetic_dataset(77, 8, 15);
  TrainConfig config;
  config.max_epochs = 12;
  config.patience = 12;
  config.shuffle_seed = 5;

  const Network start = build_network({1, 1, 1, 8, Activation::tanh}, 3);
  auto [trained, history] = train(start, data, config);

  CHECK(history.train_loss.back() < history.train_loss.front());
  CHECK(history.best_epoch >= 1);
  const double min_val =
      *std::min_element(history.validation_loss.begin(), history.validation_loss.end());
  CHECK(history.best_validation_loss() == min_val);
  CHECK(std::fabs(dataset_validation_loss(trained, data) - min_val) < 1e-12);

  if (history.stop_reason == StopReason::patience)
    CHECK(history.train_loss.size() == static_cast<std::size_t>(history.best_epoch + config.patience));
}

TEST_CASE("training is deterministic given seeds") {
  LabeledDataset data = tiny_synthetic_dataset(41);
  TrainConfig config;
  config.max_epochs = 3;
  config.shuffle_seed = 11;

  auto [a, ha] = train(build_network({1, 1, 1, 6, Activation::tanh}, 2), data, config);
  auto [b, hb] = train(build_network({1, 1, 1, 6, Activation::tanh}, 2), data, config);
  CHECK(ha.train_loss == hb.train_loss);
  CHECK(ha.validation_loss == hb.validation_loss);
  const auto ta = parameter_tensors(a);
  const auto tb = parameter_tensors(b);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    for (std::size_t j = 0; j < ta[i].size(); ++j) CHECK(ta[i][j] == tb[i][j]);
  }
}

TEST_CASE("non-finite loss raises TrainingDiverged with context") {
  LabeledDataset data = tiny_synthetic_dataset(51);
  data.train[0].steps[2].velocity = std::numeric_limits<double>::quiet_NaN();

  TrainConfig config;
  config.max_epochs = 2;
  try {
    train(build_network({1, 1, 1, 4, Activation::tanh}, 1), data, config);
    CHECK(false);
  } catch (const TrainingDiverged& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("empty partitions are rejected") {
  LabeledDataset data = tiny_synthetic_dataset(61);
  LabeledDataset no_train = data;
  no_train.train.clear();
  CHECK_THROWS(train(build_network({1, 1, 1, 4, Activation::tanh}, 1), no_train, {}));
  LabeledDataset no_val = data;
  no_val.validation.clear();
  CHECK_THROWS(train(build_network({1, 1, 1, 4, Activation::tanh}, 1), no_val, {}));
}

TEST_CASE("gradient clipping caps the update, off by default") {
  LabeledDataset data = tiny_synthetic_dataset(91);

  TrainConfig off;
  off.max_epochs = 1;
  off.shuffle_seed = 4;
  TrainConfig clipped = off;
  clipped.clip_norm = 1e-6;  // absurdly tight: every batch gradient is rescaled

  const Network start = build_network({1, 1, 1, 5, Activation::tanh}, 13);
  auto [a, ha] = train(start, data, off);
  auto [b, hb] = train(start, data, clipped);

  // the clipped run must move the weights far less than the unclipped run
  double moved_a = 0.0, moved_b = 0.0;
  const auto t0 = parameter_tensors(start);
  const auto ta = parameter_tensors(a);
  const auto tb = parameter_tensors(b);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    for (std::size_t j = 0; j < t0[i].size(); ++j) {
      moved_a += std::fabs(ta[i][j] - t0[i][j]);
      moved_b += std::fabs(tb[i][j] - t0[i][j]);
    }
  }
  CHECK(moved_b < moved_a);
  CHECK(moved_b > 0.0);

  // clip_norm = 0 is the default and changes nothing relative to off
  TrainConfig zero = off;
  zero.clip_norm = 0.0;
  auto [c, hc] = train(start, data, zero);
  const auto tc = parameter_tensors(c);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    for (std::size_t j = 0; j < ta[i].size(); ++j) CHECK(ta[i][j] == tc[i][j]);
  }
}

TEST_CASE("history serialization") {
  TrainHistory history;
  history.train_loss = {1.25, 1.0};
  history.validation_loss = {1.5, 1.1};
  history.epoch_ms = {12, 11};
  history.best_epoch = 2;
  history.stop_reason = StopReason::max_epochs;

  const std::string csv = training_log_csv(history);
  CHECK(csv.rfind("epoch,train_loss,val_loss,elapsed_ms\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("1,1.25,1.5,12\n") != std::string::npos);

  // digest ignores timings and is stable
  TrainHistory other = history;
  other.epoch_ms = {99, 98};
  CHECK(history_digest(history) == history_digest(other));
  other.train_loss[0] = 1.26;
  CHECK(history_digest(history) != history_digest(other));
}
