#include "ruc/dataset.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "ruc/rng.hpp"
#include "text_util.hpp"

namespace ruc {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

std::string partition_csv(const std::vector<FeatureSequence>& sequences) {
  std::string out = "sequence_id,step_index,dt,velocity,accel_pos,accel_neg,bearing_rate,label\n";
  for (const FeatureSequence& seq : sequences) {
    if (seq.id.find_first_of(",\r\n") != std::string::npos)
      fail("dataset: sequence id '" + seq.id + "' cannot be stored in a CSV archive");
    for (std::size_t i = 0; i < seq.steps.size(); ++i) {
      out += seq.id;
      out += ',';
      out += std::to_string(i);
      const auto v = seq.steps[i].values();
      for (int f = 0; f < kFeatureCount; ++f) {
        out += ',';
        out += detail::format_double(v[f]);
      }
      out += ',';
      out += to_string(seq.label);
      out += '\n';
    }
  }
  return out;
}

std::vector<FeatureSequence> parse_partition_csv(const std::string& content,
                                                 const std::string& where, int window_len) {
  std::vector<FeatureSequence> sequences;
  auto lines = detail::split(content, '\n');
  if (lines.empty() ||
      detail::strip_cr(lines[0]) !=
          "sequence_id,step_index,dt,velocity,accel_pos,accel_neg,bearing_rate,label")
    fail(where + ": malformed header");

  for (std::size_t li = 1; li < lines.size(); ++li) {
    std::string_view line = detail::strip_cr(lines[li]);
    if (line.empty()) continue;
    auto fields = detail::split(line, ',');
    if (fields.size() != 8) fail(where + " line " + std::to_string(li + 1) + ": expected 8 fields");

    const std::string id(fields[0]);
    std::int64_t step_index = 0;
    if (!detail::parse_int64(fields[1], step_index))
      fail(where + " line " + std::to_string(li + 1) + ": malformed step_index");
    std::array<double, kFeatureCount> v{};
    for (int f = 0; f < kFeatureCount; ++f) {
      if (!detail::parse_double(fields[2 + f], v[f]))
        fail(where + " line " + std::to_string(li + 1) + ": malformed feature value");
    }
    auto label = parse_road_user_class(fields[7]);
    if (!label) fail(where + " line " + std::to_string(li + 1) + ": unknown class");

    if (sequences.empty() || sequences.back().id != id) {
      if (step_index != 0)
        fail(where + ": sequence '" + id + "' does not start at step_index 0");
      sequences.push_back(FeatureSequence{id, *label, {}});
    } else if (step_index != static_cast<std::int64_t>(sequences.back().steps.size())) {
      fail(where + ": sequence '" + id + "' has non-contiguous step_index");
    }
    if (sequences.back().label != *label)
      fail(where + ": sequence '" + id + "' has inconsistent labels");
    sequences.back().steps.push_back(FeatureVector::from_values(v));
  }

  for (const FeatureSequence& seq : sequences) {
    if (static_cast<int>(seq.steps.size()) != window_len)
      fail(where + ": sequence '" + seq.id + "' has length " +
           std::to_string(seq.steps.size()) + ", expected " + std::to_string(window_len));
  }
  return sequences;
}

nlohmann::json class_count_json(const std::vector<FeatureSequence>& sequences) {
  std::array<int, kClassCount> counts{};
  for (const FeatureSequence& s : sequences) counts[static_cast<int>(s.label)] += 1;
  nlohmann::json j = nlohmann::json::object();
  for (int c = 0; c < kClassCount; ++c) j[to_string(kAllClasses[c])] = counts[c];
  return j;
}

}  // namespace

void validate(const DatasetVariantSpec& spec) {
  if (spec.sampling_stride != 1 && spec.sampling_stride != 2)
    fail("dataset: sampling stride must be 1 or 2");
  if (spec.window_len <= 2) fail("dataset: window length must be > 2");
}

std::string variant_dir_name(const DatasetVariantSpec& spec) {
  return "stride" + std::to_string(spec.sampling_stride) + "_win" +
         std::to_string(spec.window_len);
}

std::vector<Trajectory> window_trajectory(const Trajectory& traj, int window_len) {
  if (window_len < 2) fail("dataset: window length must be >= 2");
  const auto& samples = traj.samples();
  const std::size_t len = static_cast<std::size_t>(window_len);

  std::vector<Trajectory> windows;
  for (std::size_t start = 0, k = 0; start + len <= samples.size(); start += len, ++k) {
    std::vector<RawSample> slice(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                 samples.begin() + static_cast<std::ptrdiff_t>(start + len));
    windows.emplace_back(traj.id() + "/w" + std::to_string(k), traj.label(), std::move(slice));
  }
  return windows;
}

Trajectory downsample_alternate(const Trajectory& traj) {
  if (traj.size() < 2) fail("dataset: downsampling needs at least 2 samples");
  std::vector<RawSample> kept;
  kept.reserve((traj.size() + 1) / 2);
  for (std::size_t i = 0; i < traj.size(); i += 2) kept.push_back(traj.samples()[i]);
  return Trajectory(traj.id(), traj.label(), std::move(kept));
}

SplitIndices stratified_split(const std::vector<RoadUserClass>& labels, double test_fraction,
                              double validation_fraction_of_train, std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0 || validation_fraction_of_train <= 0.0 ||
      validation_fraction_of_train >= 1.0)
    fail("split: fractions must lie in (0, 1)");

  SplitIndices out;
  for (int c = 0; c < kClassCount; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (static_cast<int>(labels[i]) == c) members.push_back(i);
    }
    if (members.empty())
      fail(std::string("split: class '") + to_string(kAllClasses[c]) + "' has no sequences");

    SplitMix64 rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
    shuffle(members, rng);

    const std::size_t n = members.size();
    std::size_t n_test = std::min(n, round_half_up(static_cast<double>(n) * test_fraction));
    const std::size_t remaining = n - n_test;
    std::size_t n_val = std::min(
        remaining, round_half_up(static_cast<double>(remaining) * validation_fraction_of_train));

    std::size_t i = 0;
    for (; i < n_test; ++i) out.test.push_back(members[i]);
    for (; i < n_test + n_val; ++i) out.validation.push_back(members[i]);
    for (; i < n; ++i) out.train.push_back(members[i]);
  }
  return out;
}

LabeledDataset build_variant(const TrajectoryCollection& collection,
                             const DatasetVariantSpec& spec, std::uint64_t seed,
                             double test_fraction, double validation_fraction_of_train) {
  validate(spec);

  std::vector<Trajectory> windows;
  for (const Trajectory& traj : collection.trajectories()) {
    if (spec.sampling_stride == 2) {
      for (auto& w : window_trajectory(downsample_alternate(traj), spec.window_len))
        windows.push_back(std::move(w));
    } else {
      for (auto& w : window_trajectory(traj, spec.window_len)) windows.push_back(std::move(w));
    }
  }
  if (windows.empty()) fail("dataset: no windows of length " + std::to_string(spec.window_len));

  std::vector<RoadUserClass> labels;
  labels.reserve(windows.size());
  for (const Trajectory& w : windows) labels.push_back(w.label());
  const SplitIndices split =
      stratified_split(labels, test_fraction, validation_fraction_of_train, seed);
  if (split.train.empty()) fail("dataset: empty train partition");

  std::vector<FeatureSequence> features;
  features.reserve(windows.size());
  for (const Trajectory& w : windows) features.push_back(compute_features(w));

  LabeledDataset dataset;
  dataset.spec = spec;
  dataset.split_seed = seed;
  for (std::size_t i : split.train) dataset.train.push_back(features[i]);
  for (std::size_t i : split.validation) dataset.validation.push_back(features[i]);
  for (std::size_t i : split.test) dataset.test.push_back(features[i]);

  dataset.standardizer = fit_standardizer(dataset.train);
  for (auto* part : {&dataset.train, &dataset.validation, &dataset.test}) {
    for (FeatureSequence& seq : *part) seq = apply_standardizer(dataset.standardizer, seq);
  }
  return dataset;
}

void write_dataset_archive(const LabeledDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  detail::write_file(dir / "train.csv", partition_csv(dataset.train));
  detail::write_file(dir / "validation.csv", partition_csv(dataset.validation));
  detail::write_file(dir / "test.csv", partition_csv(dataset.test));

  nlohmann::json standardizer;
  for (int f = 0; f < kFeatureCount; ++f) {
    standardizer["mean"].push_back(dataset.standardizer.mean[f]);
    standardizer["stddev"].push_back(dataset.standardizer.stddev[f]);
  }
  detail::write_file(dir / "standardizer.json", standardizer.dump(2) + "\n");

  nlohmann::json meta;
  meta["sampling_stride"] = dataset.spec.sampling_stride;
  meta["window_len"] = dataset.spec.window_len;
  meta["split_seed"] = dataset.split_seed;
  meta["counts"] = {{"train", dataset.train.size()},
                    {"validation", dataset.validation.size()},
                    {"test", dataset.test.size()}};
  meta["class_counts"] = {{"train", class_count_json(dataset.train)},
                          {"validation", class_count_json(dataset.validation)},
                          {"test", class_count_json(dataset.test)}};
  detail::write_file(dir / "meta.json", meta.dump(2) + "\n");
}

LabeledDataset load_dataset_archive(const std::filesystem::path& dir) {
  LabeledDataset dataset;

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_file(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    fail("dataset: invalid meta.json: " + std::string(e.what()));
  }
  dataset.spec.sampling_stride = meta.at("sampling_stride").get<int>();
  dataset.spec.window_len = meta.at("window_len").get<int>();
  dataset.split_seed = meta.at("split_seed").get<std::uint64_t>();
  validate(dataset.spec);

  nlohmann::json standardizer;
  try {
    standardizer = nlohmann::json::parse(detail::read_file(dir / "standardizer.json"));
  } catch (const nlohmann::json::exception& e) {
    fail("dataset: invalid standardizer.json: " + std::string(e.what()));
  }
  for (int f = 0; f < kFeatureCount; ++f) {
    dataset.standardizer.mean[f] = standardizer.at("mean").at(f).get<double>();
    dataset.standardizer.stddev[f] = standardizer.at("stddev").at(f).get<double>();
  }

  dataset.train = parse_partition_csv(detail::read_file(dir / "train.csv"), "train.csv",
                                      dataset.spec.window_len);
  dataset.validation = parse_partition_csv(detail::read_file(dir / "validation.csv"),
                                           "validation.csv", dataset.spec.window_len);
  dataset.test = parse_partition_csv(detail::read_file(dir / "test.csv"), "test.csv",
                                     dataset.spec.window_len);
  return dataset;
}

}  // namespace ruc
