#ifndef RUC_DATASET_HPP
#define RUC_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ruc/features.hpp"
#include "ruc/trajectory.hpp"

namespace ruc {

// One of the six preprocessing variants: nominal sampling stride (1 keeps
// every fix, 2 keeps alternate fixes) and fixed window length in timesteps.
struct DatasetVariantSpec {
  int sampling_stride = 1;  // 1 or 2
  int window_len = 60;      // > 2
};

void validate(const DatasetVariantSpec& spec);

// "stride<k>_win<n>", the archive directory name for a variant.
std::string variant_dir_name(const DatasetVariantSpec& spec);

// Non-overlapping consecutive windows anchored at index 0, each of exactly
// window_len samples; the trailing remainder is discarded. A trajectory
// shorter than window_len yields an empty list.
std::vector<Trajectory> window_trajectory(const Trajectory& traj, int window_len);

// Keeps the samples at even 0-based indices; timestamps are preserved so
// time deltas are recomputed from real clock values downstream.
Trajectory downsample_alternate(const Trajectory& traj);

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

// Seeded stratified three-way split over item labels. Per class the items
// are shuffled, then round-half-up shares go to test and validation and the
// remainder to train, so partitions are disjoint, exhaustive, and per-class
// counts deviate from the exact fractional share by less than one.
// Throws if any class has zero items.
SplitIndices stratified_split(const std::vector<RoadUserClass>& labels, double test_fraction,
                              double validation_fraction_of_train, std::uint64_t seed);

struct LabeledDataset {
  std::vector<FeatureSequence> train, validation, test;  // standardized units
  DatasetVariantSpec spec;
  Standardizer standardizer;  // fitted on the train partition only
  std::uint64_t split_seed = 0;
};

// Full preprocessing pipeline for one variant: downsample (stride 2 only),
// window, split at the window level, compute features, then fit the
// standardizer on the train partition and apply it to all three.
LabeledDataset build_variant(const TrajectoryCollection& collection,
                             const DatasetVariantSpec& spec, std::uint64_t seed,
                             double test_fraction = 0.25,
                             double validation_fraction_of_train = 0.20);

// Archive layout inside `dir`: train.csv / validation.csv / test.csv with
// rows `sequence_id,step_index,dt,velocity,accel_pos,accel_neg,bearing_rate,
// label`, plus standardizer.json and meta.json. Byte-deterministic.
void write_dataset_archive(const LabeledDataset& dataset, const std::filesystem::path& dir);

LabeledDataset load_dataset_archive(const std::filesystem::path& dir);

}  // namespace ruc

#endif  // RUC_DATASET_HPP
