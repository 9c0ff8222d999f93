#ifndef RUC_FEATURES_HPP
#define RUC_FEATURES_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ruc/trajectory.hpp"

namespace ruc {

inline constexpr int kFeatureCount = 5;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "dt", "velocity", "accel_pos", "accel_neg", "bearing_rate"};

// Per-timestep kinematic features derived from consecutive fixes.
// In raw (unstandardized) units: velocity, accel_pos, accel_neg and
// bearing_rate are all non-negative, and at most one of accel_pos/accel_neg
// is nonzero at any timestep.
struct FeatureVector {
  double dt = 0.0;            // seconds since previous fix
  double velocity = 0.0;      // m/s over the interval
  double accel_pos = 0.0;     // m/s^2, increase in interval velocity
  double accel_neg = 0.0;     // m/s^2, decrease in interval velocity
  double bearing_rate = 0.0;  // rad/s, absolute heading change rate

  std::array<double, kFeatureCount> values() const {
    return {dt, velocity, accel_pos, accel_neg, bearing_rate};
  }
  static FeatureVector from_values(const std::array<double, kFeatureCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }
};

struct FeatureSequence {
  std::string id;
  RoadUserClass label = RoadUserClass::pedestrian;
  std::vector<FeatureVector> steps;
};

// Derives the feature sequence for a trajectory (same length as the sample
// list). Non-computable values are filled:
//   - dt[1] = 0 and velocity[1] is backward-filled from velocity[2];
//   - accel_pos/accel_neg/bearing_rate are 0 for the first two timesteps;
//   - velocity is forward-filled over dt = 0 intervals, bearing is
//     forward-filled over dt = 0 or zero-distance intervals, and dependent
//     features are computed from the filled values;
//   - a leading run of non-computable values takes the first computable one.
// Throws if the trajectory has fewer than 2 samples or no computable
// velocity at all.
FeatureSequence compute_features(const Trajectory& traj);

// Per-feature z-score statistics pooled over every timestep of the fit
// corpus. Population (1/N) standard deviation.
struct Standardizer {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};
};

// Throws if the pooled timestep count is < 2 or any feature is constant
// across the corpus.
Standardizer fit_standardizer(std::span<const FeatureSequence> train);

FeatureSequence apply_standardizer(const Standardizer& s, const FeatureSequence& seq);

// Audit dump: header `dt,velocity,accel_pos,accel_neg,bearing_rate`.
std::string feature_sequence_to_csv(const FeatureSequence& seq);

}  // namespace ruc

#endif  // RUC_FEATURES_HPP
