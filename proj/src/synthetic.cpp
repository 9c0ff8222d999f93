#include "ruc/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ruc/rng.hpp"

namespace ruc {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Trajectory generate_one(const SyntheticProfile& profile, RoadUserClass label, int index,
                        std::size_t n_samples, double interval_s, std::uint64_t traj_seed) {
  SplitMix64 rng(traj_seed);

  GeoPoint pos{rng.next_double(49.5, 50.5), rng.next_double(10.0, 11.0)};
  double heading = rng.next_double(-kPi, kPi);
  double speed = rng.next_double(profile.speed_min_mps, profile.speed_max_mps);
  double target = speed;
  double turn_rate = 0.0;

  std::vector<RawSample> samples;
  samples.reserve(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    GeoPoint observed = pos;
    if (profile.position_noise_m > 0.0) {
      const double r = profile.position_noise_m * rng.next_double();
      const double theta = rng.next_double(-kPi, kPi);
      observed = destination_point(pos, theta, r);
    }
    RawSample s;
    s.timestamp_ms = std::llround(static_cast<double>(k) * interval_s * 1000.0);
    s.point = observed;
    s.accuracy_m = rng.next_double(3.0, 12.0);
    samples.push_back(s);

    // advance the true state to the next step
    if (rng.next_double() < 0.05) {
      target = (rng.next_double() < profile.stop_probability)
                   ? 0.0
                   : rng.next_double(profile.speed_min_mps, profile.speed_max_mps);
    }
    const double accel = rng.next_double(profile.accel_min_mps2, profile.accel_max_mps2);
    const double dv_cap = accel * interval_s;
    const double dv = std::clamp(target - speed, -dv_cap, dv_cap);
    speed = std::max(0.0, speed + dv);

    if (rng.next_double() < 0.2) {
      const bool straight = rng.next_double() < 0.35;
      const double magnitude =
          rng.next_double(profile.turn_rate_min_rps, profile.turn_rate_max_rps);
      const double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
      turn_rate = straight ? 0.0 : sign * magnitude;
    }
    heading = wrap_angle(heading + turn_rate * interval_s);
    pos = destination_point(pos, heading, speed * interval_s);
  }

  const std::string id = std::string(to_string(label)) + "_" + std::to_string(index);
  return Trajectory(id, label, std::move(samples));
}

}  // namespace

void validate(const SyntheticProfile& profile) {
  if (profile.speed_min_mps < 0.0 || profile.speed_max_mps <= profile.speed_min_mps)
    fail("synthetic: speed range is infeasible");
  if (profile.accel_min_mps2 < 0.0 || profile.accel_max_mps2 <= profile.accel_min_mps2)
    fail("synthetic: acceleration range is infeasible");
  if (profile.turn_rate_min_rps < 0.0 || profile.turn_rate_max_rps <= profile.turn_rate_min_rps)
    fail("synthetic: turn rate range is infeasible");
  if (profile.stop_probability < 0.0 || profile.stop_probability >= 1.0)
    fail("synthetic: stop probability must lie in [0, 1)");
  if (profile.position_noise_m < 0.0) fail("synthetic: noise magnitude must be non-negative");
}

std::array<SyntheticProfile, kClassCount> default_synthetic_profiles() {
  std::array<SyntheticProfile, kClassCount> profiles;
  // pedestrian: slow, agile, frequent small direction changes
  profiles[0] = {0.5, 2.0, 0.2, 1.0, 0.15, 1.2, 0.02, 1.5};
  // cyclist: moderate speed, gentle turns
  profiles[1] = {2.5, 8.0, 0.3, 1.2, 0.05, 0.5, 0.02, 1.5};
  // motorcyclist: fast and aggressive (hard acceleration, willing to corner)
  profiles[2] = {5.0, 35.0, 1.2, 4.0, 0.05, 0.45, 0.02, 1.5};
  // passenger car: same speed envelope as the motorcycle but gentle dynamics
  profiles[3] = {5.0, 35.0, 0.15, 1.2, 0.0, 0.12, 0.03, 1.5};
  return profiles;
}

TrajectoryCollection generate_synthetic_collection(
    const std::array<SyntheticProfile, kClassCount>& profiles, int count_per_class,
    double duration_s, double sample_interval_s, std::uint64_t seed) {
  for (const SyntheticProfile& p : profiles) validate(p);
  if (count_per_class < 1) fail("synthetic: count per class must be >= 1");
  if (sample_interval_s <= 0.0) fail("synthetic: sample interval must be positive");

  const std::size_t n_samples =
      static_cast<std::size_t>(std::floor(duration_s / sample_interval_s)) + 1;
  if (n_samples < 3) fail("synthetic: duration/interval must yield at least 3 samples");

  std::vector<Trajectory> trajectories;
  trajectories.reserve(static_cast<std::size_t>(count_per_class) * kClassCount);
  for (int c = 0; c < kClassCount; ++c) {
    for (int i = 0; i < count_per_class; ++i) {
      const std::uint64_t traj_seed =
          mix_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i));
      trajectories.push_back(generate_one(profiles[static_cast<std::size_t>(c)], kAllClasses[c],
                                          i, n_samples, sample_interval_s, traj_seed));
    }
  }

  std::string provenance = "synthetic kinematic walk; seed=" + std::to_string(seed) +
                           " per_class=" + std::to_string(count_per_class) +
                           " duration_s=" + std::to_string(duration_s) +
                           " interval_s=" + std::to_string(sample_interval_s);
  return TrajectoryCollection(std::move(trajectories), std::move(provenance));
}

}  // namespace ruc
