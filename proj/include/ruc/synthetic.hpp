#ifndef RUC_SYNTHETIC_HPP
#define RUC_SYNTHETIC_HPP

#include <array>
#include <cstdint>

#include "ruc/trajectory.hpp"

namespace ruc {

// Kinematic envelope for one road user class. The defaults are test
// fixtures chosen so the four classes are separable by dynamics: the
// non-motorized classes by speed, the motorized ones by acceleration and
// turn behaviour rather than speed.
struct SyntheticProfile {
  double speed_min_mps = 0.0;
  double speed_max_mps = 1.0;
  double accel_min_mps2 = 0.1;   // magnitude used when adjusting towards a target speed
  double accel_max_mps2 = 1.0;
  double turn_rate_min_rps = 0.0;
  double turn_rate_max_rps = 0.5;
  double stop_probability = 0.0;  // per step, chance the next target speed is 0
  double position_noise_m = 0.0;  // bounded radial jitter applied to each fix
};

void validate(const SyntheticProfile& profile);

std::array<SyntheticProfile, kClassCount> default_synthetic_profiles();

// Deterministic random-walk trajectories: piecewise target speeds from the
// class speed range, acceleration clamped to the class range, heading
// evolved by bounded turn rates, positions integrated on the sphere and
// perturbed by bounded positional noise. Each trajectory derives its own
// generator from (seed, class, index), so output is byte-identical for a
// given seed regardless of generation order.
TrajectoryCollection generate_synthetic_collection(
    const std::array<SyntheticProfile, kClassCount>& profiles, int count_per_class,
    double duration_s, double sample_interval_s, std::uint64_t seed);

}  // namespace ruc

#endif  // RUC_SYNTHETIC_HPP
