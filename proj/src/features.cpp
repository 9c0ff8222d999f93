#include "ruc/features.hpp"

#include <cmath>
#include <stdexcept>

#include "text_util.hpp"

namespace ruc {

namespace {

// Forward-fills gaps from the last computable value; a leading gap takes the
// first computable value (mirrors the backward fill of velocity[1]).
// Returns false if nothing is computable.
bool fill_gaps(std::vector<double>& values, const std::vector<bool>& computable,
               std::size_t first_index) {
  std::size_t first_ok = 0;
  bool any = false;
  for (std::size_t i = first_index; i < values.size(); ++i) {
    if (computable[i]) {
      first_ok = i;
      any = true;
      break;
    }
  }
  if (!any) return false;
  for (std::size_t i = first_index; i < first_ok; ++i) values[i] = values[first_ok];
  double last = values[first_ok];
  for (std::size_t i = first_ok + 1; i < values.size(); ++i) {
    if (computable[i])
      last = values[i];
    else
      values[i] = last;
  }
  return true;
}

}  // namespace

FeatureSequence compute_features(const Trajectory& traj) {
  const auto& samples = traj.samples();
  const std::size_t n = samples.size();
  if (n < 2)
    throw std::runtime_error("features: trajectory '" + traj.id() +
                             "' needs at least 2 samples");

  std::vector<double> dt(n, 0.0), vel(n, 0.0), bearing(n, 0.0);
  std::vector<bool> vel_ok(n, false), bearing_ok(n, false);

  for (std::size_t i = 1; i < n; ++i) {
    dt[i] = static_cast<double>(samples[i].timestamp_ms - samples[i - 1].timestamp_ms) / 1000.0;
    const double dist = haversine_distance(samples[i - 1].point, samples[i].point);
    if (dt[i] > 0.0) {
      vel[i] = dist / dt[i];
      vel_ok[i] = true;
    }
    // A duplicate fix has no heading; treat its bearing as non-computable so
    // the forward fill keeps the last real heading.
    if (dt[i] > 0.0 && dist > 0.0) {
      bearing[i] = initial_bearing(samples[i - 1].point, samples[i].point);
      bearing_ok[i] = true;
    }
  }

  if (!fill_gaps(vel, vel_ok, 1))
    throw std::runtime_error("features: trajectory '" + traj.id() +
                             "' has no computable velocity (all dt = 0)");
  vel[0] = vel[1];

  // A trajectory that never moves has no heading anywhere; zero bearings give
  // zero bearing rates, which is the right answer for it.
  fill_gaps(bearing, bearing_ok, 1);

  FeatureSequence seq;
  seq.id = traj.id();
  seq.label = traj.label();
  seq.steps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector& f = seq.steps[i];
    f.dt = dt[i];
    f.velocity = vel[i];
    if (i >= 2) {
      const double avg_dt = (dt[i] + dt[i - 1]) / 2.0;
      if (avg_dt > 0.0) {
        const double dv = (vel[i] - vel[i - 1]) / avg_dt;
        f.accel_pos = std::max(dv, 0.0);
        f.accel_neg = -std::min(dv, 0.0);
        const double raw = std::fabs(bearing[i] - bearing[i - 1]);
        f.bearing_rate = (kPi - std::fabs(raw - kPi)) / avg_dt;
      }
    }
  }
  return seq;
}

Standardizer fit_standardizer(std::span<const FeatureSequence> train) {
  if (train.empty()) throw std::runtime_error("standardizer: no sequences to fit");

  // Welford's online moments; the tests cross-check against a plain two-pass
  // computation.
  std::array<double, kFeatureCount> mean{}, m2{};
  std::size_t count = 0;
  for (const FeatureSequence& seq : train) {
    for (const FeatureVector& step : seq.steps) {
      ++count;
      const auto v = step.values();
      for (int f = 0; f < kFeatureCount; ++f) {
        const double delta = v[f] - mean[f];
        mean[f] += delta / static_cast<double>(count);
        m2[f] += delta * (v[f] - mean[f]);
      }
    }
  }
  if (count < 2) throw std::runtime_error("standardizer: fewer than 2 pooled timesteps");

  Standardizer s;
  for (int f = 0; f < kFeatureCount; ++f) {
    s.mean[f] = mean[f];
    s.stddev[f] = std::sqrt(m2[f] / static_cast<double>(count));
    if (s.stddev[f] == 0.0)
      throw std::runtime_error(std::string("standardizer: feature '") + kFeatureNames[f] +
                               "' has zero standard deviation across the fit corpus");
  }
  return s;
}

FeatureSequence apply_standardizer(const Standardizer& s, const FeatureSequence& seq) {
  FeatureSequence out;
  out.id = seq.id;
  out.label = seq.label;
  out.steps.reserve(seq.steps.size());
  for (const FeatureVector& step : seq.steps) {
    auto v = step.values();
    for (int f = 0; f < kFeatureCount; ++f) v[f] = (v[f] - s.mean[f]) / s.stddev[f];
    out.steps.push_back(FeatureVector::from_values(v));
  }
  return out;
}

std::string feature_sequence_to_csv(const FeatureSequence& seq) {
  std::string out = "dt,velocity,accel_pos,accel_neg,bearing_rate\n";
  for (const FeatureVector& step : seq.steps) {
    const auto v = step.values();
    for (int f = 0; f < kFeatureCount; ++f) {
      if (f > 0) out += ',';
      out += detail::format_double(v[f]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace ruc
