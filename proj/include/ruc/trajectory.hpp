#ifndef RUC_TRAJECTORY_HPP
#define RUC_TRAJECTORY_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruc/geodesy.hpp"

namespace ruc {

// One GNSS fix: epoch timestamp, position, estimated accuracy.
struct RawSample {
  std::int64_t timestamp_ms = 0;
  GeoPoint point;
  double accuracy_m = 0.0;
};

// Closed set of road user types; the enum value is the one-hot index.
enum class RoadUserClass : int {
  pedestrian = 0,
  cyclist = 1,
  motorcyclist = 2,
  passenger_car = 3,
};

inline constexpr int kClassCount = 4;

inline constexpr std::array<RoadUserClass, kClassCount> kAllClasses = {
    RoadUserClass::pedestrian, RoadUserClass::cyclist,
    RoadUserClass::motorcyclist, RoadUserClass::passenger_car};

const char* to_string(RoadUserClass c);
std::optional<RoadUserClass> parse_road_user_class(std::string_view name);
std::string valid_class_names();  // comma-separated, for error messages

// Ordered, validated sequence of samples from one road user.
// Invariants enforced at construction: non-empty, timestamps non-decreasing
// (equal consecutive timestamps are legal; duplicate fixes occur in practice),
// all coordinates and accuracies in range.
class Trajectory {
 public:
  Trajectory(std::string id, RoadUserClass label, std::vector<RawSample> samples);

  const std::string& id() const { return id_; }
  RoadUserClass label() const { return label_; }
  const std::vector<RawSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }

  // Wall-clock span between first and last sample.
  double duration_s() const;

 private:
  std::string id_;
  RoadUserClass label_;
  std::vector<RawSample> samples_;
};

// Immutable set of labeled trajectories with unique ids.
class TrajectoryCollection {
 public:
  TrajectoryCollection(std::vector<Trajectory> trajectories, std::string provenance);

  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const std::string& provenance() const { return provenance_; }

 private:
  std::vector<Trajectory> trajectories_;
  std::string provenance_;
};

// Trajectory CSV: header `timestamp_ms,lat,lon,accuracy_m`, one sample per
// row, '.' decimal point, UTF-8. Row numbers in errors count data rows
// starting at 1 (header excluded).
//
// max_accuracy_m, when set, drops samples whose accuracy exceeds the
// threshold after all rows have been validated.
Trajectory parse_trajectory_file(std::string_view content, std::string id, RoadUserClass label,
                                 std::optional<double> max_accuracy_m = std::nullopt);

std::string serialize_trajectory(const Trajectory& traj);

// Maps a manifest-relative path to the file's content.
using FileResolver = std::function<std::string(const std::string& path)>;

// Manifest JSON:
//   { "trajectories": [ { "id": ..., "label": ..., "path": ... }, ... ],
//     "provenance": ... }
TrajectoryCollection load_collection(std::string_view manifest_json, const FileResolver& resolver,
                                     std::optional<double> max_accuracy_m = std::nullopt);

// Resolves trajectory paths relative to the manifest's directory.
TrajectoryCollection load_collection_file(const std::filesystem::path& manifest_path,
                                          std::optional<double> max_accuracy_m = std::nullopt);

// Writes manifest.json plus one CSV per trajectory into `dir`.
void write_collection(const TrajectoryCollection& collection, const std::filesystem::path& dir);

struct CollectionSummary {
  std::array<int, kClassCount> trajectory_counts{};
  std::array<double, kClassCount> duration_h{};
  double total_duration_h = 0.0;
  std::array<double, kClassCount> duration_share{};  // sums to 1
};

CollectionSummary summarize(const TrajectoryCollection& collection);

}  // namespace ruc

#endif  // RUC_TRAJECTORY_HPP
