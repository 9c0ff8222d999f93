#include "ruc/trajectory.hpp"

#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "text_util.hpp"

namespace ruc {

namespace {

constexpr std::string_view kCsvHeader = "timestamp_ms,lat,lon,accuracy_m";

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

const char* to_string(RoadUserClass c) {
  switch (c) {
    case RoadUserClass::pedestrian: return "pedestrian";
    case RoadUserClass::cyclist: return "cyclist";
    case RoadUserClass::motorcyclist: return "motorcyclist";
    case RoadUserClass::passenger_car: return "passenger_car";
  }
  return "?";
}

std::optional<RoadUserClass> parse_road_user_class(std::string_view name) {
  for (RoadUserClass c : kAllClasses) {
    if (name == to_string(c)) return c;
  }
  return std::nullopt;
}

std::string valid_class_names() {
  std::string out;
  for (RoadUserClass c : kAllClasses) {
    if (!out.empty()) out += ", ";
    out += to_string(c);
  }
  return out;
}

Trajectory::Trajectory(std::string id, RoadUserClass label, std::vector<RawSample> samples)
    : id_(std::move(id)), label_(label), samples_(std::move(samples)) {
  if (samples_.empty()) fail("trajectory '" + id_ + "': no samples");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const RawSample& s = samples_[i];
    if (s.point.lat < -90.0 || s.point.lat > 90.0)
      fail("trajectory '" + id_ + "': latitude " + detail::format_double(s.point.lat) +
           " out of range at sample " + std::to_string(i + 1));
    if (s.point.lon < -180.0 || s.point.lon > 180.0)
      fail("trajectory '" + id_ + "': longitude " + detail::format_double(s.point.lon) +
           " out of range at sample " + std::to_string(i + 1));
    if (s.accuracy_m < 0.0)
      fail("trajectory '" + id_ + "': negative accuracy at sample " + std::to_string(i + 1));
    if (i > 0 && s.timestamp_ms < samples_[i - 1].timestamp_ms)
      fail("trajectory '" + id_ + "': timestamps decrease at sample " + std::to_string(i + 1));
  }
}

double Trajectory::duration_s() const {
  return static_cast<double>(samples_.back().timestamp_ms - samples_.front().timestamp_ms) /
         1000.0;
}

TrajectoryCollection::TrajectoryCollection(std::vector<Trajectory> trajectories,
                                           std::string provenance)
    : trajectories_(std::move(trajectories)), provenance_(std::move(provenance)) {
  std::set<std::string_view> seen;
  for (const Trajectory& t : trajectories_) {
    if (!seen.insert(t.id()).second) fail("duplicate trajectory id '" + t.id() + "'");
  }
}

Trajectory parse_trajectory_file(std::string_view content, std::string id, RoadUserClass label,
                                 std::optional<double> max_accuracy_m) {
  const std::string where = "trajectory '" + id + "'";

  std::size_t pos = content.find('\n');
  std::string_view header = detail::strip_cr(pos == std::string_view::npos
                                                 ? content
                                                 : content.substr(0, pos));
  if (header != kCsvHeader)
    fail(where + ": malformed header (expected '" + std::string(kCsvHeader) + "')");

  std::vector<RawSample> samples;
  std::int64_t prev_ts = 0;
  int row = 0;
  std::size_t line_start = (pos == std::string_view::npos) ? content.size() : pos + 1;
  while (line_start < content.size()) {
    std::size_t line_end = content.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = content.size();
    std::string_view line = detail::strip_cr(content.substr(line_start, line_end - line_start));
    line_start = line_end + 1;
    if (line.empty()) continue;
    ++row;
    const std::string at = where + " row " + std::to_string(row);

    auto fields = detail::split(line, ',');
    if (fields.size() != 4) fail(at + ": expected 4 fields, got " + std::to_string(fields.size()));

    RawSample s;
    if (!detail::parse_int64(fields[0], s.timestamp_ms))
      fail(at + ": malformed timestamp '" + std::string(fields[0]) + "'");
    if (!detail::parse_double(fields[1], s.point.lat))
      fail(at + ": malformed latitude '" + std::string(fields[1]) + "'");
    if (!detail::parse_double(fields[2], s.point.lon))
      fail(at + ": malformed longitude '" + std::string(fields[2]) + "'");
    if (!detail::parse_double(fields[3], s.accuracy_m))
      fail(at + ": malformed accuracy '" + std::string(fields[3]) + "'");

    if (s.point.lat < -90.0 || s.point.lat > 90.0)
      fail(at + ": latitude " + std::string(fields[1]) + " out of range [-90, 90]");
    if (s.point.lon < -180.0 || s.point.lon > 180.0)
      fail(at + ": longitude " + std::string(fields[2]) + " out of range [-180, 180]");
    if (s.accuracy_m < 0.0) fail(at + ": accuracy must be non-negative");
    if (row > 1 && s.timestamp_ms < prev_ts)
      fail(at + ": timestamp " + std::string(fields[0]) + " decreases below " +
           std::to_string(prev_ts));
    prev_ts = s.timestamp_ms;
    samples.push_back(s);
  }

  if (max_accuracy_m) {
    std::erase_if(samples, [&](const RawSample& s) { return s.accuracy_m > *max_accuracy_m; });
    if (samples.empty())
      fail(where + ": no samples left after --max-accuracy " +
           detail::format_double(*max_accuracy_m) + " filter");
  }

  return Trajectory(std::move(id), label, std::move(samples));
}

std::string serialize_trajectory(const Trajectory& traj) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const RawSample& s : traj.samples()) {
    out += std::to_string(s.timestamp_ms);
    out += ',';
    out += detail::format_double(s.point.lat);
    out += ',';
    out += detail::format_double(s.point.lon);
    out += ',';
    out += detail::format_double(s.accuracy_m);
    out += '\n';
  }
  return out;
}

TrajectoryCollection load_collection(std::string_view manifest_json, const FileResolver& resolver,
                                     std::optional<double> max_accuracy_m) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_json);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("trajectories") ||
      !manifest["trajectories"].is_array())
    fail("manifest: missing 'trajectories' array");

  std::vector<Trajectory> trajectories;
  for (const auto& entry : manifest["trajectories"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("label") ||
        !entry.contains("path"))
      fail("manifest: each trajectory entry needs 'id', 'label' and 'path'");
    const std::string id = entry["id"].get<std::string>();
    const std::string label_name = entry["label"].get<std::string>();
    const std::string path = entry["path"].get<std::string>();

    auto label = parse_road_user_class(label_name);
    if (!label)
      fail("manifest: unknown class '" + label_name + "' for id '" + id + "' (valid: " +
           valid_class_names() + ")");

    std::string content;
    try {
      content = resolver(path);
    } catch (const std::exception& e) {
      fail("manifest: cannot load '" + path + "': " + e.what());
    }
    trajectories.push_back(parse_trajectory_file(content, id, *label, max_accuracy_m));
  }

  std::string provenance =
      manifest.contains("provenance") ? manifest["provenance"].get<std::string>() : "";
  return TrajectoryCollection(std::move(trajectories), std::move(provenance));
}

TrajectoryCollection load_collection_file(const std::filesystem::path& manifest_path,
                                          std::optional<double> max_accuracy_m) {
  const std::string manifest = detail::read_file(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  FileResolver resolver = [&base](const std::string& rel) {
    return detail::read_file(base / rel);
  };
  return load_collection(manifest, resolver, max_accuracy_m);
}

void write_collection(const TrajectoryCollection& collection, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["provenance"] = collection.provenance();
  manifest["trajectories"] = nlohmann::json::array();

  int index = 0;
  for (const Trajectory& t : collection.trajectories()) {
    std::string safe;
    for (char c : t.id()) {
      safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    }
    const std::string filename = "t" + std::to_string(index++) + "_" + safe + ".csv";
    detail::write_file(dir / filename, serialize_trajectory(t));
    manifest["trajectories"].push_back(
        {{"id", t.id()}, {"label", to_string(t.label())}, {"path", filename}});
  }
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

CollectionSummary summarize(const TrajectoryCollection& collection) {
  if (collection.trajectories().empty()) fail("summarize: empty collection");

  CollectionSummary summary;
  for (const Trajectory& t : collection.trajectories()) {
    const int cls = static_cast<int>(t.label());
    summary.trajectory_counts[cls] += 1;
    summary.duration_h[cls] += t.duration_s() / 3600.0;
  }
  for (double h : summary.duration_h) summary.total_duration_h += h;
  if (summary.total_duration_h <= 0.0)
    fail("summarize: collection has zero total duration");
  for (int c = 0; c < kClassCount; ++c)
    summary.duration_share[c] = summary.duration_h[c] / summary.total_duration_h;
  return summary;
}

}  // namespace ruc
