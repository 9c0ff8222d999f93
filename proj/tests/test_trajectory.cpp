#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>

#include "ruc/rng.hpp"
#include "ruc/trajectory.hpp"

using namespace ruc;

namespace {

Trajectory simple_trajectory(const std::string& id, RoadUserClass label, std::int64_t t0,
                             std::int64_t duration_ms) {
  std::vector<RawSample> samples;
  samples.push_back({t0, {50.0, 10.0}, 5.0});
  samples.push_back({t0 + duration_ms, {50.001, 10.0}, 5.0});
  return Trajectory(id, label, std::move(samples));
}

std::string checked_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("class names round trip") {
  for (RoadUserClass c : kAllClasses) CHECK(parse_road_user_class(to_string(c)) == c);
  CHECK(!parse_road_user_class("truck").has_value());
  CHECK(valid_class_names() == "pedestrian, cyclist, motorcyclist, passenger_car");
}

TEST_CASE("well-formed file parses in order") {
  const std::string csv =
      "timestamp_ms,lat,lon,accuracy_m\n"
      "1000,50.1,10.1,4.5\n"
      "2000,50.2,10.2,5\n"
      "3000,50.3,10.3,6.25\n";
  const Trajectory t = parse_trajectory_file(csv, "t1", RoadUserClass::cyclist);
  REQUIRE(t.size() == 3);
  CHECK(t.label() == RoadUserClass::cyclist);
  CHECK(t.samples()[0].timestamp_ms == 1000);
  CHECK(t.samples()[1].point.lat == 50.2);
  CHECK(t.samples()[2].accuracy_m == 6.25);
}

TEST_CASE("out-of-range latitude names the row") {
  const std::string csv =
      "timestamp_ms,lat,lon,accuracy_m\n"
      "1000,50.0,10.0,5\n"
      "2000,95.0,10.0,5\n";
  const std::string msg = checked_message(
      [&] { parse_trajectory_file(csv, "bad", RoadUserClass::pedestrian); });
  CHECK(msg.find("row 2") != std::string::npos);
  CHECK(msg.find("latitude") != std::string::npos);
}

TEST_CASE("non-monotone timestamps name the row") {
  const std::string csv =
      "timestamp_ms,lat,lon,accuracy_m\n"
      "1000,50.0,10.0,5\n"
      "3000,50.1,10.0,5\n"
      "2000,50.2,10.0,5\n";
  const std::string msg = checked_message(
      [&] { parse_trajectory_file(csv, "bad", RoadUserClass::pedestrian); });
  CHECK(msg.find("row 3") != std::string::npos);
}

TEST_CASE("equal consecutive timestamps are accepted") {
  const std::string csv =
      "timestamp_ms,lat,lon,accuracy_m\n"
      "1000,50.0,10.0,5\n"
      "1000,50.0,10.0,5\n"
      "2000,50.1,10.0,5\n";
  CHECK(parse_trajectory_file(csv, "dup", RoadUserClass::pedestrian).size() == 3);
}

TEST_CASE("malformed header is rejected") {
  const std::string msg = checked_message([&] {
    parse_trajectory_file("time,lat,lon,acc\n1,2,3,4\n", "h", RoadUserClass::pedestrian);
  });
  CHECK(msg.find("header") != std::string::npos);
}

TEST_CASE("accuracy filter drops rows only when asked") {
  const std::string csv =
      "timestamp_ms,lat,lon,accuracy_m\n"
      "1000,50.0,10.0,5\n"
      "2000,50.1,10.0,80\n"
      "3000,50.2,10.0,5\n";
  CHECK(parse_trajectory_file(csv, "t", RoadUserClass::cyclist).size() == 3);
  CHECK(parse_trajectory_file(csv, "t", RoadUserClass::cyclist, 30.0).size() == 2);
}

TEST_CASE("serialize then parse is identity on serialized form") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RawSample> samples;
    std::int64_t ts = static_cast<std::int64_t>(rng.next_below(100000));
    const int n = 2 + static_cast<int>(rng.next_below(40));
    for (int i = 0; i < n; ++i) {
      samples.push_back({ts,
                         {rng.next_double(-90.0, 90.0), rng.next_double(-180.0, 180.0)},
                         rng.next_double(0.0, 30.0)});
      ts += static_cast<std::int64_t>(rng.next_below(3000));
    }
    const Trajectory t("rt", RoadUserClass::motorcyclist, std::move(samples));
    const std::string first = serialize_trajectory(t);
    const Trajectory reparsed = parse_trajectory_file(first, "rt", t.label());
    CHECK(serialize_trajectory(reparsed) == first);
  }
}

TEST_CASE("trajectory invariants hold under random construction attempts") {
  SplitMix64 rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RawSample> samples;
    const int n = 1 + static_cast<int>(rng.next_below(20));
    std::int64_t ts = 0;
    bool expect_ok = true;
    for (int i = 0; i < n; ++i) {
      RawSample s;
      // occasionally inject an invariant violation
      const bool broken = rng.next_double() < 0.1;
      s.timestamp_ms = ts;
      s.point.lat = broken && rng.next_double() < 0.5 ? 91.0 : rng.next_double(-90.0, 90.0);
      s.point.lon = rng.next_double(-180.0, 180.0);
      s.accuracy_m = broken && s.point.lat <= 90.0 ? -1.0 : rng.next_double(0.0, 20.0);
      if (broken) expect_ok = false;
      samples.push_back(s);
      ts += static_cast<std::int64_t>(rng.next_below(2000));
    }
    try {
      const Trajectory t("p", RoadUserClass::pedestrian, samples);
      CHECK(expect_ok);
      CHECK(t.size() == samples.size());
      for (std::size_t i = 1; i < t.size(); ++i)
        CHECK(t.samples()[i].timestamp_ms >= t.samples()[i - 1].timestamp_ms);
    } catch (const std::exception&) {
      CHECK(!expect_ok);
    }
  }
}

TEST_CASE("manifest loading with labels, duplicates and unknown classes") {
  std::map<std::string, std::string> files;
  files["a.csv"] = "timestamp_ms,lat,lon,accuracy_m\n0,50,10,5\n60000,50.01,10,5\n";
  files["b.csv"] = files["a.csv"];
  FileResolver resolver = [&files](const std::string& path) {
    auto it = files.find(path);
    if (it == files.end()) throw std::runtime_error("no such file");
    return it->second;
  };

  SUBCASE("one entry per class") {
    const std::string manifest = R"({
      "provenance": "unit fixture",
      "trajectories": [
        {"id": "p", "label": "pedestrian", "path": "a.csv"},
        {"id": "c", "label": "cyclist", "path": "a.csv"},
        {"id": "m", "label": "motorcyclist", "path": "b.csv"},
        {"id": "k", "label": "passenger_car", "path": "b.csv"}
      ]})";
    const TrajectoryCollection col = load_collection(manifest, resolver);
    REQUIRE(col.trajectories().size() == 4);
    CHECK(col.trajectories()[3].label() == RoadUserClass::passenger_car);
    CHECK(col.provenance() == "unit fixture");
  }

  SUBCASE("unknown label lists the valid classes") {
    const std::string manifest =
        R"({"trajectories": [{"id": "t", "label": "truck", "path": "a.csv"}]})";
    const std::string msg = checked_message([&] { load_collection(manifest, resolver); });
    CHECK(msg.find("unknown class 'truck'") != std::string::npos);
    CHECK(msg.find("pedestrian") != std::string::npos);
  }

  SUBCASE("duplicate ids are rejected") {
    const std::string manifest = R"({"trajectories": [
      {"id": "t1", "label": "cyclist", "path": "a.csv"},
      {"id": "t1", "label": "cyclist", "path": "b.csv"}]})";
    const std::string msg = checked_message([&] { load_collection(manifest, resolver); });
    CHECK(msg.find("duplicate") != std::string::npos);
  }

  SUBCASE("missing file names the path") {
    const std::string manifest =
        R"({"trajectories": [{"id": "t", "label": "cyclist", "path": "gone.csv"}]})";
    const std::string msg = checked_message([&] { load_collection(manifest, resolver); });
    CHECK(msg.find("gone.csv") != std::string::npos);
  }
}

TEST_CASE("summary durations and shares") {
  SUBCASE("single trajectory owns the whole share") {
    std::vector<Trajectory> ts;
    ts.push_back(simple_trajectory("solo", RoadUserClass::cyclist, 0, 3600 * 1000));
    const CollectionSummary s = summarize(TrajectoryCollection(std::move(ts), ""));
    CHECK(s.total_duration_h == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.duration_share[static_cast<int>(RoadUserClass::cyclist)] == doctest::Approx(1.0));
  }

  SUBCASE("two equal trajectories split evenly") {
    std::vector<Trajectory> ts;
    ts.push_back(simple_trajectory("a", RoadUserClass::cyclist, 0, 1800 * 1000));
    ts.push_back(simple_trajectory("b", RoadUserClass::pedestrian, 0, 1800 * 1000));
    const CollectionSummary s = summarize(TrajectoryCollection(std::move(ts), ""));
    CHECK(s.duration_share[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.duration_share[1] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("shares mirror the per-class durations") {
    // 20.6 / 24.5 / 20.3 / 34.6 hours -> shares sum to exactly 100 h
    std::vector<Trajectory> ts;
    const double hours[kClassCount] = {20.6, 24.5, 20.3, 34.6};
    for (int c = 0; c < kClassCount; ++c) {
      ts.push_back(simple_trajectory("t" + std::to_string(c), kAllClasses[c], 0,
                                     static_cast<std::int64_t>(hours[c] * 3600.0 * 1000.0)));
    }
    const CollectionSummary s = summarize(TrajectoryCollection(std::move(ts), ""));
    CHECK(std::fabs(s.duration_share[0] - 0.206) < 0.0005);
    CHECK(std::fabs(s.duration_share[1] - 0.245) < 0.0005);
    CHECK(std::fabs(s.duration_share[2] - 0.203) < 0.0005);
    CHECK(std::fabs(s.duration_share[3] - 0.346) < 0.0005);
    double total = 0.0;
    for (double share : s.duration_share) total += share;
    CHECK(std::fabs(total - 1.0) < 1e-9);
  }

  SUBCASE("empty collection is rejected") {
    CHECK_THROWS(summarize(TrajectoryCollection({}, "")));
  }
}
