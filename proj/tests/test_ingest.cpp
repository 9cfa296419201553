#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>

#include <fmt/format.h>

#include "tracklab/error.hpp"
#include "tracklab/ingest.hpp"

using namespace tracklab;
using namespace tracklab::ingest;

namespace {

const char* kOpenSky = R"(format_name: opensky_v1
delimiter: ","
columns:
  timestamp:  {source: "time",        type: epoch_seconds}
  latitude:   {source: "lat",         type: degrees}
  longitude:  {source: "lon",         type: degrees}
  altitude:   {source: "geoaltitude", type: meters}
  track_id:   {source: "icao24",      type: string}
extra_columns: ["velocity", "heading"]
)";

const char* kSimple = R"(format_name: simple
columns:
  timestamp: {source: t, type: epoch_seconds}
  latitude: {source: lat, type: degrees}
  longitude: {source: lon, type: degrees}
  altitude: {source: alt, type: meters}
  track_id: {source: id, type: string}
)";

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

geo::Track line_track(const std::string& id, std::vector<std::pair<double, double>> lat_alt) {
  geo::Track t;
  t.track_id = id;
  double time = 1000;
  for (auto [lat, alt] : lat_alt) {
    geo::TrackPoint p;
    p.geo = {lat, 0.0, alt};
    p.timestamp_s = time;
    time += 5;
    p.track_id = id;
    t.points.push_back(p);
  }
  return t;
}

}  // namespace

TEST_CASE("opensky descriptor parses every role and the extras") {
  const auto d = parse_format_descriptor(kOpenSky);
  CHECK(d.format_name == "opensky_v1");
  CHECK(d.delimiter == ',');
  CHECK(d.timestamp_column == "time");
  CHECK(d.latitude_column == "lat");
  CHECK(d.longitude_column == "lon");
  CHECK(d.altitude_column == "geoaltitude");
  CHECK(d.track_id_column == "icao24");
  CHECK(d.time_unit == TimeUnit::epoch_seconds);
  CHECK(d.altitude_unit == AltitudeUnit::meters);
  CHECK(d.extra_columns == std::vector<std::string>{"velocity", "heading"});

  const auto again = parse_format_descriptor(to_yaml(d));
  CHECK(again.format_name == d.format_name);
  CHECK(again.altitude_column == d.altitude_column);
  CHECK(again.extra_columns == d.extra_columns);
}

TEST_CASE("descriptor errors name the offending role") {
  std::string no_alt = kOpenSky;
  const auto pos = no_alt.find("  altitude:");
  no_alt.erase(pos, no_alt.find('\n', pos) - pos + 1);
  CHECK(code_of([&] { parse_format_descriptor(no_alt); }) == ErrorCode::validation);
  CHECK(message_of([&] { parse_format_descriptor(no_alt); }).find("altitude") != std::string::npos);

  std::string dup = kOpenSky;
  dup.replace(dup.find("\"lon\""), 5, "\"lat\"");
  CHECK(code_of([&] { parse_format_descriptor(dup); }) == ErrorCode::validation);
  CHECK(message_of([&] { parse_format_descriptor(dup); }).find("lat") != std::string::npos);

  CHECK(code_of([&] { parse_format_descriptor("a: [unclosed"); }) == ErrorCode::validation);
}

TEST_CASE("feet descriptor scales altitude") {
  std::string feet = kSimple;
  feet.replace(feet.find("{source: alt, type: meters}"), 27, "{source: alt, type: feet}");
  const auto d = parse_format_descriptor(feet);
  CHECK(d.altitude_unit == AltitudeUnit::feet);
  const auto r = parse_track_file("t,lat,lon,alt,id\n0,1,2,1000,a\n1,1,2,1000,a\n", d);
  REQUIRE(r.tracks.size() == 1);
  CHECK(r.tracks[0].points[0].geo.altitude_m == doctest::Approx(304.8));
}

TEST_CASE("rows group by track id and keep time order") {
  const auto d = parse_format_descriptor(kSimple);
  const std::string csv =
      "t,lat,lon,alt,id\n"
      "3,1.0,2.0,30,b\n"
      "1,1.0,2.0,10,a\n"
      "2,1.0,2.0,20,a\n"
      "1,1.0,2.0,10,b\n"
      "3,1.0,2.0,30,a\n"
      "2,1.0,2.0,20,b\n";
  const auto r = parse_track_file(csv, d);
  CHECK(r.total_rows == 6);
  CHECK(r.rejected.empty());
  REQUIRE(r.tracks.size() == 2);
  CHECK(r.tracks[0].track_id == "a");
  CHECK(r.tracks[1].track_id == "b");
  for (const auto& t : r.tracks) {
    REQUIRE(t.points.size() == 3);
    CHECK_NOTHROW(t.check_invariants());
    CHECK(t.points[0].timestamp_s == 1.0);
    CHECK(t.points[2].geo.altitude_m == 30.0);
  }
}

TEST_CASE("iso timestamps normalize to epoch seconds") {
  CHECK(parse_iso8601("1970-01-01T00:00:00Z") == 0.0);
  CHECK(parse_iso8601("2000-03-01T12:30:15Z") == 951913815.0);
  CHECK(parse_iso8601(format_iso8601(1700000000.25)) == doctest::Approx(1700000000.25));
  std::string iso = kSimple;
  iso.replace(iso.find("type: epoch_seconds"), 19, "type: iso8601");
  const auto r = parse_track_file("t,lat,lon,alt,id\n2000-03-01T12:30:15Z,1,2,3,a\n2000-03-01T12:30:17Z,1,2,3,a\n",
                                  parse_format_descriptor(iso));
  REQUIRE(r.tracks.size() == 1);
  CHECK(r.tracks[0].points[1].timestamp_s == 951913817.0);
}

TEST_CASE("malformed rows are reported and the rest ingested") {
  const auto d = parse_format_descriptor(kSimple);
  std::string csv = "t,lat,lon,alt,id\n";
  for (int i = 0; i < 100; ++i) {
    csv += i == 42 ? fmt::format("{},north,2,100,a\n", i) : fmt::format("{},1.5,2,100,a\n", i);
  }
  const auto r = parse_track_file(csv, d);
  CHECK(r.total_rows == 100);
  REQUIRE(r.rejected.size() == 1);
  CHECK(r.rejected[0].row == 43);
  REQUIRE(r.tracks.size() == 1);
  CHECK(r.tracks[0].points.size() == 99);

  std::string worse = "t,lat,lon,alt,id\n";
  for (int i = 0; i < 20; ++i) worse += i % 4 == 0 ? "x,1,2,3,a\n" : fmt::format("{},1,2,3,a\n", i);
  CHECK(code_of([&] { parse_track_file(worse, d); }) == ErrorCode::validation);
  CHECK(code_of([&] { parse_track_file("t,lat,lon,id\n1,2,3,a\n", d); }) == ErrorCode::validation);
}

TEST_CASE("extras survive a serialize and parse round trip") {
  const auto d = parse_format_descriptor(kOpenSky);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> lat(-60, 60), lon(-170, 170), alt(-50, 4000);
  std::vector<geo::Track> tracks;
  for (int k = 0; k < 20; ++k) {
    geo::Track t;
    t.track_id = fmt::format("id{:02}", k);
    for (int i = 0; i < 15; ++i) {
      geo::TrackPoint p{{lat(rng), lon(rng), alt(rng)}, 1.7e9 + i * 1.5 + k, t.track_id};
      t.points.push_back(p);
      t.extras["velocity"].push_back(alt(rng));
      t.extras["heading"].push_back(std::string(i % 2 ? "n" : "s"));
    }
    tracks.push_back(t);
  }
  const auto again = parse_track_file(serialize_tracks(tracks, d), d);
  REQUIRE(again.tracks.size() == tracks.size());
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    CHECK(again.tracks[k].track_id == tracks[k].track_id);
    REQUIRE(again.tracks[k].points.size() == tracks[k].points.size());
    for (std::size_t i = 0; i < tracks[k].points.size(); ++i) {
      CHECK(again.tracks[k].points[i] == tracks[k].points[i]);
    }
    CHECK(std::get<std::string>(again.tracks[k].extras.at("heading")[3]) == "n");
  }
}

TEST_CASE("filter keeps the airport neighbourhood") {
  FilterCriteria c;
  c.airport_ref = {0.0, 0.0, 200.0};
  c.radius_nm = 1.0;
  c.agl_ceiling_ft = 1500.0;
  const double ceiling = 1500 * 0.3048;
  const double deg_per_nm = 1852.0 / (geo::kEarthRadiusM * 3.14159265358979 / 180.0);

  SUBCASE("points at the reference are unchanged") {
    const auto t = line_track("a", {{0, 200}, {0, 200}, {0, 200}});
    const auto out = apply_filter_criteria(std::vector{t}, c);
    REQUIRE(out.size() == 1);
    CHECK(out[0].points == t.points);
  }
  SUBCASE("a track above the ceiling is dropped") {
    const auto t = line_track("b", {{0, 200 + 2000 * 0.3048}, {0, 200 + 2000 * 0.3048}});
    CHECK(apply_filter_criteria(std::vector{t}, c).empty());
  }
  SUBCASE("ceiling and radius are inclusive") {
    const auto t = line_track("c", {{0, 200 + ceiling - 1e-6}, {0.99 * deg_per_nm, 200}, {1.01 * deg_per_nm, 200}});
    const auto out = apply_filter_criteria(std::vector{t}, c);
    REQUIRE(out.size() == 1);
    CHECK(out[0].points.size() == 2);
  }
  SUBCASE("an excursion splits the track into suffixed runs") {
    const double far = 3 * deg_per_nm;
    const auto t = line_track("d", {{0, 200}, {0.1 * deg_per_nm, 210}, {far, 220}, {far, 230},
                                    {0.2 * deg_per_nm, 240}, {0.1 * deg_per_nm, 250}, {0.0, 260}});
    const auto out = apply_filter_criteria(std::vector{t}, c);
    REQUIRE(out.size() == 2);
    CHECK(out[0].track_id == "d_r1");
    CHECK(out[1].track_id == "d_r2");
    CHECK(out[0].points.size() == 2);
    CHECK(out[1].points.size() == 3);
    CHECK(out[1].points[0].geo.altitude_m == 240);
    CHECK(out[1].points[0].track_id == "d_r2");
  }
  SUBCASE("runs of one point are discarded") {
    const double far = 3 * deg_per_nm;
    const auto t = line_track("e", {{0, 200}, {far, 200}, {0, 200}, {0.1 * deg_per_nm, 200}});
    const auto out = apply_filter_criteria(std::vector{t}, c);
    REQUIRE(out.size() == 1);
    CHECK(out[0].points.size() == 2);
  }
}

TEST_CASE("filter is idempotent on random tracks") {
  FilterCriteria c;
  c.airport_ref = {10.0, 10.0, 100.0};
  c.radius_nm = 3.0;
  c.agl_ceiling_ft = 1500.0;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dlat(-0.08, 0.08), alt(0, 800);
  std::vector<geo::Track> tracks;
  for (int k = 0; k < 200; ++k) {
    geo::Track t;
    t.track_id = fmt::format("t{}", k);
    for (int i = 0; i < 30; ++i) {
      t.points.push_back({{10.0 + dlat(rng), 10.0 + dlat(rng), alt(rng)}, double(i), t.track_id});
    }
    tracks.push_back(t);
  }
  const auto once = apply_filter_criteria(tracks, c);
  const auto twice = apply_filter_criteria(once, c);
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(once[i].track_id == twice[i].track_id);
    CHECK(once[i].points == twice[i].points);
    CHECK(once[i].points.size() >= 2);
  }
}

TEST_CASE("external annotations are attributed to the model") {
  const auto desc = parse_annotation_descriptor("algorithm: kmeans\nversion: v0\nlabels: [landing, touch_and_go, takeoff]\n");
  LabelSet project = parse_label_set(
      "project: karb-traffic\nlabels: [{name: landing}, {name: touch_and_go}, {name: takeoff}]\n");
  CHECK(project.project_name == "karb-traffic");
  CHECK(project.labels.size() == 3);
  CHECK_NOTHROW(desc.validate_against(project));

  std::vector<AnnotationRow> rows{{"a", "landing"}, {"b", "landing"}, {"c", "landing"}};
  auto r = ingest_external_annotations(rows, desc);
  CHECK(r.annotator.qualified_name() == "kmeans:v0");
  CHECK(r.annotator.kind == AnnotatorKind::model);
  REQUIRE(r.records.size() == 3);
  for (const auto& rec : r.records) CHECK_FALSE(rec.verified);
  CHECK(r.errors.empty());

  rows.push_back({"d", "go_around"});
  rows.push_back({"zz", "takeoff"});
  r = ingest_external_annotations(rows, desc, [](std::string_view s) { return s != "zz"; });
  CHECK(r.records.size() == 3);
  REQUIRE(r.errors.size() == 2);
  CHECK(r.errors[0].row == 4);
  CHECK(r.errors[1].row == 5);

  CHECK(ingest_external_annotations({}, desc).records.empty());

  LabelSet small{"p", {"landing"}};
  CHECK(code_of([&] { desc.validate_against(small); }) == ErrorCode::validation);
}

TEST_CASE("annotation tables accept subject_id or track_id headers") {
  const auto t = parse_annotation_table("track_id,label,score\nA,landing,0.5\nB,takeoff,0.1\n");
  const auto rows = t.subject_labels();
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].subject == "B");
  CHECK(rows[1].label == "takeoff");
  CHECK(t.rows[0][t.column("score")] == "0.5");
}

TEST_CASE("split sizes follow round robin") {
  std::vector<std::string> ids;
  for (int i = 0; i < 1084; ++i) ids.push_back(fmt::format("{:05}", i));
  const auto sets = split_dataset(ids, 4, 0);
  REQUIRE(sets.size() == 4);
  for (const auto& s : sets) CHECK(s.size() == 271);

  std::vector<std::string> five{"a", "b", "c", "d", "e"};
  const auto two = split_dataset(five, 2, 3);
  CHECK(two[0].size() == 3);
  CHECK(two[1].size() == 2);
  CHECK(split_dataset(five, 2, 3) == two);
  CHECK(code_of([&] { split_dataset(five, 6, 0); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { split_dataset(five, 1, 0); }) == ErrorCode::invalid_argument);
}

TEST_CASE("split partitions for random sizes") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 400;
    const std::size_t k = 2 + rng() % (n - 1);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(fmt::format("x{}", i));
    const auto sets = split_dataset(ids, k, rng());
    REQUIRE(sets.size() == k);
    std::set<std::string> seen;
    std::size_t lo = n, hi = 0, total = 0;
    for (const auto& s : sets) {
      lo = std::min(lo, s.size());
      hi = std::max(hi, s.size());
      total += s.size();
      seen.insert(s.begin(), s.end());
    }
    CHECK(total == n);
    CHECK(seen.size() == n);
    CHECK(hi - lo <= 1);
  }
}
