#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tracklab/geo.hpp"

namespace tracklab::synth {

struct SynthRunway {
  std::string id;
  double east_m = 0.0;  // centroid in the airport frame
  double north_m = 0.0;
  double heading_deg = 0.0;
  double length_m = 0.0;
  double weight = 1.0;  // share of generated traffic
};

struct SynthConfig {
  std::uint64_t seed = 7;
  int n_per_behavior = 100;
  geo::GeoPoint airport{42.2231, -83.7456, 251.0};
  std::vector<SynthRunway> runways{
      {"RW-A", 0.0, 0.0, 60.0, 1100.0, 0.6},
      {"RW-B", 1500.0, -900.0, 150.0, 700.0, 0.4},
  };
  double lateral_noise_m = 10.0;
  double vertical_noise_m = 0.5;
  double timing_noise_s = 0.2;
  double pattern_alt_agl_m = 250.0;
  // Vertical rate ranges (m/s) drawn uniformly per track.
  std::pair<double, double> landing_descent_mps{2.0, 4.5};
  std::pair<double, double> takeoff_climb_mps{2.0, 4.5};
  std::pair<double, double> touch_and_go_rate_mps{1.8, 2.4};
  double sample_dt_s = 2.0;
  double zone_radius_m = 8000.0;
  // Extra touch-and-go circuits flown by a share of the touch-and-go tracks.
  int max_circuits = 0;
  double start_time = 1.7e9;

  void validate() const;
};

inline constexpr const char* kLanding = "landing";
inline constexpr const char* kTouchAndGo = "touch_and_go";
inline constexpr const char* kTakeoff = "takeoff";

/// Scripted behavior of one generated segment.
struct TruthSegment {
  std::string track_id;
  int seg_index = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  std::string label;
  std::string runway_id;
  bool contains_contact = false;
  bool climbs_out = false;
};

struct SynthOutput {
  std::vector<geo::Track> tracks;
  std::vector<TruthSegment> truth;
};

SynthOutput synth_generate(const SynthConfig& cfg);

/// One track flying the given behaviors in order on one runway, joined by
/// traffic-pattern circuits. A landing may only come last.
SynthOutput synth_script(const SynthConfig& cfg, const std::string& track_id, std::size_t runway_index,
                         const std::vector<std::string>& behaviors, std::uint64_t seed);

inline constexpr const char* kTruthCsvHeader =
    "track_id,seg_index,start_time,end_time,label,runway,contains_contact,climbs_out";

std::string truth_csv(const std::vector<TruthSegment>& truth);
std::vector<TruthSegment> parse_truth_csv(std::string_view text);

/// Delimited position file and the matching format descriptor.
std::string tracks_csv(const std::vector<geo::Track>& tracks);
std::string format_yaml();
/// Project definition with labels, airport and ingest filter.
std::string project_yaml(const SynthConfig& cfg, const std::string& project_name);

}  // namespace tracklab::synth
