#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tracklab/geo.hpp"
#include "tracklab/ml.hpp"

namespace tracklab::pipeline {

struct PipelineConfig {
  double zone_radius_m = 8000.0;
  double contact_agl_m = 15.0;
  double pattern_alt_agl_m = 150.0;
  int n_runways = 2;
  std::array<double, 4> histogram_edges_mps{-2.5, -0.5, 0.5, 2.5};
  double lateral_gate_m = 500.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Runway {
  std::string id;
  geo::GeoPoint centroid;
  double heading_deg = 0.0;  // [0, 180)
  double length_m = 0.0;
  std::size_t support = 0;   // ground points in the cluster
};

struct ContactEvent {
  std::string track_id;
  std::size_t point_index = 0;
  geo::GeoPoint position;
  std::optional<std::string> runway_id;
};

struct TrackSegment {
  std::string segment_id;
  std::string track_id;
  std::size_t start_index = 0;  // inclusive
  std::size_t end_index = 0;    // inclusive
  std::optional<double> avg_direction_deg;
  std::optional<std::string> runway_id;
  ml::FeatureVector feature{};
  bool contains_contact = false;
  bool climbs_out = false;

  std::size_t size() const { return end_index - start_index + 1; }
};

/// Principal axis of a planar point cloud.
struct AxisFit {
  double east_m = 0.0;  // centroid
  double north_m = 0.0;
  double heading_deg = 0.0;  // [0, 180)
  double length_m = 0.0;     // extent of projections onto the axis
};

AxisFit fit_axis(std::span<const ml::Point<2>> points);

/// Seeded k-means++ with restarts over planar points; returns the best
/// assignment found.
std::vector<std::size_t> cluster_points(std::span<const ml::Point<2>> points, std::size_t k, std::uint64_t seed);

/// Runways from ground points inside the zone around airport. Ids are RW-A,
/// RW-B, ... in order of decreasing support.
std::vector<Runway> detect_runways(std::span<const geo::Track> tracks, const geo::GeoPoint& airport,
                                   const PipelineConfig& cfg);
/// Same, from planar ground points in the airport frame.
std::vector<Runway> detect_runways_enu(std::span<const ml::Point<2>> ground, const geo::LocalFrame& frame,
                                       const PipelineConfig& cfg);

std::vector<ContactEvent> find_contacts(const geo::Track& track, std::size_t first, std::size_t last,
                                        const geo::GeoPoint& airport, std::span<const Runway> runways,
                                        const PipelineConfig& cfg);

std::vector<TrackSegment> segment_track(const geo::Track& track, const geo::GeoPoint& airport,
                                        std::span<const Runway> runways, const PipelineConfig& cfg);

/// Bearing of the summed ENU displacements over the segment. Throws
/// undefined_direction on zero net displacement.
double average_direction(const geo::Track& track, std::size_t start_index, std::size_t end_index);

const std::string& assign_runway(double direction_deg, std::span<const Runway> runways);

ml::FeatureVector vertical_rate_histogram(const geo::Track& track, std::size_t start_index, std::size_t end_index,
                                          const PipelineConfig& cfg);

std::size_t histogram_bin(double rate_mps, const std::array<double, 4>& edges);

}  // namespace tracklab::pipeline
