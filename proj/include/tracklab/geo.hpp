#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace tracklab::geo {

/// Mean earth radius used for every spherical computation.
inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kMetersPerNauticalMile = 1852.0;
inline constexpr double kMetersPerFoot = 0.3048;

struct GeoPoint {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double altitude_m = 0.0;

  bool valid() const;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct TrackPoint {
  GeoPoint geo;
  double timestamp_s = 0.0;
  std::string track_id;

  friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

using ExtraValue = std::variant<double, std::string>;

struct Track {
  std::string track_id;
  std::vector<TrackPoint> points;
  // Per-point user columns; each vector is parallel to `points`.
  std::map<std::string, std::vector<ExtraValue>> extras;

  double start_time() const { return points.empty() ? 0.0 : points.front().timestamp_s; }
  double end_time() const { return points.empty() ? 0.0 : points.back().timestamp_s; }
  /// Copy of points [first, last] inclusive, extras sliced alongside.
  Track slice(std::size_t first, std::size_t last, std::string new_id) const;
  /// Throws if ids disagree or timestamps decrease.
  void check_invariants() const;
};

/// Local tangent frame anchored at an airport reference point. The origin's
/// altitude is the airport elevation.
struct LocalFrame {
  GeoPoint origin;

  double origin_elevation_m() const { return origin.altitude_m; }
};

struct Enu {
  double east_m = 0.0;
  double north_m = 0.0;
  double up_m = 0.0;
};

/// Equirectangular projection about the frame origin.
Enu to_enu(const GeoPoint& p, const LocalFrame& frame);
/// Exact inverse of to_enu.
GeoPoint from_enu(const Enu& enu, const LocalFrame& frame);

double haversine_distance_m(const GeoPoint& a, const GeoPoint& b);

/// Initial great-circle bearing in [0, 360). Throws undefined_direction when
/// the two points share a horizontal position.
double bearing_deg(const GeoPoint& from, const GeoPoint& to);

/// Bearing of a planar ENU vector in [0, 360).
double enu_bearing_deg(double east, double north);

/// Distance between two headings where theta and theta + 180 are the same
/// direction. Result in [0, 90].
double angular_distance_mod180(double a_deg, double b_deg);

/// Finite-difference climb rate. Throws when p2 is not later than p1.
double vertical_rate_mps(const TrackPoint& p1, const TrackPoint& p2);

double normalize_deg360(double deg);
double normalize_deg180(double deg);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

}  // namespace tracklab::geo
