#include "tracklab/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "tracklab/error.hpp"

namespace tracklab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::validation: return "validation";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::unauthenticated: return "unauthenticated";
    case ErrorCode::undefined_direction: return "undefined_direction";
    case ErrorCode::storage: return "storage";
    case ErrorCode::internal: return "internal";
  }
  return "internal";
}

}  // namespace tracklab

namespace tracklab::geo {

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

double normalize_deg360(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0) d += 360.0;
  // fmod of a tiny negative value can round up to exactly 360
  if (d >= 360.0) d -= 360.0;
  return d;
}

double normalize_deg180(double deg) {
  double d = std::fmod(deg, 180.0);
  if (d < 0) d += 180.0;
  if (d >= 180.0) d -= 180.0;
  return d;
}

bool GeoPoint::valid() const {
  return std::isfinite(latitude_deg) && std::isfinite(longitude_deg) &&
         std::isfinite(altitude_m) && latitude_deg >= -90.0 && latitude_deg <= 90.0 &&
         longitude_deg >= -180.0 && longitude_deg < 180.0;
}

Track Track::slice(std::size_t first, std::size_t last, std::string new_id) const {
  Track out;
  out.track_id = std::move(new_id);
  out.points.assign(points.begin() + static_cast<std::ptrdiff_t>(first),
                    points.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  for (auto& p : out.points) p.track_id = out.track_id;
  for (const auto& [name, column] : extras) {
    out.extras[name].assign(column.begin() + static_cast<std::ptrdiff_t>(first),
                            column.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  }
  return out;
}

void Track::check_invariants() const {
  if (track_id.empty()) fail(ErrorCode::validation, "track id is empty");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].track_id != track_id) {
      fail(ErrorCode::validation,
           fmt::format("point {} of track {} carries id {}", i, track_id, points[i].track_id));
    }
    if (!std::isfinite(points[i].timestamp_s) || !points[i].geo.valid()) {
      fail(ErrorCode::validation, fmt::format("point {} of track {} is invalid", i, track_id));
    }
    if (i > 0 && points[i].timestamp_s < points[i - 1].timestamp_s) {
      fail(ErrorCode::validation, fmt::format("track {} is not time ordered at {}", track_id, i));
    }
  }
  for (const auto& [name, column] : extras) {
    if (column.size() != points.size()) {
      fail(ErrorCode::validation, fmt::format("extra column {} has wrong length", name));
    }
  }
}

namespace {

// Longitude difference wrapped to [-180, 180).
double delta_lon_deg(double lon, double lon0) {
  double d = std::fmod(lon - lon0 + 180.0, 360.0);
  if (d < 0) d += 360.0;
  return d - 180.0;
}

}  // namespace

Enu to_enu(const GeoPoint& p, const LocalFrame& frame) {
  const GeoPoint& o = frame.origin;
  const double cos_lat0 = std::cos(deg_to_rad(o.latitude_deg));
  return Enu{
      kEarthRadiusM * cos_lat0 * deg_to_rad(delta_lon_deg(p.longitude_deg, o.longitude_deg)),
      kEarthRadiusM * deg_to_rad(p.latitude_deg - o.latitude_deg),
      p.altitude_m - o.altitude_m,
  };
}

GeoPoint from_enu(const Enu& enu, const LocalFrame& frame) {
  const GeoPoint& o = frame.origin;
  const double cos_lat0 = std::cos(deg_to_rad(o.latitude_deg));
  GeoPoint p;
  p.latitude_deg = o.latitude_deg + rad_to_deg(enu.north_m / kEarthRadiusM);
  double lon = o.longitude_deg + rad_to_deg(enu.east_m / (kEarthRadiusM * cos_lat0));
  p.longitude_deg = delta_lon_deg(lon, 0.0);
  p.altitude_m = o.altitude_m + enu.up_m;
  return p;
}

double haversine_distance_m(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = deg_to_rad(a.latitude_deg);
  const double phi2 = deg_to_rad(b.latitude_deg);
  const double dphi = phi2 - phi1;
  const double dlambda = deg_to_rad(b.longitude_deg - a.longitude_deg);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double bearing_deg(const GeoPoint& from, const GeoPoint& to) {
  if (from.latitude_deg == to.latitude_deg &&
      delta_lon_deg(to.longitude_deg, from.longitude_deg) == 0.0) {
    fail(ErrorCode::undefined_direction, "bearing between coincident horizontal positions");
  }
  const double phi1 = deg_to_rad(from.latitude_deg);
  const double phi2 = deg_to_rad(to.latitude_deg);
  const double dlambda = deg_to_rad(to.longitude_deg - from.longitude_deg);
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  return normalize_deg360(rad_to_deg(std::atan2(y, x)));
}

double enu_bearing_deg(double east, double north) {
  if (east == 0.0 && north == 0.0) {
    fail(ErrorCode::undefined_direction, "bearing of a zero vector");
  }
  return normalize_deg360(rad_to_deg(std::atan2(east, north)));
}

double angular_distance_mod180(double a_deg, double b_deg) {
  const double d = normalize_deg180(std::fabs(a_deg - b_deg));
  return std::min(d, 180.0 - d);
}

double vertical_rate_mps(const TrackPoint& p1, const TrackPoint& p2) {
  const double dt = p2.timestamp_s - p1.timestamp_s;
  if (!(dt > 0.0)) {
    fail(ErrorCode::invalid_argument,
         fmt::format("vertical rate needs increasing timestamps ({} -> {})", p1.timestamp_s, p2.timestamp_s));
  }
  return (p2.geo.altitude_m - p1.geo.altitude_m) / dt;
}

}  // namespace tracklab::geo
