#include "tracklab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "tracklab/error.hpp"

namespace tracklab::pipeline {

namespace {

constexpr int kRestarts = 8;
constexpr int kLloydIterations = 100;

double agl(const geo::TrackPoint& p, const geo::GeoPoint& airport) { return p.geo.altitude_m - airport.altitude_m; }

ml::Point<2> planar(const geo::GeoPoint& p, const geo::LocalFrame& frame) {
  const auto e = geo::to_enu(p, frame);
  return {e.east_m, e.north_m};
}

std::string runway_name(std::size_t i) {
  std::string suffix;
  do {
    suffix.insert(suffix.begin(), static_cast<char>('A' + i % 26));
    i /= 26;
  } while (i-- > 0);
  return "RW-" + suffix;
}

// Signed offsets of a point from a runway centerline.
struct Offsets {
  double along = 0.0;
  double lateral = 0.0;
};

Offsets offsets(const ml::Point<2>& p, const ml::Point<2>& centroid, double heading_deg) {
  const double h = geo::deg_to_rad(heading_deg);
  const double ue = std::sin(h), un = std::cos(h);
  const double de = p[0] - centroid[0], dn = p[1] - centroid[1];
  return {de * ue + dn * un, de * un - dn * ue};
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(zone_radius_m > 0.0)) fail(ErrorCode::validation, "zone_radius_m must be positive");
  if (!(contact_agl_m >= 0.0)) fail(ErrorCode::validation, "contact_agl_m must be non-negative");
  if (!(pattern_alt_agl_m > contact_agl_m)) fail(ErrorCode::validation, "pattern_alt_agl_m must exceed contact_agl_m");
  if (n_runways < 1) fail(ErrorCode::validation, "n_runways must be at least 1");
  if (!(lateral_gate_m > 0.0)) fail(ErrorCode::validation, "lateral_gate_m must be positive");
  for (std::size_t i = 1; i < histogram_edges_mps.size(); ++i) {
    if (!(histogram_edges_mps[i] > histogram_edges_mps[i - 1])) {
      fail(ErrorCode::validation, "histogram_edges_mps must be strictly increasing");
    }
  }
}

AxisFit fit_axis(std::span<const ml::Point<2>> points) {
  if (points.size() < 2) fail(ErrorCode::invalid_argument, "axis fit needs at least 2 points");
  const double n = static_cast<double>(points.size());
  double me = 0.0, mn = 0.0;
  for (const auto& p : points) {
    me += p[0];
    mn += p[1];
  }
  me /= n;
  mn /= n;
  double a = 0.0, b = 0.0, c = 0.0;
  for (const auto& p : points) {
    const double de = p[0] - me, dn = p[1] - mn;
    a += de * de;
    b += de * dn;
    c += dn * dn;
  }
  // Major axis of the 2x2 covariance, angle measured from east.
  const double theta = 0.5 * std::atan2(2.0 * b, a - c);
  AxisFit fit;
  fit.east_m = me;
  fit.north_m = mn;
  fit.heading_deg = geo::normalize_deg180(geo::rad_to_deg(std::atan2(std::cos(theta), std::sin(theta))));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : points) {
    const double s = offsets(p, {me, mn}, fit.heading_deg).along;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  fit.length_m = hi - lo;
  return fit;
}

std::vector<std::size_t> cluster_points(std::span<const ml::Point<2>> points, std::size_t k, std::uint64_t seed) {
  if (k == 0 || points.size() < k) {
    fail(ErrorCode::invalid_argument, fmt::format("cannot form {} clusters from {} points", k, points.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int r = 0; r < kRestarts; ++r) {
    std::vector<ml::Point<2>> init;
    init.push_back(points[rng() % points.size()]);
    std::vector<double> d2(points.size());
    while (init.size() < k) {
      double total = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        d2[i] = ml::squared_distance(points[i], init[ml::nearest_centroid<2>(init, points[i])]);
        total += d2[i];
      }
      if (total <= 0.0) {
        init.push_back(points[rng() % points.size()]);
        continue;
      }
      const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      std::size_t pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc >= target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      init.push_back(points[pick]);
    }
    auto res = ml::lloyd<2>(points, std::move(init), kLloydIterations, 1e-6);
    if (res.objective.back() < best_obj) {
      best_obj = res.objective.back();
      best = std::move(res.assignment);
    }
  }
  return best;
}

std::vector<Runway> detect_runways_enu(std::span<const ml::Point<2>> ground, const geo::LocalFrame& frame,
                                       const PipelineConfig& cfg) {
  cfg.validate();
  const auto k = static_cast<std::size_t>(cfg.n_runways);
  if (ground.size() < std::max<std::size_t>(k, 2)) {
    fail(ErrorCode::invalid_argument,
         fmt::format("runway detection needs at least {} ground points, got {}", std::max<std::size_t>(k, 2),
                     ground.size()));
  }
  std::vector<std::size_t> assignment = k == 1 ? std::vector<std::size_t>(ground.size(), 0)
                                               : cluster_points(ground, k, cfg.seed);
  std::vector<std::vector<ml::Point<2>>> members(k);
  for (std::size_t i = 0; i < ground.size(); ++i) members[assignment[i]].push_back(ground[i]);

  std::vector<Runway> out;
  for (const auto& m : members) {
    if (m.size() < 2) fail(ErrorCode::validation, "a runway cluster has fewer than 2 ground points");
    const auto fit = fit_axis(m);
    Runway rw;
    rw.centroid = geo::from_enu({fit.east_m, fit.north_m, 0.0}, frame);
    rw.centroid.altitude_m = frame.origin.altitude_m;
    rw.heading_deg = fit.heading_deg;
    rw.length_m = fit.length_m;
    rw.support = m.size();
    out.push_back(rw);
  }
  std::stable_sort(out.begin(), out.end(), [](const Runway& a, const Runway& b) {
    if (a.support != b.support) return a.support > b.support;
    if (a.centroid.longitude_deg != b.centroid.longitude_deg) return a.centroid.longitude_deg < b.centroid.longitude_deg;
    return a.centroid.latitude_deg < b.centroid.latitude_deg;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = runway_name(i);
  return out;
}

std::vector<Runway> detect_runways(std::span<const geo::Track> tracks, const geo::GeoPoint& airport,
                                   const PipelineConfig& cfg) {
  const geo::LocalFrame frame{airport};
  std::vector<ml::Point<2>> ground;
  for (const auto& t : tracks) {
    for (const auto& p : t.points) {
      if (agl(p, airport) > cfg.contact_agl_m) continue;
      const auto xy = planar(p.geo, frame);
      if (std::hypot(xy[0], xy[1]) > cfg.zone_radius_m) continue;
      ground.push_back(xy);
    }
  }
  return detect_runways_enu(ground, frame, cfg);
}

std::vector<ContactEvent> find_contacts(const geo::Track& track, std::size_t first, std::size_t last,
                                        const geo::GeoPoint& airport, std::span<const Runway> runways,
                                        const PipelineConfig& cfg) {
  const geo::LocalFrame frame{airport};
  std::vector<ml::Point<2>> centers;
  for (const auto& rw : runways) centers.push_back(planar(rw.centroid, frame));
  std::vector<ContactEvent> out;
  for (std::size_t i = first; i <= last && i < track.points.size(); ++i) {
    const auto& p = track.points[i];
    if (agl(p, airport) > cfg.contact_agl_m) continue;
    if (runways.empty()) {
      out.push_back({track.track_id, i, p.geo, std::nullopt});
      continue;
    }
    const auto xy = planar(p.geo, frame);
    std::optional<std::size_t> best;
    double best_lateral = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < runways.size(); ++r) {
      const auto o = offsets(xy, centers[r], runways[r].heading_deg);
      const double lateral = std::fabs(o.lateral);
      if (lateral > cfg.lateral_gate_m) continue;
      if (std::fabs(o.along) > runways[r].length_m / 2.0 + cfg.lateral_gate_m) continue;
      if (lateral < best_lateral) {
        best_lateral = lateral;
        best = r;
      }
    }
    if (best) out.push_back({track.track_id, i, p.geo, runways[*best].id});
  }
  return out;
}

double average_direction(const geo::Track& track, std::size_t start_index, std::size_t end_index) {
  if (end_index <= start_index || end_index >= track.points.size()) {
    fail(ErrorCode::invalid_argument, "average direction needs a segment of at least 2 points");
  }
  const geo::LocalFrame frame{track.points[start_index].geo};
  double se = 0.0, sn = 0.0;
  auto prev = geo::to_enu(track.points[start_index].geo, frame);
  for (std::size_t i = start_index + 1; i <= end_index; ++i) {
    const auto cur = geo::to_enu(track.points[i].geo, frame);
    se += cur.east_m - prev.east_m;
    sn += cur.north_m - prev.north_m;
    prev = cur;
  }
  return geo::enu_bearing_deg(se, sn);
}

const std::string& assign_runway(double direction_deg, std::span<const Runway> runways) {
  if (runways.empty()) fail(ErrorCode::invalid_argument, "no runways to assign");
  const Runway* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& rw : runways) {
    const double d = geo::angular_distance_mod180(direction_deg, rw.heading_deg);
    if (d < best_d || (d == best_d && rw.id < best->id)) {
      best_d = d;
      best = &rw;
    }
  }
  return best->id;
}

std::size_t histogram_bin(double rate_mps, const std::array<double, 4>& edges) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), rate_mps) - edges.begin());
}

ml::FeatureVector vertical_rate_histogram(const geo::Track& track, std::size_t start_index, std::size_t end_index,
                                          const PipelineConfig& cfg) {
  if (end_index <= start_index || end_index >= track.points.size()) {
    fail(ErrorCode::invalid_argument, "vertical rate histogram needs a segment of at least 2 points");
  }
  ml::FeatureVector h{};
  std::size_t n = 0;
  for (std::size_t i = start_index + 1; i <= end_index; ++i) {
    const auto& a = track.points[i - 1];
    const auto& b = track.points[i];
    if (!(b.timestamp_s > a.timestamp_s)) continue;
    h[histogram_bin(geo::vertical_rate_mps(a, b), cfg.histogram_edges_mps)] += 1.0;
    ++n;
  }
  if (n == 0) fail(ErrorCode::invalid_argument, "segment has no time-separated point pairs");
  for (auto& v : h) v /= static_cast<double>(n);
  return h;
}

std::vector<TrackSegment> segment_track(const geo::Track& track, const geo::GeoPoint& airport,
                                        std::span<const Runway> runways, const PipelineConfig& cfg) {
  std::vector<TrackSegment> out;
  const auto& pts = track.points;
  std::size_t i = 0;
  while (i < pts.size()) {
    if (geo::haversine_distance_m(pts[i].geo, airport) > cfg.zone_radius_m) {
      ++i;
      continue;
    }
    const std::size_t run_start = i;
    while (i + 1 < pts.size() && geo::haversine_distance_m(pts[i + 1].geo, airport) <= cfg.zone_radius_m) ++i;
    const std::size_t run_end = i++;
    if (run_end == run_start) continue;

    const auto contacts = find_contacts(track, run_start, run_end, airport, runways, cfg);
    std::vector<bool> is_contact(run_end - run_start + 1, false);
    for (const auto& c : contacts) is_contact[c.point_index - run_start] = true;

    // One boundary per gap between consecutive contact runs: the highest
    // point in the gap, if it is above pattern altitude.
    std::vector<std::size_t> boundaries;
    std::optional<std::size_t> last_contact;
    for (std::size_t j = run_start; j <= run_end; ++j) {
      if (!is_contact[j - run_start]) continue;
      if (last_contact && j > *last_contact + 1) {
        std::size_t apex = *last_contact + 1;
        for (std::size_t m = apex; m < j; ++m) {
          if (agl(pts[m], airport) > agl(pts[apex], airport)) apex = m;
        }
        if (agl(pts[apex], airport) > cfg.pattern_alt_agl_m) boundaries.push_back(apex);
      }
      last_contact = j;
    }

    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t start = run_start;
    for (const auto b : boundaries) {
      ranges.emplace_back(start, b);
      start = b + 1;
    }
    if (start <= run_end) {
      if (run_end == start && !ranges.empty()) {
        ranges.back().second = run_end;
      } else {
        ranges.emplace_back(start, run_end);
      }
    }

    for (const auto& [s, e] : ranges) {
      TrackSegment seg;
      seg.segment_id = fmt::format("{}_s{}", track.track_id, out.size());
      seg.track_id = track.track_id;
      seg.start_index = s;
      seg.end_index = e;
      std::optional<std::size_t> last;
      for (std::size_t j = s; j <= e; ++j) {
        if (is_contact[j - run_start]) last = j;
      }
      seg.contains_contact = last.has_value();
      if (last) {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t j = *last; j <= e; ++j) lo = std::min(lo, agl(pts[j], airport));
        seg.climbs_out = agl(pts[e], airport) - lo > cfg.pattern_alt_agl_m;
      }
      try {
        seg.avg_direction_deg = average_direction(track, s, e);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::undefined_direction) throw;
      }
      if (seg.avg_direction_deg && !runways.empty()) seg.runway_id = assign_runway(*seg.avg_direction_deg, runways);
      seg.feature = vertical_rate_histogram(track, s, e, cfg);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

}  // namespace tracklab::pipeline
