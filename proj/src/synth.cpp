#include "tracklab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "tracklab/error.hpp"
#include "tracklab/ingest.hpp"

namespace tracklab::synth {

namespace {

constexpr double kCeilingAglM = 440.0;
constexpr double kCircuitOffsetM = 1500.0;
constexpr double kExitMarginM = 2500.0;

// Runway-aligned coordinates: s along the direction of travel from the
// runway centroid, l to the right of it.
struct Leg {
  double s0, l0, s1, l1;
  double alt0, alt1;
  double v0, v1;
  double duration() const {
    const double d = std::hypot(s1 - s0, l1 - l0);
    return d > 0.0 ? 2.0 * d / (v0 + v1) : 0.0;
  }
};

struct Flight {
  std::vector<Leg> legs;
  std::vector<double> boundaries;  // flight times splitting truth segments
  double s = 0.0, l = 0.0, alt = 0.0, v = 0.0;
  double elapsed = 0.0;

  void to(double s1, double l1, double alt1, double v1) {
    Leg leg{s, l, s1, l1, alt, alt1, v, v1};
    elapsed += leg.duration();
    legs.push_back(leg);
    s = s1;
    l = l1;
    alt = alt1;
    v = v1;
  }
};

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double uniform(std::mt19937_64& rng, const std::pair<double, double>& range) {
  return uniform(rng, range.first, range.second);
}

}  // namespace

void SynthConfig::validate() const {
  if (n_per_behavior < 1) fail(ErrorCode::validation, "n_per_behavior must be positive");
  if (runways.empty()) fail(ErrorCode::validation, "at least one runway is required");
  for (const auto& rw : runways) {
    if (!(rw.length_m > 0.0) || !(rw.weight > 0.0)) {
      fail(ErrorCode::validation, fmt::format("runway {} needs positive length and weight", rw.id));
    }
  }
  if (lateral_noise_m < 0.0 || vertical_noise_m < 0.0 || timing_noise_s < 0.0) {
    fail(ErrorCode::validation, "noise levels must be non-negative");
  }
  if (!(sample_dt_s > 0.0)) fail(ErrorCode::validation, "sample_dt_s must be positive");
  if (!(pattern_alt_agl_m > 0.0)) fail(ErrorCode::validation, "pattern_alt_agl_m must be positive");
  for (const auto& r : {landing_descent_mps, takeoff_climb_mps, touch_and_go_rate_mps}) {
    if (!(r.first > 0.0) || !(r.second >= r.first)) fail(ErrorCode::validation, "vertical rate ranges must be positive");
  }
  if (max_circuits < 0) fail(ErrorCode::validation, "max_circuits must be non-negative");
}

SynthOutput synth_script(const SynthConfig& cfg, const std::string& track_id, std::size_t runway_index,
                         const std::vector<std::string>& behaviors, std::uint64_t seed) {
  cfg.validate();
  if (behaviors.empty()) fail(ErrorCode::invalid_argument, "a script needs at least one behavior");
  if (runway_index >= cfg.runways.size()) fail(ErrorCode::invalid_argument, "runway index out of range");
  for (std::size_t i = 0; i < behaviors.size(); ++i) {
    const auto& b = behaviors[i];
    if (b != kLanding && b != kTouchAndGo && b != kTakeoff) {
      fail(ErrorCode::invalid_argument, fmt::format("unknown behavior '{}'", b));
    }
    if (b == kLanding && i + 1 != behaviors.size()) fail(ErrorCode::invalid_argument, "a landing must come last");
    if (b == kTakeoff && i != 0) fail(ErrorCode::invalid_argument, "a takeoff must come first");
  }

  std::mt19937_64 rng(seed);
  const auto& rw = cfg.runways[runway_index];
  const double heading = rng() % 2 ? rw.heading_deg : rw.heading_deg + 180.0;
  const double half = rw.length_m / 2.0;
  const double exit_s = cfg.zone_radius_m + kExitMarginM;
  const double v = uniform(rng, 32.0, 42.0);
  const double pattern = cfg.pattern_alt_agl_m + uniform(rng, -20.0, 20.0);

  Flight f;
  for (std::size_t i = 0; i < behaviors.size(); ++i) {
    const auto& b = behaviors[i];
    const bool first = i == 0;
    const bool last = i + 1 == behaviors.size();

    if (b == kTakeoff) {
      f.s = -half;
      f.v = 3.0;
      f.to(-half + 0.6 * rw.length_m, 0.0, 0.0, v);
    } else {
      const double rate = first ? (b == kLanding ? uniform(rng, cfg.landing_descent_mps) : uniform(rng, cfg.touch_and_go_rate_mps))
                                : uniform(rng, 2.0, 2.4);
      const double h = first && b == kLanding ? uniform(rng, 350.0, kCeilingAglM) : pattern;
      const double descent_s = -half - v * h / rate;
      if (first) {
        f.v = v;
        if (b == kLanding || descent_s < -exit_s) {
          f.s = std::max(descent_s, -exit_s);
          f.alt = h * (-half - f.s) / (-half - descent_s);
        } else {
          f.s = -exit_s;
          f.alt = h;
          f.to(descent_s, 0.0, h, v);
        }
      } else {
        // Circuit from the climb-out back to final, apex on the downwind leg.
        const double up = std::max(f.s, half) + 500.0;
        f.to(up, 0.0, f.alt, v);
        f.to(up, kCircuitOffsetM, f.alt, v);
        const double mid = std::hypot(up - (descent_s - 500.0), 0.0) / 2.0;
        f.boundaries.push_back(f.elapsed + mid / v);
        f.to(descent_s - 500.0, kCircuitOffsetM, f.alt, v);
        f.to(descent_s - 500.0, 0.0, f.alt, v);
        f.to(descent_s, 0.0, f.alt, v);
      }
      f.to(-half, 0.0, 0.0, v);
      if (b == kLanding) {
        f.to(-half + 0.6 * rw.length_m, 0.0, 0.0, 5.0);
        break;
      }
      f.to(-half + uniform(rng, 150.0, 300.0), 0.0, 0.0, v);
    }

    // Climb-out after a takeoff or touch-and-go.
    const double climb = b == kTakeoff ? uniform(rng, cfg.takeoff_climb_mps) : uniform(rng, cfg.touch_and_go_rate_mps);
    const double target = last ? (b == kTakeoff ? kCeilingAglM : pattern) : pattern;
    double top_s = f.s + v * target / climb;
    if (top_s > exit_s) {
      f.to(exit_s, 0.0, target * (exit_s - f.s) / (top_s - f.s), v);
    } else {
      f.to(top_s, 0.0, target, v);
      if (last && b == kTouchAndGo) f.to(exit_s, 0.0, target, v);
    }
  }

  // Sample the flight.
  const geo::LocalFrame frame{cfg.airport};
  const double h = geo::deg_to_rad(heading);
  const double ue = std::sin(h), un = std::cos(h);
  std::normal_distribution<double> unit(0.0, 1.0);
  geo::Track track;
  track.track_id = track_id;
  const double t0 = cfg.start_time;
  std::size_t leg = 0;
  double leg_start = 0.0;
  double prev_t = -1.0;
  for (long k = 0;; ++k) {
    double t = static_cast<double>(k) * cfg.sample_dt_s;
    if (cfg.timing_noise_s > 0.0) t += cfg.timing_noise_s * unit(rng);
    t = std::max(t, std::max(0.0, prev_t + 0.1 * cfg.sample_dt_s));
    while (leg < f.legs.size() && t > leg_start + f.legs[leg].duration()) {
      leg_start += f.legs[leg].duration();
      ++leg;
    }
    if (leg == f.legs.size()) break;
    prev_t = t;
    const auto& L = f.legs[leg];
    const double T = L.duration();
    const double tau = t - leg_start;
    const double frac_t = T > 0.0 ? tau / T : 0.0;
    const double dist = L.v0 * tau + 0.5 * (T > 0.0 ? (L.v1 - L.v0) / T : 0.0) * tau * tau;
    const double total = std::hypot(L.s1 - L.s0, L.l1 - L.l0);
    const double frac = total > 0.0 ? std::clamp(dist / total, 0.0, 1.0) : 0.0;
    const double s = L.s0 + frac * (L.s1 - L.s0);
    const double l = L.l0 + frac * (L.l1 - L.l0);
    const double agl = L.alt0 + frac_t * (L.alt1 - L.alt0);
    double east = rw.east_m + s * ue + l * un;
    double north = rw.north_m + s * un - l * ue;
    double up = agl;
    if (cfg.lateral_noise_m > 0.0) {
      east += cfg.lateral_noise_m * unit(rng);
      north += cfg.lateral_noise_m * unit(rng);
    }
    if (cfg.vertical_noise_m > 0.0) up += cfg.vertical_noise_m * unit(rng);
    geo::TrackPoint p;
    p.geo = geo::from_enu({east, north, 0.0}, frame);
    p.geo.altitude_m = cfg.airport.altitude_m + up;
    p.timestamp_s = t0 + t;
    p.track_id = track_id;
    track.points.push_back(p);
  }

  SynthOutput out;
  double seg_start = track.start_time();
  for (std::size_t i = 0; i < behaviors.size(); ++i) {
    TruthSegment ts;
    ts.track_id = track_id;
    ts.seg_index = static_cast<int>(i);
    ts.start_time = seg_start;
    ts.end_time = i < f.boundaries.size() ? t0 + f.boundaries[i] : track.end_time();
    ts.label = behaviors[i];
    ts.runway_id = rw.id;
    ts.contains_contact = true;
    ts.climbs_out = behaviors[i] != kLanding;
    seg_start = ts.end_time;
    out.truth.push_back(ts);
  }
  out.tracks.push_back(std::move(track));
  return out;
}

SynthOutput synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::string> labels;
  for (int i = 0; i < cfg.n_per_behavior; ++i) {
    labels.push_back(kLanding);
    labels.push_back(kTouchAndGo);
    labels.push_back(kTakeoff);
  }
  std::shuffle(labels.begin(), labels.end(), rng);
  std::vector<double> weights;
  for (const auto& rw : cfg.runways) weights.push_back(rw.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  SynthOutput out;
  SynthConfig track_cfg = cfg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t runway = pick(rng);
    std::vector<std::string> script{labels[i]};
    if (labels[i] == kTouchAndGo && cfg.max_circuits > 0) {
      const auto extra = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.max_circuits + 1));
      script.insert(script.end(), static_cast<std::size_t>(extra), kTouchAndGo);
    }
    track_cfg.start_time = cfg.start_time + 900.0 * static_cast<double>(i);
    auto one = synth_script(track_cfg, fmt::format("T{:04d}", i + 1), runway, script, rng());
    out.tracks.push_back(std::move(one.tracks.front()));
    out.truth.insert(out.truth.end(), one.truth.begin(), one.truth.end());
  }
  return out;
}

std::string truth_csv(const std::vector<TruthSegment>& truth) {
  std::string out = std::string(kTruthCsvHeader) + "\n";
  for (const auto& t : truth) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", ingest::quote_field(t.track_id), t.seg_index, t.start_time,
                       t.end_time, t.label, ingest::quote_field(t.runway_id), t.contains_contact ? "true" : "false",
                       t.climbs_out ? "true" : "false");
  }
  return out;
}

std::vector<TruthSegment> parse_truth_csv(std::string_view text) {
  const auto lines = ingest::split_lines(text);
  if (lines.empty() || lines.front() != kTruthCsvHeader) {
    fail(ErrorCode::validation, "truth file must start with the header line");
  }
  std::vector<TruthSegment> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = ingest::split_delimited(lines[i], ',');
    if (f.size() != 8) fail(ErrorCode::validation, fmt::format("truth line {} has {} fields", i + 1, f.size()));
    try {
      out.push_back({f[0], std::stoi(f[1]), std::stod(f[2]), std::stod(f[3]), f[4], f[5], f[6] == "true",
                     f[7] == "true"});
    } catch (const std::logic_error&) {
      fail(ErrorCode::validation, fmt::format("truth line {} is malformed", i + 1));
    }
  }
  return out;
}

std::string format_yaml() {
  return "format_name: synth_positions\n"
         "delimiter: \",\"\n"
         "columns:\n"
         "  timestamp: {source: time, type: epoch_seconds}\n"
         "  latitude: lat\n"
         "  longitude: lon\n"
         "  altitude: {source: alt_m, type: meters}\n"
         "  track_id: id\n";
}

std::string tracks_csv(const std::vector<geo::Track>& tracks) {
  return ingest::serialize_tracks(tracks, ingest::parse_format_descriptor(format_yaml()));
}

std::string project_yaml(const SynthConfig& cfg, const std::string& project_name) {
  return fmt::format(
      "project: {}\n"
      "labels: [{}, {}, {}]\n"
      "airport: {{latitude: {}, longitude: {}, elevation_m: {}}}\n"
      "filter: {{radius_nm: 120, agl_ceiling_ft: 1500}}\n"
      "pipeline: {{zone_radius_m: {}, n_runways: {}}}\n",
      project_name, kLanding, kTouchAndGo, kTakeoff, cfg.airport.latitude_deg, cfg.airport.longitude_deg,
      cfg.airport.altitude_m, cfg.zone_radius_m, cfg.runways.size());
}

}  // namespace tracklab::synth
