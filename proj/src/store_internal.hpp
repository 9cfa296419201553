#pragma once

#include <algorithm>
#include <fmt/format.h>

#include "tracklab/error.hpp"
#include "tracklab/store.hpp"

namespace tracklab::store::detail {

inline TrackMeta compute_meta(const StoredTrack& t, std::int64_t project_id) {
  if (t.track.points.size() < 2) {
    fail(ErrorCode::validation, fmt::format("track {} needs at least 2 points", t.track.track_id));
  }
  t.track.check_invariants();
  TrackMeta meta;
  meta.track_id = t.track.track_id;
  meta.project_id = project_id;
  meta.num_points = t.track.points.size();
  meta.start_time = t.track.start_time();
  meta.end_time = t.track.end_time();
  meta.kind = t.segment ? SubjectKind::segment : SubjectKind::track;
  meta.segment = t.segment;
  return meta;
}

// Track-level filters (everything except the annotation predicates).
inline bool track_matches(const Query& q, const geo::Track& track, const TrackMeta& meta) {
  if (q.kind && meta.kind != *q.kind) return false;
  if (q.set_id && meta.set_id != q.set_id) return false;
  if (q.runway_id && (!meta.segment || meta.segment->runway_id != *q.runway_id)) return false;
  if (q.time_range && (meta.end_time < q.time_range->start || meta.start_time > q.time_range->end)) return false;
  if (q.bbox) {
    const bool any = std::any_of(track.points.begin(), track.points.end(),
                                 [&](const geo::TrackPoint& p) { return q.bbox->contains(p.geo); });
    if (!any) return false;
  }
  return true;
}

inline std::vector<std::string> paginate(std::vector<std::string> ids, const Query& q) {
  if (q.offset >= ids.size()) return {};
  auto first = ids.begin() + static_cast<std::ptrdiff_t>(q.offset);
  auto last = ids.end();
  if (q.limit && *q.limit < static_cast<std::size_t>(last - first)) last = first + static_cast<std::ptrdiff_t>(*q.limit);
  return {first, last};
}

inline void check_label(const Project& p, std::string_view label) {
  if (!p.label_set.contains(label)) {
    fail(ErrorCode::validation, fmt::format("label '{}' is not in project '{}' label set", label, p.name));
  }
}

}  // namespace tracklab::store::detail
