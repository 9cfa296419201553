#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tracklab/annotation.hpp"
#include "tracklab/geo.hpp"

namespace tracklab::store {

struct Project {
  std::int64_t id = 0;
  std::string name;
  LabelSet label_set;
  double created_at = 0.0;
  std::optional<geo::GeoPoint> airport;  // altitude is the field elevation
};

enum class SubjectKind { track, segment };

std::string_view to_string(SubjectKind kind);
SubjectKind subject_kind_from_string(std::string_view text);

/// Pipeline output attached to a subject that is a slice of a parent track.
struct SegmentInfo {
  std::string parent_track_id;
  std::size_t start_index = 0;  // inclusive, in the parent
  std::size_t end_index = 0;    // inclusive, in the parent
  std::optional<double> avg_direction_deg;
  std::string runway_id;  // empty when no runway could be assigned
  std::array<double, 5> feature{};
  bool contains_contact = false;
  bool climbs_out = false;

  friend bool operator==(const SegmentInfo&, const SegmentInfo&) = default;
};

struct TrackMeta {
  std::string track_id;
  std::int64_t project_id = 0;
  std::size_t num_points = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  std::size_t num_annotations = 0;
  SubjectKind kind = SubjectKind::track;
  std::optional<int> set_id;
  std::optional<SegmentInfo> segment;
};

struct StoredTrack {
  geo::Track track;
  std::optional<SegmentInfo> segment;
};

struct TrackRecord {
  geo::Track track;
  TrackMeta meta;
  std::vector<AnnotationRecord> annotations;  // current only, ordered by annotator id
};

struct BoundingBox {
  double min_lat = -90.0, max_lat = 90.0;
  double min_lon = -180.0, max_lon = 180.0;

  bool contains(const geo::GeoPoint& p) const {
    return p.latitude_deg >= min_lat && p.latitude_deg <= max_lat && p.longitude_deg >= min_lon &&
           p.longitude_deg <= max_lon;
  }
};

struct TimeRange {
  double start = 0.0;
  double end = 0.0;
};

/// Conjunction of optional filters. The annotation filters (label,
/// annotator, annotator_kind, verified) must all hold for one current
/// annotation of the subject. A bounding box matches when any point of the
/// subject lies inside it; a time range matches on overlap.
struct Query {
  std::optional<std::string> label;
  std::optional<std::string> annotator;  // "name" or "name:iteration"
  std::optional<AnnotatorKind> annotator_kind;
  std::optional<bool> verified;
  std::optional<std::string> runway_id;
  std::optional<BoundingBox> bbox;
  std::optional<TimeRange> time_range;
  std::optional<SubjectKind> kind;
  std::optional<int> set_id;
  std::optional<std::size_t> limit;
  std::size_t offset = 0;

  bool has_annotation_filter() const { return label || annotator || annotator_kind || verified; }
  void validate() const;
};

/// Predicate shared by the backends and the brute-force test oracle.
bool annotation_matches(const Query& q, const AnnotationRecord& a, const AnnotatorRecord& annotator);

enum class AuditAction {
  superseded,  // replaced by a newer label from the same annotator
  resolved,    // model label closed by a human verification
};

std::string_view to_string(AuditAction action);

struct AuditEntry {
  std::int64_t seq = 0;
  AnnotationRecord record;
  AuditAction action = AuditAction::superseded;
  double at = 0.0;
};

/// Persistence contract for projects, tracks, annotators, annotations and
/// workflow artifacts. Implementations must be safe to call from several
/// threads; writes to a project are serialized and each mutating call is
/// atomic.
///
/// Annotation semantics: one current record per (subject, annotator). A new
/// label from the same annotator supersedes the previous one. A human label
/// marks itself verified and resolves every current model label on the same
/// subject. Replaced and resolved records move to the audit log.
class Store {
 public:
  virtual ~Store() = default;

  virtual Project create_project(const std::string& name, const LabelSet& labels,
                                 std::optional<geo::GeoPoint> airport) = 0;
  virtual Project get_project(std::string_view name) const = 0;
  virtual std::vector<Project> list_projects() const = 0;

  /// Inserts or replaces. Replacing recomputes TrackMeta and keeps the set id
  /// and annotations.
  virtual std::size_t upsert_tracks(std::string_view project, std::span<const StoredTrack> tracks) = 0;
  virtual TrackRecord get_track(std::string_view project, std::string_view track_id) const = 0;
  virtual bool has_track(std::string_view project, std::string_view track_id) const = 0;
  virtual std::vector<TrackMeta> list_meta(std::string_view project, const Query& q) const = 0;
  virtual std::vector<std::string> query_tracks(std::string_view project, const Query& q) const = 0;
  /// Removes all subjects of the given kind, with their annotations.
  virtual std::size_t delete_subjects(std::string_view project, SubjectKind kind) = 0;
  virtual void assign_sets(std::string_view project, std::span<const std::pair<std::string, int>> sets) = 0;

  /// Finds the annotator with the same kind/name/iteration or creates it.
  virtual AnnotatorRecord register_annotator(const AnnotatorRecord& proto) = 0;
  virtual AnnotatorRecord get_annotator(std::int64_t id) const = 0;
  virtual std::vector<AnnotatorRecord> list_annotators() const = 0;

  virtual AnnotationRecord annotate(std::string_view project, std::string_view subject, std::string_view label,
                                    std::int64_t annotator_id) = 0;
  virtual std::size_t batch_annotate(std::string_view project, const Query& q, std::string_view label,
                                     std::int64_t annotator_id) = 0;
  /// Writes already validated records (for example from an external
  /// ingest) for one annotator in a single transaction.
  virtual std::size_t put_annotations(std::string_view project, std::int64_t annotator_id,
                                      std::span<const AnnotationRecord> records) = 0;
  /// Current annotations ordered by (subject, annotator name, iteration).
  virtual std::vector<AnnotationRecord> list_annotations(std::string_view project) const = 0;
  virtual std::vector<AuditEntry> audit_log(std::string_view project) const = 0;

  virtual void put_artifact(std::string_view project, std::string_view key, std::string_view value) = 0;
  virtual std::optional<std::string> get_artifact(std::string_view project, std::string_view key) const = 0;
  /// Artifacts whose key starts with prefix, ordered by key.
  virtual std::vector<std::pair<std::string, std::string>> list_artifacts(std::string_view project,
                                                                          std::string_view prefix) const = 0;

  /// Makes durable any buffered state. No-op for backends that write through.
  virtual void flush() {}

  /// Test hook: the n-th annotation write after this call throws a storage
  /// error inside the running transaction. Pass nullopt to disarm.
  void inject_write_failure(std::optional<std::size_t> after_writes);

 protected:
  /// Called by backends before every annotation row write.
  void count_write();

 private:
  std::atomic<std::int64_t> failure_countdown_{-1};
};

struct StorageConfig {
  std::string backend = "file";  // file | sqlite
  std::string path;              // empty: in memory
};

std::unique_ptr<Store> open_store(const StorageConfig& config);
std::unique_ptr<Store> make_memory_store(const std::string& path = {});
std::unique_ptr<Store> make_sqlite_store(const std::string& path = {});

enum class ExportFormat { csv, json };

inline constexpr std::string_view kExportCsvHeader =
    "subject_id,label,annotator_name,annotator_iteration,annotator_kind,verified,created_at";

/// One row per current annotation ordered by (subject, annotator).
std::string export_annotations(const Store& store, std::string_view project, ExportFormat format);

}  // namespace tracklab::store
