#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracklab/annotation.hpp"
#include "tracklab/geo.hpp"

namespace tracklab::ingest {

enum class TimeUnit { epoch_seconds, iso8601 };
enum class AltitudeUnit { meters, feet };

/// User-supplied description of a delimited track position file.
struct TrackFormatDescriptor {
  std::string format_name;
  char delimiter = ',';
  std::string timestamp_column;
  TimeUnit time_unit = TimeUnit::epoch_seconds;
  std::string latitude_column;
  std::string longitude_column;
  std::string altitude_column;
  AltitudeUnit altitude_unit = AltitudeUnit::meters;
  std::string track_id_column;
  std::vector<std::string> extra_columns;

  static constexpr std::size_t kRequiredRoles = 5;
  double altitude_scale() const { return altitude_unit == AltitudeUnit::feet ? geo::kMetersPerFoot : 1.0; }
};

TrackFormatDescriptor parse_format_descriptor(std::string_view yaml_text);
std::string to_yaml(const TrackFormatDescriptor& desc);

/// Reads `project` and `labels`; other keys are ignored.
LabelSet parse_label_set(std::string_view yaml_text);

struct AnnotationIngestDescriptor {
  std::string algorithm;
  std::string version;
  std::vector<std::string> labels;

  /// Throws validation if a label is missing from the project's set.
  void validate_against(const LabelSet& project_labels) const;
};

AnnotationIngestDescriptor parse_annotation_descriptor(std::string_view yaml_text);

struct FilterCriteria {
  geo::GeoPoint airport_ref;  // altitude_m is the airport elevation
  double radius_nm = 120.0;
  double agl_ceiling_ft = 1500.0;

  void validate() const;
};

struct RowError {
  std::size_t row = 0;  // 1-based data row, header excluded
  std::string message;
};

struct TrackParseResult {
  std::vector<geo::Track> tracks;  // sorted by track id
  std::size_t total_rows = 0;
  std::vector<RowError> rejected;
};

/// Fraction of malformed rows above which a file is refused.
inline constexpr double kMaxMalformedFraction = 0.10;

TrackParseResult parse_track_file(std::string_view bytes, const TrackFormatDescriptor& desc);

/// Inverse of parse_track_file for the mapped columns and extras.
std::string serialize_tracks(std::span<const geo::Track> tracks, const TrackFormatDescriptor& desc);

std::vector<geo::Track> apply_filter_criteria(std::span<const geo::Track> tracks, const FilterCriteria& criteria);

struct AnnotationRow {
  std::string subject;
  std::string label;
};

struct AnnotationIngestResult {
  AnnotatorRecord annotator;
  std::vector<AnnotationRecord> records;  // annotator_id unset until registered
  std::vector<RowError> errors;
};

using SubjectExists = std::function<bool(std::string_view)>;

AnnotationIngestResult ingest_external_annotations(std::span<const AnnotationRow> rows,
                                                   const AnnotationIngestDescriptor& desc,
                                                   const SubjectExists& subject_exists = {});

/// Reads a delimited annotation table with a header naming `subject_id` (or
/// `track_id`) and `label`. Any further columns are returned by name.
struct AnnotationTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::vector<AnnotationRow> subject_labels() const;
  std::size_t column(std::string_view name) const;
};
AnnotationTable parse_annotation_table(std::string_view bytes, char delimiter = ',');

std::vector<std::vector<std::string>> split_dataset(std::span<const std::string> ids, std::size_t n_sets,
                                                    std::uint64_t seed);

// Delimited-text helpers shared with the exporters.
std::vector<std::string> split_delimited(std::string_view line, char delimiter);
std::string quote_field(std::string_view field, char delimiter = ',');
std::vector<std::string_view> split_lines(std::string_view text);

double parse_iso8601(std::string_view text);
std::string format_iso8601(double epoch_seconds);

}  // namespace tracklab::ingest
