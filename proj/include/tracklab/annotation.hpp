#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracklab {

/// A project's label vocabulary, in display order.
struct LabelSet {
  std::string project_name;
  std::vector<std::string> labels;

  bool contains(std::string_view label) const;
  /// Throws validation on empty or duplicate names.
  void validate() const;
};

enum class AnnotatorKind { human, model };

std::string_view to_string(AnnotatorKind kind);
AnnotatorKind annotator_kind_from_string(std::string_view text);

struct AnnotatorRecord {
  std::int64_t id = 0;
  AnnotatorKind kind = AnnotatorKind::human;
  std::string name;
  // Model version, required for models.
  std::optional<std::string> iteration;
  // Human role, required for humans.
  std::optional<std::string> role;

  /// "name:iteration" for models, "name" for humans.
  std::string qualified_name() const;
  void validate() const;

  static AnnotatorRecord human(std::string name, std::string role);
  static AnnotatorRecord model(std::string name, std::string iteration);
};

struct AnnotatorRef {
  std::string name;
  std::optional<std::string> iteration;

  /// Parses "name" or "name:iteration".
  static AnnotatorRef parse(std::string_view text);
  bool matches(const AnnotatorRecord& annotator) const;
};

struct AnnotationRecord {
  std::int64_t id = 0;
  std::string subject;
  std::string label;
  std::int64_t annotator_id = 0;
  bool verified = false;
  double created_at = 0.0;
  // Non-zero when written by a batch operation; records from the same
  // batch_annotate call share the id.
  std::int64_t batch_id = 0;
};

/// Wall clock in seconds since epoch.
double now_seconds();

}  // namespace tracklab
