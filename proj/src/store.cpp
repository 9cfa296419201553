#include "tracklab/store.hpp"

#include <fmt/format.h>

#include "tracklab/error.hpp"

namespace tracklab::store {

std::string_view to_string(SubjectKind kind) { return kind == SubjectKind::track ? "track" : "segment"; }

SubjectKind subject_kind_from_string(std::string_view text) {
  if (text == "track") return SubjectKind::track;
  if (text == "segment") return SubjectKind::segment;
  fail(ErrorCode::validation, fmt::format("unknown subject kind '{}'", text));
}

std::string_view to_string(AuditAction action) {
  return action == AuditAction::superseded ? "superseded" : "resolved";
}

void Query::validate() const {
  if (limit && *limit < 1) fail(ErrorCode::validation, "query limit must be at least 1");
  if (bbox && (bbox->min_lat > bbox->max_lat || bbox->min_lon > bbox->max_lon)) {
    fail(ErrorCode::validation, "query bounding box is inverted");
  }
  if (time_range && time_range->start > time_range->end) {
    fail(ErrorCode::validation, "query time range is inverted");
  }
}

bool annotation_matches(const Query& q, const AnnotationRecord& a, const AnnotatorRecord& annotator) {
  if (q.label && a.label != *q.label) return false;
  if (q.verified && a.verified != *q.verified) return false;
  if (q.annotator_kind && annotator.kind != *q.annotator_kind) return false;
  if (q.annotator && !AnnotatorRef::parse(*q.annotator).matches(annotator)) return false;
  return true;
}

void Store::inject_write_failure(std::optional<std::size_t> after_writes) {
  failure_countdown_ = after_writes ? static_cast<std::int64_t>(*after_writes) : -1;
}

void Store::count_write() {
  std::int64_t current = failure_countdown_.load();
  while (current >= 0) {
    if (current == 0) {
      failure_countdown_ = -1;
      fail(ErrorCode::storage, "injected storage failure");
    }
    if (failure_countdown_.compare_exchange_weak(current, current - 1)) return;
  }
}

std::unique_ptr<Store> open_store(const StorageConfig& config) {
  if (config.backend == "file" || config.backend == "memory") return make_memory_store(config.path);
  if (config.backend == "sqlite") return make_sqlite_store(config.path);
  fail(ErrorCode::validation, fmt::format("unknown storage backend '{}'", config.backend));
}

}  // namespace tracklab::store
