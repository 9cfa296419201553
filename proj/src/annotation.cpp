#include "tracklab/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include <fmt/format.h>

#include "tracklab/error.hpp"

namespace tracklab {

bool LabelSet::contains(std::string_view label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

void LabelSet::validate() const {
  if (labels.empty()) fail(ErrorCode::validation, "label set is empty");
  std::set<std::string_view> seen;
  for (const auto& label : labels) {
    if (label.empty()) fail(ErrorCode::validation, "label name is empty");
    if (!seen.insert(label).second) {
      fail(ErrorCode::validation, fmt::format("duplicate label '{}'", label));
    }
  }
}

std::string_view to_string(AnnotatorKind kind) {
  return kind == AnnotatorKind::human ? "human" : "model";
}

AnnotatorKind annotator_kind_from_string(std::string_view text) {
  if (text == "human") return AnnotatorKind::human;
  if (text == "model") return AnnotatorKind::model;
  fail(ErrorCode::validation, fmt::format("unknown annotator kind '{}'", text));
}

std::string AnnotatorRecord::qualified_name() const {
  if (kind == AnnotatorKind::model && iteration) return name + ":" + *iteration;
  return name;
}

void AnnotatorRecord::validate() const {
  if (name.empty()) fail(ErrorCode::validation, "annotator name is empty");
  if (kind == AnnotatorKind::model && (!iteration || iteration->empty())) {
    fail(ErrorCode::validation, fmt::format("model annotator '{}' needs an iteration", name));
  }
  if (kind == AnnotatorKind::human && (!role || role->empty())) {
    fail(ErrorCode::validation, fmt::format("human annotator '{}' needs a role", name));
  }
}

AnnotatorRecord AnnotatorRecord::human(std::string name, std::string role) {
  AnnotatorRecord a;
  a.kind = AnnotatorKind::human;
  a.name = std::move(name);
  a.role = std::move(role);
  return a;
}

AnnotatorRecord AnnotatorRecord::model(std::string name, std::string iteration) {
  AnnotatorRecord a;
  a.kind = AnnotatorKind::model;
  a.name = std::move(name);
  a.iteration = std::move(iteration);
  return a;
}

AnnotatorRef AnnotatorRef::parse(std::string_view text) {
  AnnotatorRef ref;
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    ref.name = std::string(text);
  } else {
    ref.name = std::string(text.substr(0, colon));
    ref.iteration = std::string(text.substr(colon + 1));
  }
  return ref;
}

bool AnnotatorRef::matches(const AnnotatorRecord& annotator) const {
  if (annotator.name != name) return false;
  if (iteration) return annotator.iteration && *annotator.iteration == *iteration;
  return true;
}

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

}  // namespace tracklab
