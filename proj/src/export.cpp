#include <map>
#include <sstream>

#include <json.hpp>

#include "tracklab/ingest.hpp"
#include "tracklab/store.hpp"

namespace tracklab::store {

std::string export_annotations(const Store& store, std::string_view project, ExportFormat format) {
  store.get_project(project);
  std::map<std::int64_t, AnnotatorRecord> annotators;
  for (auto& a : store.list_annotators()) annotators.emplace(a.id, std::move(a));
  const auto records = store.list_annotations(project);

  if (format == ExportFormat::json) {
    auto rows = nlohmann::json::array();
    for (const auto& r : records) {
      const auto& who = annotators.at(r.annotator_id);
      rows.push_back({{"subject_id", r.subject},
                      {"label", r.label},
                      {"annotator_name", who.name},
                      {"annotator_iteration", who.iteration ? nlohmann::json(*who.iteration) : nlohmann::json()},
                      {"annotator_kind", to_string(who.kind)},
                      {"verified", r.verified},
                      {"created_at", ingest::format_iso8601(r.created_at)}});
    }
    return rows.dump(2) + "\n";
  }

  std::ostringstream out;
  out << kExportCsvHeader << '\n';
  for (const auto& r : records) {
    const auto& who = annotators.at(r.annotator_id);
    out << ingest::quote_field(r.subject) << ',' << ingest::quote_field(r.label) << ','
        << ingest::quote_field(who.name) << ',' << ingest::quote_field(who.iteration.value_or("")) << ','
        << to_string(who.kind) << ',' << (r.verified ? "true" : "false") << ','
        << ingest::format_iso8601(r.created_at) << '\n';
  }
  return out.str();
}

}  // namespace tracklab::store
