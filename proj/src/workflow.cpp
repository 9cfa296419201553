#include "tracklab/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "tracklab/error.hpp"

namespace tracklab::workflow {

using nlohmann::json;
using store::Query;
using store::Store;
using store::SubjectKind;

double effort_reduction(std::size_t single_annotations, std::size_t batch_ops, std::size_t total) {
  if (total == 0) fail(ErrorCode::invalid_argument, "effort reduction needs at least one track");
  const double r = 1.0 - static_cast<double>(single_annotations + batch_ops) / static_cast<double>(total);
  return std::max(0.0, r);
}

long to_percent(double fraction) { return std::lround(100.0 * fraction); }

// ---------------------------------------------------------------------------

namespace {

std::mutex& locks_mutex() {
  static std::mutex mu;
  return mu;
}

std::set<std::string>& held_locks() {
  static std::set<std::string> held;
  return held;
}

}  // namespace

WorkflowLock::WorkflowLock(std::string project) : project_(std::move(project)) {
  std::lock_guard lock(locks_mutex());
  if (!held_locks().insert(project_).second) {
    fail(ErrorCode::conflict, fmt::format("a workflow run is already in progress for project '{}'", project_));
  }
}

WorkflowLock::~WorkflowLock() {
  std::lock_guard lock(locks_mutex());
  held_locks().erase(project_);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<store::TrackMeta> set_members(const Store& s, std::string_view project, int set_id) {
  Query q;
  q.kind = SubjectKind::segment;
  q.set_id = set_id;
  return s.list_meta(project, q);
}

std::optional<AnnotatorRecord> find_annotator(const Store& s, std::string_view ref) {
  const auto parsed = AnnotatorRef::parse(ref);
  for (const auto& a : s.list_annotators()) {
    if (a.kind == AnnotatorKind::model && a.name == parsed.name && a.iteration == parsed.iteration) return a;
  }
  return std::nullopt;
}

// Latest current human label per subject.
std::map<std::string, std::string> human_labels(const Store& s, std::string_view project) {
  std::map<std::int64_t, bool> is_human;
  for (const auto& a : s.list_annotators()) is_human[a.id] = a.kind == AnnotatorKind::human;
  std::map<std::string, std::pair<double, std::string>> latest;
  for (const auto& r : s.list_annotations(project)) {
    if (!is_human[r.annotator_id]) continue;
    auto& slot = latest[r.subject];
    if (slot.second.empty() || r.created_at >= slot.first) slot = {r.created_at, r.label};
  }
  std::map<std::string, std::string> out;
  for (auto& [subject, v] : latest) out.emplace(subject, std::move(v.second));
  return out;
}

std::string model_key(std::string_view ref) { return fmt::format("model/{}", ref); }
std::string cycle_key(int set_id) { return fmt::format("cycle/{:04d}", set_id); }

void clear_prefix(Store& s, std::string_view project, std::string_view prefix) {
  for (const auto& [key, value] : s.list_artifacts(project, prefix)) {
    if (!value.empty()) s.put_artifact(project, key, "");
  }
}

std::vector<pipeline::Runway> runways_from_json(const json& j) {
  std::vector<pipeline::Runway> out;
  for (const auto& r : j) {
    pipeline::Runway rw;
    rw.id = r.at("id").get<std::string>();
    rw.centroid.latitude_deg = r.at("latitude").get<double>();
    rw.centroid.longitude_deg = r.at("longitude").get<double>();
    rw.centroid.altitude_m = r.at("elevation_m").get<double>();
    rw.heading_deg = r.at("heading_deg").get<double>();
    rw.length_m = r.at("length_m").get<double>();
    rw.support = r.at("support").get<std::size_t>();
    out.push_back(rw);
  }
  return out;
}

json runways_to_json(const std::vector<pipeline::Runway>& runways) {
  json out = json::array();
  for (const auto& rw : runways) {
    out.push_back({{"id", rw.id},
                   {"latitude", rw.centroid.latitude_deg},
                   {"longitude", rw.centroid.longitude_deg},
                   {"elevation_m", rw.centroid.altitude_m},
                   {"heading_deg", rw.heading_deg},
                   {"length_m", rw.length_m},
                   {"support", rw.support}});
  }
  return out;
}

std::string train_unlocked(Store& s, std::string_view project, std::string_view algorithm,
                           const std::vector<int>& sets, const Settings& settings) {
  const auto proj = s.get_project(project);
  if (sets.empty()) fail(ErrorCode::invalid_argument, "training needs at least one set");
  std::vector<ml::FeatureVector> features;
  std::vector<std::string> labels;
  const auto humans = algorithm == "svm" ? human_labels(s, project) : std::map<std::string, std::string>{};
  for (const int set : sets) {
    for (const auto& m : set_members(s, project, set)) {
      if (algorithm == "svm") {
        const auto it = humans.find(m.track_id);
        if (it == humans.end()) continue;
        labels.push_back(it->second);
      }
      features.push_back(m.segment->feature);
    }
  }
  if (features.empty()) {
    fail(ErrorCode::validation, algorithm == "svm" ? "the training sets have no verified labels"
                                                   : "the training sets have no segments");
  }

  const std::string prefix = fmt::format("model/{}:v", algorithm);
  const int version = static_cast<int>(s.list_artifacts(project, prefix).size()) + (algorithm == "svm" ? 1 : 0);
  const std::string iteration = fmt::format("v{}", version);
  const std::string ref = fmt::format("{}:{}", algorithm, iteration);

  json doc;
  if (algorithm == "kmeans") {
    const auto init = ml::nominal_kmeans_init();
    for (const auto& c : init.class_names) {
      if (!proj.label_set.contains(c)) {
        fail(ErrorCode::validation, fmt::format("kmeans class '{}' is not in the project label set", c));
      }
    }
    doc = json::parse(ml::to_json(ml::kmeans_fit(features, init, settings.ml.kmeans), now_seconds()));
  } else if (algorithm == "svm") {
    doc = json::parse(ml::to_json(ml::svm_train(features, labels, settings.ml.svm, proj.label_set.labels),
                                  now_seconds()));
  } else {
    fail(ErrorCode::validation, fmt::format("unknown algorithm '{}'", algorithm));
  }
  doc["training_sets"] = sets;
  s.put_artifact(project, model_key(ref), doc.dump());
  s.register_annotator(AnnotatorRecord::model(std::string(algorithm), iteration));
  return ref;
}

std::size_t infer_unlocked(Store& s, std::string_view project, std::string_view model_ref, int set_id) {
  const auto model = load_model(s, project, model_ref);
  const auto members = set_members(s, project, set_id);
  if (members.empty()) fail(ErrorCode::validation, fmt::format("set {} has no segments", set_id));
  const auto ref = AnnotatorRef::parse(model_ref);
  const auto annotator = s.register_annotator(AnnotatorRecord::model(ref.name, ref.iteration.value_or("")));
  std::vector<AnnotationRecord> records;
  const double at = now_seconds();
  for (const auto& m : members) {
    AnnotationRecord r;
    r.subject = m.track_id;
    r.label = ml::predict(model, m.segment->feature);
    r.annotator_id = annotator.id;
    r.created_at = at;
    records.push_back(std::move(r));
  }
  const auto n = s.put_annotations(project, annotator.id, records);

  const auto existing = s.get_artifact(project, cycle_key(set_id));
  int cycle = 0;
  if (existing && !existing->empty()) {
    cycle = json::parse(*existing).at("cycle").get<int>();
  } else {
    cycle = static_cast<int>(list_cycles(s, project).size()) + 1;
  }
  s.put_artifact(project, cycle_key(set_id),
                 json{{"cycle", cycle}, {"set_id", set_id}, {"model_ref", std::string(model_ref)}}.dump());
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------

IngestSummary ingest_tracks(Store& s, std::string_view project, std::string_view bytes,
                            const ingest::TrackFormatDescriptor& desc) {
  s.get_project(project);
  auto parsed = ingest::parse_track_file(bytes, desc);
  IngestSummary out;
  out.rows = parsed.total_rows;
  out.rejected_rows = parsed.rejected.size();
  out.errors = std::move(parsed.rejected);
  auto tracks = std::move(parsed.tracks);
  if (const auto filter = config::project_filter(s, project)) tracks = ingest::apply_filter_criteria(tracks, *filter);
  std::vector<store::StoredTrack> stored;
  for (auto& t : tracks) {
    if (t.points.size() < 2) continue;
    stored.push_back({std::move(t), std::nullopt});
  }
  out.tracks = s.upsert_tracks(project, stored);
  return out;
}

PipelineSummary run_pipeline(Store& s, std::string_view project, const Settings& settings) {
  WorkflowLock lock{std::string(project)};
  const auto proj = s.get_project(project);
  if (!proj.airport) fail(ErrorCode::validation, fmt::format("project '{}' has no airport reference", project));
  Query q;
  q.kind = SubjectKind::track;
  const auto ids = s.query_tracks(project, q);
  if (ids.empty()) fail(ErrorCode::validation, fmt::format("project '{}' has no tracks", project));
  std::vector<geo::Track> tracks;
  tracks.reserve(ids.size());
  for (const auto& id : ids) tracks.push_back(s.get_track(project, id).track);

  const auto& cfg = settings.pipeline;
  PipelineSummary out;
  out.tracks = tracks.size();
  out.runways = pipeline::detect_runways(tracks, *proj.airport, cfg);

  std::vector<store::StoredTrack> segments;
  for (const auto& t : tracks) {
    for (const auto& seg : pipeline::segment_track(t, *proj.airport, out.runways, cfg)) {
      store::SegmentInfo info;
      info.parent_track_id = t.track_id;
      info.start_index = seg.start_index;
      info.end_index = seg.end_index;
      info.avg_direction_deg = seg.avg_direction_deg;
      info.runway_id = seg.runway_id.value_or("");
      info.feature = seg.feature;
      info.contains_contact = seg.contains_contact;
      info.climbs_out = seg.climbs_out;
      segments.push_back({t.slice(seg.start_index, seg.end_index, seg.segment_id), info});
    }
  }
  if (segments.size() < static_cast<std::size_t>(settings.ml.n_sets)) {
    fail(ErrorCode::validation,
         fmt::format("{} segments cannot be split into {} sets", segments.size(), settings.ml.n_sets));
  }

  s.delete_subjects(project, SubjectKind::segment);
  clear_prefix(s, project, "cycle/");
  clear_prefix(s, project, "metrics/");
  s.upsert_tracks(project, segments);
  s.put_artifact(project, "runways", runways_to_json(out.runways).dump());

  std::vector<std::string> seg_ids;
  for (const auto& seg : segments) seg_ids.push_back(seg.track.track_id);
  const auto split = ingest::split_dataset(seg_ids, static_cast<std::size_t>(settings.ml.n_sets), settings.ml.split_seed);
  std::vector<std::pair<std::string, int>> assignment;
  for (std::size_t k = 0; k < split.size(); ++k) {
    out.set_sizes.push_back(split[k].size());
    for (const auto& id : split[k]) assignment.emplace_back(id, static_cast<int>(k + 1));
  }
  s.assign_sets(project, assignment);
  out.segments = segments.size();
  return out;
}

std::vector<pipeline::Runway> stored_runways(const Store& s, std::string_view project) {
  const auto text = s.get_artifact(project, "runways");
  if (!text) return {};
  return runways_from_json(json::parse(*text));
}

std::string train_model(Store& s, std::string_view project, std::string_view algorithm, const std::vector<int>& sets,
                        const Settings& settings) {
  WorkflowLock lock{std::string(project)};
  return train_unlocked(s, project, algorithm, sets, settings);
}

ml::Model load_model(const Store& s, std::string_view project, std::string_view model_ref) {
  const auto text = s.get_artifact(project, model_key(model_ref));
  if (!text) fail(ErrorCode::not_found, fmt::format("unknown model '{}'", model_ref));
  return ml::model_from_json(*text);
}

std::vector<int> model_training_sets(const Store& s, std::string_view project, std::string_view model_ref) {
  const auto text = s.get_artifact(project, model_key(model_ref));
  if (!text) fail(ErrorCode::not_found, fmt::format("unknown model '{}'", model_ref));
  return json::parse(*text).at("training_sets").get<std::vector<int>>();
}

std::vector<std::string> list_models(const Store& s, std::string_view project) {
  std::vector<std::string> out;
  for (const auto& [key, value] : s.list_artifacts(project, "model/")) out.push_back(key.substr(6));
  return out;
}

std::size_t infer(Store& s, std::string_view project, std::string_view model_ref, int set_id) {
  WorkflowLock lock{std::string(project)};
  return infer_unlocked(s, project, model_ref, set_id);
}

std::string bootstrap_cycle(Store& s, std::string_view project, int set_id, const Settings& settings) {
  WorkflowLock lock{std::string(project)};
  if (set_members(s, project, set_id).empty()) fail(ErrorCode::validation, fmt::format("set {} is empty", set_id));
  const auto ref = train_unlocked(s, project, "kmeans", {set_id}, settings);
  infer_unlocked(s, project, ref, set_id);
  return ref;
}

// ---------------------------------------------------------------------------

OracleVerifier::OracleVerifier(std::vector<synth::TruthSegment> truth, std::string name) : name_(std::move(name)) {
  for (auto& t : truth) truth_[t.track_id].push_back(std::move(t));
}

AnnotatorRecord OracleVerifier::annotator() const { return AnnotatorRecord::human(name_, "verifier"); }

std::string OracleVerifier::true_label(const store::TrackMeta& subject) const {
  const std::string parent = subject.segment ? subject.segment->parent_track_id : subject.track_id;
  // Filtering may have split a track into runs named id_r{k}.
  auto it = truth_.find(parent);
  if (it == truth_.end()) {
    const auto cut = parent.rfind("_r");
    if (cut != std::string::npos) it = truth_.find(parent.substr(0, cut));
  }
  if (it == truth_.end()) fail(ErrorCode::not_found, fmt::format("no truth for track '{}'", parent));
  const synth::TruthSegment* best = nullptr;
  double best_overlap = -1.0;
  for (const auto& t : it->second) {
    const double overlap = std::min(t.end_time, subject.end_time) - std::max(t.start_time, subject.start_time);
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = &t;
    }
  }
  return best->label;
}

VerifyCounts verify_cycle(Store& s, std::string_view project, int set_id, const Verifier& verifier) {
  WorkflowLock lock{std::string(project)};
  const auto proj = s.get_project(project);
  const auto cycle_text = s.get_artifact(project, cycle_key(set_id));
  if (!cycle_text || cycle_text->empty()) {
    fail(ErrorCode::validation, fmt::format("set {} has no model annotations to verify", set_id));
  }
  const auto model_ref = json::parse(*cycle_text).at("model_ref").get<std::string>();
  const auto model = find_annotator(s, model_ref);
  if (!model) fail(ErrorCode::validation, fmt::format("model annotator '{}' is not registered", model_ref));

  const auto members = set_members(s, project, set_id);
  std::map<std::string, std::string> prelabels;
  for (const auto& r : s.list_annotations(project)) {
    if (r.annotator_id == model->id && !r.verified) prelabels[r.subject] = r.label;
  }
  std::size_t pending = 0;
  for (const auto& m : members) pending += prelabels.count(m.track_id);
  if (pending == 0) fail(ErrorCode::validation, fmt::format("set {} has no model annotations to verify", set_id));

  const auto human = s.register_annotator(verifier.annotator());
  VerifyCounts counts;
  std::set<std::string> runways;
  for (const auto& m : members) {
    runways.insert(m.segment ? m.segment->runway_id : std::string());
    const auto it = prelabels.find(m.track_id);
    if (it == prelabels.end()) continue;
    const auto truth = verifier.true_label(m);
    if (truth != it->second) {
      s.annotate(project, m.track_id, truth, human.id);
      ++counts.misclassified;
    }
  }
  for (const auto& runway : runways) {
    for (const auto& label : proj.label_set.labels) {
      Query q;
      q.kind = SubjectKind::segment;
      q.set_id = set_id;
      q.runway_id = runway;
      q.label = label;
      q.annotator = model_ref;
      q.verified = false;
      if (s.batch_annotate(project, q, label, human.id) > 0) ++counts.batch_ops;
    }
  }
  return counts;
}

// ---------------------------------------------------------------------------

ml::EvalReport evaluate_on(Store& s, std::string_view project, std::string_view model_ref, int validation_set) {
  WorkflowLock lock{std::string(project)};
  const auto proj = s.get_project(project);
  const auto model = load_model(s, project, model_ref);
  const auto trained = model_training_sets(s, project, model_ref);
  if (std::find(trained.begin(), trained.end(), validation_set) != trained.end()) {
    fail(ErrorCode::invalid_argument,
         fmt::format("model '{}' was trained on set {}; pick a held-out set", model_ref, validation_set));
  }
  const auto humans = human_labels(s, project);
  std::vector<std::string> predicted, truth;
  for (const auto& m : set_members(s, project, validation_set)) {
    const auto it = humans.find(m.track_id);
    if (it == humans.end()) continue;
    truth.push_back(it->second);
    predicted.push_back(ml::predict(model, m.segment->feature));
  }
  if (truth.empty()) fail(ErrorCode::validation, fmt::format("set {} has no verified labels", validation_set));
  auto report = ml::evaluate(predicted, truth, proj.label_set.labels);
  auto doc = json::parse(ml::to_json(report));
  doc["set_id"] = validation_set;
  s.put_artifact(project, fmt::format("metrics/{}", model_ref), doc.dump());
  return report;
}

std::optional<ml::EvalReport> stored_metrics(const Store& s, std::string_view project, std::string_view model_ref) {
  const auto text = s.get_artifact(project, fmt::format("metrics/{}", model_ref));
  if (!text || text->empty()) return std::nullopt;
  return ml::eval_report_from_json(*text);
}

ml::EvalReport evaluate_prelabels(const Store& s, std::string_view project, std::string_view model_ref, int set_id) {
  const auto proj = s.get_project(project);
  const auto model = find_annotator(s, model_ref);
  if (!model) fail(ErrorCode::not_found, fmt::format("unknown model '{}'", model_ref));
  std::map<std::string, std::string> prelabels;
  for (const auto& e : s.audit_log(project)) {
    if (e.record.annotator_id == model->id && e.action == store::AuditAction::resolved) {
      prelabels[e.record.subject] = e.record.label;
    }
  }
  for (const auto& r : s.list_annotations(project)) {
    if (r.annotator_id == model->id) prelabels[r.subject] = r.label;
  }
  const auto humans = human_labels(s, project);
  std::vector<std::string> predicted, truth;
  for (const auto& m : set_members(s, project, set_id)) {
    const auto p = prelabels.find(m.track_id);
    const auto h = humans.find(m.track_id);
    if (p == prelabels.end() || h == humans.end()) continue;
    predicted.push_back(p->second);
    truth.push_back(h->second);
  }
  if (truth.empty()) fail(ErrorCode::validation, fmt::format("set {} has no verified pre-labels", set_id));
  return ml::evaluate(predicted, truth, proj.label_set.labels);
}

std::vector<CycleRecord> list_cycles(const Store& s, std::string_view project) {
  std::vector<CycleRecord> out;
  for (const auto& [key, value] : s.list_artifacts(project, "cycle/")) {
    if (value.empty()) continue;
    const auto j = json::parse(value);
    out.push_back({j.at("cycle").get<int>(), j.at("set_id").get<int>(), j.at("model_ref").get<std::string>()});
  }
  std::sort(out.begin(), out.end(), [](const CycleRecord& a, const CycleRecord& b) { return a.cycle < b.cycle; });
  return out;
}

std::vector<EffortRow> effort_report(const Store& s, std::string_view project, int validation_set) {
  std::map<std::int64_t, bool> is_human;
  for (const auto& a : s.list_annotators()) is_human[a.id] = a.kind == AnnotatorKind::human;
  const auto annotations = s.list_annotations(project);
  std::vector<EffortRow> out;
  for (const auto& c : list_cycles(s, project)) {
    if (c.set_id == validation_set) continue;
    std::set<std::string> members;
    for (const auto& m : set_members(s, project, c.set_id)) members.insert(m.track_id);
    EffortRow row;
    row.cycle = c.cycle;
    row.set_id = c.set_id;
    row.model_ref = c.model_ref;
    row.num_tracks = members.size();
    std::set<std::int64_t> batches;
    for (const auto& r : annotations) {
      if (!is_human[r.annotator_id] || !members.count(r.subject)) continue;
      if (r.batch_id == 0) {
        ++row.misclassified;
      } else {
        batches.insert(r.batch_id);
      }
    }
    row.annotation_effort = row.misclassified + batches.size();
    row.effort_reduction = row.num_tracks ? effort_reduction(row.misclassified, batches.size(), row.num_tracks) : 0.0;
    out.push_back(row);
  }
  return out;
}

std::string effort_csv(const std::vector<EffortRow>& rows) {
  std::string out = std::string(kEffortCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", r.cycle, r.num_tracks, r.misclassified, r.annotation_effort,
                       to_percent(r.effort_reduction));
  }
  return out;
}

std::string effort_json(const std::vector<EffortRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"cycle", r.cycle},
                   {"set_id", r.set_id},
                   {"model", r.model_ref},
                   {"num_tracks", r.num_tracks},
                   {"misclassified", r.misclassified},
                   {"annotation_effort", r.annotation_effort},
                   {"effort_reduction", r.effort_reduction},
                   {"effort_reduction_pct", to_percent(r.effort_reduction)}});
  }
  return json{{"cycles", out}}.dump();
}

}  // namespace tracklab::workflow
