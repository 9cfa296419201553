// In-process store with optional JSON file persistence.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>

#include <json.hpp>

#include "store_internal.hpp"

namespace tracklab::store {

namespace {

using nlohmann::json;

json to_json(const geo::Track& t) {
  json points = json::array();
  for (const auto& p : t.points) {
    points.push_back({p.timestamp_s, p.geo.latitude_deg, p.geo.longitude_deg, p.geo.altitude_m});
  }
  json extras = json::object();
  for (const auto& [name, column] : t.extras) {
    json values = json::array();
    for (const auto& v : column) {
      if (const double* d = std::get_if<double>(&v)) {
        values.push_back(*d);
      } else {
        values.push_back(std::get<std::string>(v));
      }
    }
    extras[name] = std::move(values);
  }
  return {{"id", t.track_id}, {"points", std::move(points)}, {"extras", std::move(extras)}};
}

geo::Track track_from_json(const json& j) {
  geo::Track t;
  t.track_id = j.at("id").get<std::string>();
  for (const auto& p : j.at("points")) {
    geo::TrackPoint tp;
    tp.timestamp_s = p.at(0).get<double>();
    tp.geo = {p.at(1).get<double>(), p.at(2).get<double>(), p.at(3).get<double>()};
    tp.track_id = t.track_id;
    t.points.push_back(std::move(tp));
  }
  for (const auto& [name, values] : j.at("extras").items()) {
    auto& column = t.extras[name];
    for (const auto& v : values) {
      if (v.is_number()) {
        column.emplace_back(v.get<double>());
      } else {
        column.emplace_back(v.get<std::string>());
      }
    }
  }
  return t;
}

json to_json(const SegmentInfo& s) {
  json j = {{"parent", s.parent_track_id},       {"start", s.start_index},        {"end", s.end_index},
            {"runway", s.runway_id},             {"feature", s.feature},          {"contact", s.contains_contact},
            {"climbs_out", s.climbs_out}};
  if (s.avg_direction_deg) j["direction"] = *s.avg_direction_deg;
  return j;
}

SegmentInfo segment_from_json(const json& j) {
  SegmentInfo s;
  s.parent_track_id = j.at("parent").get<std::string>();
  s.start_index = j.at("start").get<std::size_t>();
  s.end_index = j.at("end").get<std::size_t>();
  s.runway_id = j.at("runway").get<std::string>();
  s.feature = j.at("feature").get<std::array<double, 5>>();
  s.contains_contact = j.at("contact").get<bool>();
  s.climbs_out = j.at("climbs_out").get<bool>();
  if (j.contains("direction")) s.avg_direction_deg = j.at("direction").get<double>();
  return s;
}

json to_json(const AnnotationRecord& a) {
  return {{"id", a.id},           {"subject", a.subject},       {"label", a.label}, {"annotator", a.annotator_id},
          {"verified", a.verified}, {"created_at", a.created_at}, {"batch", a.batch_id}};
}

AnnotationRecord annotation_from_json(const json& j) {
  AnnotationRecord a;
  a.id = j.at("id").get<std::int64_t>();
  a.subject = j.at("subject").get<std::string>();
  a.label = j.at("label").get<std::string>();
  a.annotator_id = j.at("annotator").get<std::int64_t>();
  a.verified = j.at("verified").get<bool>();
  a.created_at = j.at("created_at").get<double>();
  a.batch_id = j.at("batch").get<std::int64_t>();
  return a;
}

class MemoryStore final : public Store {
 public:
  explicit MemoryStore(std::string path) : path_(std::move(path)) {
    if (!path_.empty() && std::filesystem::exists(path_)) load();
  }

  ~MemoryStore() override {
    try {
      flush();
    } catch (...) {
    }
  }

  Project create_project(const std::string& name, const LabelSet& labels,
                         std::optional<geo::GeoPoint> airport) override {
    labels.validate();
    if (name.empty()) fail(ErrorCode::validation, "project name is empty");
    if (airport && !airport->valid()) fail(ErrorCode::validation, "airport reference is invalid");
    std::unique_lock lock(mu_);
    if (projects_.count(name)) fail(ErrorCode::conflict, fmt::format("project '{}' already exists", name));
    ProjectData data;
    data.project = {next_project_id_++, name, labels, now_seconds(), airport};
    data.project.label_set.project_name = name;
    projects_.emplace(name, data);
    dirty_ = true;
    return data.project;
  }

  Project get_project(std::string_view name) const override {
    std::shared_lock lock(mu_);
    return project(name).project;
  }

  std::vector<Project> list_projects() const override {
    std::shared_lock lock(mu_);
    std::vector<Project> out;
    for (const auto& [_, p] : projects_) out.push_back(p.project);
    return out;
  }

  std::size_t upsert_tracks(std::string_view name, std::span<const StoredTrack> tracks) override {
    std::unique_lock lock(mu_);
    auto& p = project(name);
    std::vector<TrackEntry> staged;
    staged.reserve(tracks.size());
    for (const auto& t : tracks) staged.push_back({t.track, detail::compute_meta(t, p.project.id)});
    for (auto& entry : staged) {
      const std::string id = entry.meta.track_id;
      auto it = p.tracks.find(id);
      if (it != p.tracks.end()) {
        entry.meta.set_id = it->second.meta.set_id;
        entry.meta.num_annotations = it->second.meta.num_annotations;
        it->second = std::move(entry);
      } else {
        p.tracks.emplace(id, std::move(entry));
      }
    }
    dirty_ = true;
    return tracks.size();
  }

  TrackRecord get_track(std::string_view name, std::string_view track_id) const override {
    std::shared_lock lock(mu_);
    const auto& p = project(name);
    const auto& entry = track(p, track_id);
    TrackRecord rec{entry.track, entry.meta, {}};
    for (auto it = p.current.lower_bound({std::string(track_id), 0});
         it != p.current.end() && it->first.first == track_id; ++it) {
      rec.annotations.push_back(it->second);
    }
    return rec;
  }

  bool has_track(std::string_view name, std::string_view track_id) const override {
    std::shared_lock lock(mu_);
    const auto& p = project(name);
    return p.tracks.find(std::string(track_id)) != p.tracks.end();
  }

  std::vector<TrackMeta> list_meta(std::string_view name, const Query& q) const override {
    std::shared_lock lock(mu_);
    const auto& p = project(name);
    std::vector<TrackMeta> out;
    for (const auto& id : query_locked(p, q)) out.push_back(p.tracks.at(id).meta);
    return out;
  }

  std::vector<std::string> query_tracks(std::string_view name, const Query& q) const override {
    std::shared_lock lock(mu_);
    return query_locked(project(name), q);
  }

  std::size_t delete_subjects(std::string_view name, SubjectKind kind) override {
    std::unique_lock lock(mu_);
    auto& p = project(name);
    std::size_t removed = 0;
    for (auto it = p.tracks.begin(); it != p.tracks.end();) {
      if (it->second.meta.kind == kind) {
        const std::string id = it->first;
        for (auto a = p.current.lower_bound({id, 0}); a != p.current.end() && a->first.first == id;) {
          a = p.current.erase(a);
        }
        it = p.tracks.erase(it);
        ++removed;
      } else {
        ++it;
      }
    }
    dirty_ = true;
    return removed;
  }

  void assign_sets(std::string_view name, std::span<const std::pair<std::string, int>> sets) override {
    std::unique_lock lock(mu_);
    auto& p = project(name);
    for (const auto& [id, _] : sets) track(p, id);
    for (const auto& [id, set] : sets) p.tracks.at(id).meta.set_id = set;
    dirty_ = true;
  }

  AnnotatorRecord register_annotator(const AnnotatorRecord& proto) override {
    proto.validate();
    std::unique_lock lock(mu_);
    for (const auto& a : annotators_) {
      if (a.kind == proto.kind && a.name == proto.name && a.iteration == proto.iteration) return a;
    }
    AnnotatorRecord a = proto;
    a.id = static_cast<std::int64_t>(annotators_.size()) + 1;
    annotators_.push_back(a);
    dirty_ = true;
    return a;
  }

  AnnotatorRecord get_annotator(std::int64_t id) const override {
    std::shared_lock lock(mu_);
    return annotator(id);
  }

  std::vector<AnnotatorRecord> list_annotators() const override {
    std::shared_lock lock(mu_);
    return annotators_;
  }

  AnnotationRecord annotate(std::string_view name, std::string_view subject, std::string_view label,
                            std::int64_t annotator_id) override {
    std::unique_lock lock(mu_);
    auto& p = project(name);
    track(p, subject);
    detail::check_label(p.project, label);
    const auto& who = annotator(annotator_id);
    Plan plan;
    stage(p, plan, std::string(subject), std::string(label), who, 0, now_seconds());
    return commit(p, plan).front();
  }

  std::size_t batch_annotate(std::string_view name, const Query& q, std::string_view label,
                             std::int64_t annotator_id) override {
    std::unique_lock lock(mu_);
    auto& p = project(name);
    detail::check_label(p.project, label);
    const auto& who = annotator(annotator_id);
    const auto ids = query_locked(p, q);
    if (ids.empty()) return 0;
    Plan plan;
    const std::int64_t batch = next_batch_id_;
    const double at = now_seconds();
    for (const auto& id : ids) stage(p, plan, id, std::string(label), who, batch, at);
    commit(p, plan);
    ++next_batch_id_;
    return ids.size();
  }

  std::size_t put_annotations(std::string_view name, std::int64_t annotator_id,
                              std::span<const AnnotationRecord> records) override {
    std::unique_lock lock(mu_);
    auto& p = project(name);
    const auto& who = annotator(annotator_id);
    for (const auto& r : records) {
      track(p, r.subject);
      detail::check_label(p.project, r.label);
    }
    Plan plan;
    for (const auto& r : records) stage(p, plan, r.subject, r.label, who, 0, r.created_at);
    commit(p, plan);
    return records.size();
  }

  std::vector<AnnotationRecord> list_annotations(std::string_view name) const override {
    std::shared_lock lock(mu_);
    const auto& p = project(name);
    std::vector<AnnotationRecord> out;
    for (const auto& [_, a] : p.current) out.push_back(a);
    std::stable_sort(out.begin(), out.end(), [&](const AnnotationRecord& x, const AnnotationRecord& y) {
      if (x.subject != y.subject) return x.subject < y.subject;
      const auto& ax = annotator(x.annotator_id);
      const auto& ay = annotator(y.annotator_id);
      if (ax.name != ay.name) return ax.name < ay.name;
      return ax.iteration.value_or("") < ay.iteration.value_or("");
    });
    return out;
  }

  std::vector<AuditEntry> audit_log(std::string_view name) const override {
    std::shared_lock lock(mu_);
    return project(name).audit;
  }

  void put_artifact(std::string_view name, std::string_view key, std::string_view value) override {
    std::unique_lock lock(mu_);
    project(name).artifacts[std::string(key)] = std::string(value);
    dirty_ = true;
  }

  std::optional<std::string> get_artifact(std::string_view name, std::string_view key) const override {
    std::shared_lock lock(mu_);
    const auto& artifacts = project(name).artifacts;
    const auto it = artifacts.find(std::string(key));
    if (it == artifacts.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::pair<std::string, std::string>> list_artifacts(std::string_view name,
                                                                  std::string_view prefix) const override {
    std::shared_lock lock(mu_);
    std::vector<std::pair<std::string, std::string>> out;
    const auto& artifacts = project(name).artifacts;
    for (auto it = artifacts.lower_bound(std::string(prefix)); it != artifacts.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      out.emplace_back(it->first, it->second);
    }
    return out;
  }

  void flush() override {
    std::unique_lock lock(mu_);
    if (!dirty_ || path_.empty()) return;
    save();
    dirty_ = false;
  }

 private:
  struct TrackEntry {
    geo::Track track;
    TrackMeta meta;
  };

  using AnnotationKey = std::pair<std::string, std::int64_t>;  // (subject, annotator)

  struct ProjectData {
    Project project;
    std::map<std::string, TrackEntry> tracks;
    std::map<AnnotationKey, AnnotationRecord> current;
    std::vector<AuditEntry> audit;
    std::map<std::string, std::string> artifacts;
  };

  // Staged annotation writes, applied only after every row was accepted.
  struct Plan {
    std::vector<AnnotationRecord> writes;
  };

  ProjectData& project(std::string_view name) {
    const auto it = projects_.find(std::string(name));
    if (it == projects_.end()) fail(ErrorCode::not_found, fmt::format("unknown project '{}'", name));
    return it->second;
  }
  const ProjectData& project(std::string_view name) const { return const_cast<MemoryStore*>(this)->project(name); }

  const TrackEntry& track(const ProjectData& p, std::string_view id) const {
    const auto it = p.tracks.find(std::string(id));
    if (it == p.tracks.end()) fail(ErrorCode::not_found, fmt::format("unknown track '{}'", id));
    return it->second;
  }

  const AnnotatorRecord& annotator(std::int64_t id) const {
    if (id < 1 || id > static_cast<std::int64_t>(annotators_.size())) {
      fail(ErrorCode::not_found, fmt::format("unknown annotator {}", id));
    }
    return annotators_[static_cast<std::size_t>(id - 1)];
  }

  std::vector<std::string> query_locked(const ProjectData& p, const Query& q) const {
    q.validate();
    std::vector<std::string> ids;
    for (const auto& [id, entry] : p.tracks) {
      if (!detail::track_matches(q, entry.track, entry.meta)) continue;
      if (q.has_annotation_filter()) {
        bool any = false;
        for (auto it = p.current.lower_bound({id, 0}); it != p.current.end() && it->first.first == id; ++it) {
          if (annotation_matches(q, it->second, annotator(it->second.annotator_id))) {
            any = true;
            break;
          }
        }
        if (!any) continue;
      }
      ids.push_back(id);
    }
    return detail::paginate(std::move(ids), q);
  }

  void stage(const ProjectData&, Plan& plan, std::string subject, std::string label, const AnnotatorRecord& who,
             std::int64_t batch, double at) {
    count_write();
    AnnotationRecord rec;
    rec.subject = std::move(subject);
    rec.label = std::move(label);
    rec.annotator_id = who.id;
    rec.verified = who.kind == AnnotatorKind::human;
    rec.created_at = at;
    rec.batch_id = batch;
    plan.writes.push_back(std::move(rec));
  }

  void retire(ProjectData& p, std::map<AnnotationKey, AnnotationRecord>::iterator it, AuditAction action, double at) {
    p.audit.push_back({next_audit_seq_++, it->second, action, at});
    p.current.erase(it);
  }

  std::vector<AnnotationRecord> commit(ProjectData& p, Plan& plan) {
    std::set<std::string> touched;
    const double at = now_seconds();
    for (auto& rec : plan.writes) {
      const AnnotationKey key{rec.subject, rec.annotator_id};
      if (const auto it = p.current.find(key); it != p.current.end()) retire(p, it, AuditAction::superseded, at);
      if (annotator(rec.annotator_id).kind == AnnotatorKind::human) {
        for (auto it = p.current.lower_bound({rec.subject, 0});
             it != p.current.end() && it->first.first == rec.subject;) {
          if (annotator(it->second.annotator_id).kind == AnnotatorKind::model) {
            auto next = std::next(it);
            retire(p, it, AuditAction::resolved, at);
            it = next;
          } else {
            ++it;
          }
        }
      }
      rec.id = next_annotation_id_++;
      p.current.emplace(key, rec);
      touched.insert(rec.subject);
    }
    for (const auto& subject : touched) {
      std::size_t n = 0;
      for (auto it = p.current.lower_bound({subject, 0}); it != p.current.end() && it->first.first == subject; ++it) {
        ++n;
      }
      p.tracks.at(subject).meta.num_annotations = n;
    }
    dirty_ = true;
    return plan.writes;
  }

  void save() const {
    json root;
    root["next"] = {next_project_id_, next_annotation_id_, next_batch_id_, next_audit_seq_};
    json annotators = json::array();
    for (const auto& a : annotators_) {
      json j = {{"id", a.id}, {"kind", to_string(a.kind)}, {"name", a.name}};
      if (a.iteration) j["iteration"] = *a.iteration;
      if (a.role) j["role"] = *a.role;
      annotators.push_back(std::move(j));
    }
    root["annotators"] = std::move(annotators);
    json projects = json::array();
    for (const auto& [name, p] : projects_) {
      json jp = {{"id", p.project.id},
                 {"name", name},
                 {"labels", p.project.label_set.labels},
                 {"created_at", p.project.created_at}};
      if (p.project.airport) {
        jp["airport"] = {p.project.airport->latitude_deg, p.project.airport->longitude_deg,
                         p.project.airport->altitude_m};
      }
      json tracks = json::array();
      for (const auto& [id, entry] : p.tracks) {
        json jt = to_json(entry.track);
        if (entry.meta.set_id) jt["set"] = *entry.meta.set_id;
        if (entry.meta.segment) jt["segment"] = to_json(*entry.meta.segment);
        tracks.push_back(std::move(jt));
      }
      jp["tracks"] = std::move(tracks);
      json current = json::array();
      for (const auto& [_, a] : p.current) current.push_back(to_json(a));
      jp["annotations"] = std::move(current);
      json audit = json::array();
      for (const auto& e : p.audit) {
        audit.push_back({{"seq", e.seq}, {"record", to_json(e.record)}, {"action", to_string(e.action)}, {"at", e.at}});
      }
      jp["audit"] = std::move(audit);
      jp["artifacts"] = p.artifacts;
      projects.push_back(std::move(jp));
    }
    root["projects"] = std::move(projects);

    const std::filesystem::path target(path_);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::storage, fmt::format("cannot write {}", tmp.string()));
      out << root.dump();
      if (!out) fail(ErrorCode::storage, fmt::format("short write to {}", tmp.string()));
    }
    std::filesystem::rename(tmp, target);
  }

  void load() {
    std::ifstream in(path_, std::ios::binary);
    json root;
    try {
      root = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::storage, fmt::format("corrupt store file {}: {}", path_, e.what()));
    }
    const auto& next = root.at("next");
    next_project_id_ = next.at(0).get<std::int64_t>();
    next_annotation_id_ = next.at(1).get<std::int64_t>();
    next_batch_id_ = next.at(2).get<std::int64_t>();
    next_audit_seq_ = next.at(3).get<std::int64_t>();
    for (const auto& j : root.at("annotators")) {
      AnnotatorRecord a;
      a.id = j.at("id").get<std::int64_t>();
      a.kind = annotator_kind_from_string(j.at("kind").get<std::string>());
      a.name = j.at("name").get<std::string>();
      if (j.contains("iteration")) a.iteration = j.at("iteration").get<std::string>();
      if (j.contains("role")) a.role = j.at("role").get<std::string>();
      annotators_.push_back(std::move(a));
    }
    for (const auto& jp : root.at("projects")) {
      ProjectData p;
      p.project.id = jp.at("id").get<std::int64_t>();
      p.project.name = jp.at("name").get<std::string>();
      p.project.label_set = {p.project.name, jp.at("labels").get<std::vector<std::string>>()};
      p.project.created_at = jp.at("created_at").get<double>();
      if (jp.contains("airport")) {
        const auto& a = jp.at("airport");
        p.project.airport = geo::GeoPoint{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
      }
      for (const auto& jt : jp.at("tracks")) {
        StoredTrack st{track_from_json(jt), std::nullopt};
        if (jt.contains("segment")) st.segment = segment_from_json(jt.at("segment"));
        TrackEntry entry{st.track, detail::compute_meta(st, p.project.id)};
        if (jt.contains("set")) entry.meta.set_id = jt.at("set").get<int>();
        p.tracks.emplace(entry.meta.track_id, std::move(entry));
      }
      for (const auto& ja : jp.at("annotations")) {
        auto a = annotation_from_json(ja);
        p.tracks.at(a.subject).meta.num_annotations++;
        p.current.emplace(AnnotationKey{a.subject, a.annotator_id}, std::move(a));
      }
      for (const auto& je : jp.at("audit")) {
        p.audit.push_back({je.at("seq").get<std::int64_t>(), annotation_from_json(je.at("record")),
                           je.at("action").get<std::string>() == "resolved" ? AuditAction::resolved
                                                                             : AuditAction::superseded,
                           je.at("at").get<double>()});
      }
      p.artifacts = jp.at("artifacts").get<std::map<std::string, std::string>>();
      projects_.emplace(p.project.name, std::move(p));
    }
  }

  std::string path_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ProjectData> projects_;
  std::vector<AnnotatorRecord> annotators_;
  std::int64_t next_project_id_ = 1;
  std::int64_t next_annotation_id_ = 1;
  std::int64_t next_batch_id_ = 1;
  std::int64_t next_audit_seq_ = 1;
  bool dirty_ = false;
};

}  // namespace

std::unique_ptr<Store> make_memory_store(const std::string& path) { return std::make_unique<MemoryStore>(path); }

}  // namespace tracklab::store
