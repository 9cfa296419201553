// Relational backend. The schema mirrors the four track tables (positions,
// track meta, annotations, annotators) plus projects, audit and artifacts.

#include <mutex>

#include <sqlite3.h>

#include "store_internal.hpp"

namespace tracklab::store {

namespace {

constexpr const char* kSchema = R"sql(
PRAGMA foreign_keys = ON;
CREATE TABLE IF NOT EXISTS projects (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL UNIQUE,
  created_at REAL NOT NULL,
  airport_lat REAL, airport_lon REAL, airport_elev REAL
);
CREATE TABLE IF NOT EXISTS project_labels (
  project_id INTEGER NOT NULL REFERENCES projects(id),
  pos INTEGER NOT NULL,
  name TEXT NOT NULL,
  PRIMARY KEY (project_id, pos)
);
CREATE TABLE IF NOT EXISTS tracks (
  project_id INTEGER NOT NULL REFERENCES projects(id),
  track_id TEXT NOT NULL,
  kind TEXT NOT NULL,
  num_points INTEGER NOT NULL,
  start_time REAL NOT NULL,
  end_time REAL NOT NULL,
  num_annotations INTEGER NOT NULL DEFAULT 0,
  set_id INTEGER,
  parent TEXT, seg_start INTEGER, seg_end INTEGER, direction REAL, runway TEXT,
  f0 REAL, f1 REAL, f2 REAL, f3 REAL, f4 REAL,
  contact INTEGER, climbs_out INTEGER,
  PRIMARY KEY (project_id, track_id)
);
CREATE TABLE IF NOT EXISTS positions (
  project_id INTEGER NOT NULL,
  track_id TEXT NOT NULL,
  idx INTEGER NOT NULL,
  t REAL NOT NULL, lat REAL NOT NULL, lon REAL NOT NULL, alt REAL NOT NULL,
  PRIMARY KEY (project_id, track_id, idx)
);
CREATE TABLE IF NOT EXISTS position_extras (
  project_id INTEGER NOT NULL,
  track_id TEXT NOT NULL,
  name TEXT NOT NULL,
  idx INTEGER NOT NULL,
  num REAL, txt TEXT,
  PRIMARY KEY (project_id, track_id, name, idx)
);
CREATE TABLE IF NOT EXISTS annotators (
  id INTEGER PRIMARY KEY,
  kind TEXT NOT NULL,
  name TEXT NOT NULL,
  iteration TEXT,
  role TEXT
);
CREATE TABLE IF NOT EXISTS annotations (
  id INTEGER PRIMARY KEY,
  project_id INTEGER NOT NULL,
  subject TEXT NOT NULL,
  label TEXT NOT NULL,
  annotator_id INTEGER NOT NULL REFERENCES annotators(id),
  verified INTEGER NOT NULL,
  created_at REAL NOT NULL,
  batch_id INTEGER NOT NULL,
  UNIQUE (project_id, subject, annotator_id)
);
CREATE TABLE IF NOT EXISTS audit (
  seq INTEGER PRIMARY KEY,
  project_id INTEGER NOT NULL,
  annotation_id INTEGER NOT NULL,
  subject TEXT NOT NULL,
  label TEXT NOT NULL,
  annotator_id INTEGER NOT NULL,
  verified INTEGER NOT NULL,
  created_at REAL NOT NULL,
  batch_id INTEGER NOT NULL,
  action TEXT NOT NULL,
  at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS artifacts (
  project_id INTEGER NOT NULL,
  key TEXT NOT NULL,
  value TEXT NOT NULL,
  PRIMARY KEY (project_id, key)
);
CREATE TABLE IF NOT EXISTS counters (
  name TEXT PRIMARY KEY,
  value INTEGER NOT NULL
);
INSERT OR IGNORE INTO counters VALUES ('batch', 1);
)sql";

class Statement {
 public:
  Statement(sqlite3* db, std::string_view sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &stmt_, nullptr) != SQLITE_OK) {
      fail(ErrorCode::storage, fmt::format("sqlite prepare failed: {} in {}", sqlite3_errmsg(db), sql));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, std::int64_t v) {
    check(sqlite3_bind_int64(stmt_, i, v));
    return *this;
  }
  Statement& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
  Statement& bind(int i, std::size_t v) { return bind(i, static_cast<std::int64_t>(v)); }
  Statement& bind(int i, bool v) { return bind(i, static_cast<std::int64_t>(v ? 1 : 0)); }
  Statement& bind(int i, double v) {
    check(sqlite3_bind_double(stmt_, i, v));
    return *this;
  }
  Statement& bind(int i, std::string_view v) {
    check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind(int i, const std::string& v) { return bind(i, std::string_view(v)); }
  Statement& bind(int i, const char* v) { return bind(i, std::string_view(v)); }
  Statement& bind_null(int i) {
    check(sqlite3_bind_null(stmt_, i));
    return *this;
  }
  template <typename T>
  Statement& bind(int i, const std::optional<T>& v) {
    return v ? bind(i, *v) : bind_null(i);
  }

  /// Returns true while rows are available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    fail(ErrorCode::storage, fmt::format("sqlite step failed: {}", sqlite3_errmsg(db_)));
  }
  void run() {
    while (step()) {
    }
    reset();
  }
  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

  bool is_null(int c) const { return sqlite3_column_type(stmt_, c) == SQLITE_NULL; }
  std::int64_t i64(int c) const { return sqlite3_column_int64(stmt_, c); }
  double real(int c) const { return sqlite3_column_double(stmt_, c); }
  std::string text(int c) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, c));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, c))) : std::string();
  }
  std::optional<std::string> opt_text(int c) const {
    if (is_null(c)) return std::nullopt;
    return text(c);
  }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) fail(ErrorCode::storage, fmt::format("sqlite bind failed: {}", sqlite3_errmsg(db_)));
  }
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { exec("BEGIN IMMEDIATE"); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec("COMMIT");
    done_ = true;
  }

 private:
  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      fail(ErrorCode::storage, fmt::format("sqlite {} failed: {}", sql, msg));
    }
  }
  sqlite3* db_;
  bool done_ = false;
};

class SqliteStore final : public Store {
 public:
  explicit SqliteStore(const std::string& path) {
    const std::string target = path.empty() ? ":memory:" : path;
    if (sqlite3_open_v2(target.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
      const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      fail(ErrorCode::storage, fmt::format("cannot open sqlite database {}: {}", target, msg));
    }
    exec(kSchema);
  }
  ~SqliteStore() override { sqlite3_close(db_); }

  Project create_project(const std::string& name, const LabelSet& labels,
                         std::optional<geo::GeoPoint> airport) override {
    labels.validate();
    if (name.empty()) fail(ErrorCode::validation, "project name is empty");
    if (airport && !airport->valid()) fail(ErrorCode::validation, "airport reference is invalid");
    std::lock_guard lock(mu_);
    {
      Statement s(db_, "SELECT 1 FROM projects WHERE name = ?");
      if (s.bind(1, name).step()) fail(ErrorCode::conflict, fmt::format("project '{}' already exists", name));
    }
    Transaction tx(db_);
    const double created = now_seconds();
    Statement ins(db_, "INSERT INTO projects (name, created_at, airport_lat, airport_lon, airport_elev) VALUES (?,?,?,?,?)");
    ins.bind(1, name).bind(2, created);
    if (airport) {
      ins.bind(3, airport->latitude_deg).bind(4, airport->longitude_deg).bind(5, airport->altitude_m);
    }
    ins.run();
    const std::int64_t id = sqlite3_last_insert_rowid(db_);
    Statement lab(db_, "INSERT INTO project_labels VALUES (?,?,?)");
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
      lab.bind(1, id).bind(2, i).bind(3, labels.labels[i]).run();
    }
    tx.commit();
    return Project{id, name, LabelSet{name, labels.labels}, created, airport};
  }

  Project get_project(std::string_view name) const override {
    std::lock_guard lock(mu_);
    return project(name);
  }

  std::vector<Project> list_projects() const override {
    std::lock_guard lock(mu_);
    std::vector<std::string> names;
    Statement s(db_, "SELECT name FROM projects ORDER BY name");
    while (s.step()) names.push_back(s.text(0));
    std::vector<Project> out;
    for (const auto& n : names) out.push_back(project(n));
    return out;
  }

  std::size_t upsert_tracks(std::string_view name, std::span<const StoredTrack> tracks) override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    std::vector<TrackMeta> metas;
    for (const auto& t : tracks) metas.push_back(detail::compute_meta(t, p.id));
    Transaction tx(db_);
    Statement up(db_, R"sql(
      INSERT INTO tracks (project_id, track_id, kind, num_points, start_time, end_time, parent, seg_start, seg_end,
                          direction, runway, f0, f1, f2, f3, f4, contact, climbs_out)
      VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)
      ON CONFLICT (project_id, track_id) DO UPDATE SET
        kind = excluded.kind, num_points = excluded.num_points, start_time = excluded.start_time,
        end_time = excluded.end_time, parent = excluded.parent, seg_start = excluded.seg_start,
        seg_end = excluded.seg_end, direction = excluded.direction, runway = excluded.runway,
        f0 = excluded.f0, f1 = excluded.f1, f2 = excluded.f2, f3 = excluded.f3, f4 = excluded.f4,
        contact = excluded.contact, climbs_out = excluded.climbs_out)sql");
    Statement del_pos(db_, "DELETE FROM positions WHERE project_id = ? AND track_id = ?");
    Statement del_extra(db_, "DELETE FROM position_extras WHERE project_id = ? AND track_id = ?");
    Statement ins_pos(db_, "INSERT INTO positions VALUES (?,?,?,?,?,?,?)");
    Statement ins_extra(db_, "INSERT INTO position_extras VALUES (?,?,?,?,?,?)");
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      const auto& t = tracks[k].track;
      const auto& m = metas[k];
      up.bind(1, p.id).bind(2, m.track_id).bind(3, to_string(m.kind)).bind(4, m.num_points)
          .bind(5, m.start_time).bind(6, m.end_time);
      if (const auto& s = m.segment) {
        up.bind(7, s->parent_track_id).bind(8, s->start_index).bind(9, s->end_index).bind(10, s->avg_direction_deg)
            .bind(11, s->runway_id);
        for (int f = 0; f < 5; ++f) up.bind(12 + f, s->feature[static_cast<std::size_t>(f)]);
        up.bind(17, s->contains_contact).bind(18, s->climbs_out);
      }
      up.run();
      del_pos.bind(1, p.id).bind(2, m.track_id).run();
      del_extra.bind(1, p.id).bind(2, m.track_id).run();
      for (std::size_t i = 0; i < t.points.size(); ++i) {
        const auto& pt = t.points[i];
        ins_pos.bind(1, p.id).bind(2, m.track_id).bind(3, i).bind(4, pt.timestamp_s).bind(5, pt.geo.latitude_deg)
            .bind(6, pt.geo.longitude_deg).bind(7, pt.geo.altitude_m).run();
      }
      for (const auto& [col, values] : t.extras) {
        for (std::size_t i = 0; i < values.size(); ++i) {
          ins_extra.bind(1, p.id).bind(2, m.track_id).bind(3, col).bind(4, i);
          if (const double* d = std::get_if<double>(&values[i])) {
            ins_extra.bind(5, *d);
          } else {
            ins_extra.bind(6, std::get<std::string>(values[i]));
          }
          ins_extra.run();
        }
      }
    }
    tx.commit();
    return tracks.size();
  }

  TrackRecord get_track(std::string_view name, std::string_view track_id) const override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    TrackRecord rec;
    rec.meta = meta(p.id, track_id);
    rec.track.track_id = std::string(track_id);
    {
      Statement s(db_, "SELECT t, lat, lon, alt FROM positions WHERE project_id = ? AND track_id = ? ORDER BY idx");
      s.bind(1, p.id).bind(2, track_id);
      while (s.step()) {
        rec.track.points.push_back({{s.real(1), s.real(2), s.real(3)}, s.real(0), std::string(track_id)});
      }
    }
    {
      Statement s(db_, R"sql(SELECT name, num, txt FROM position_extras WHERE project_id = ? AND track_id = ?
                            ORDER BY name, idx)sql");
      s.bind(1, p.id).bind(2, track_id);
      while (s.step()) {
        auto& column = rec.track.extras[s.text(0)];
        if (!s.is_null(1)) {
          column.emplace_back(s.real(1));
        } else {
          column.emplace_back(s.text(2));
        }
      }
    }
    Statement s(db_, R"sql(SELECT id, subject, label, annotator_id, verified, created_at, batch_id FROM annotations
                          WHERE project_id = ? AND subject = ? ORDER BY annotator_id)sql");
    s.bind(1, p.id).bind(2, track_id);
    while (s.step()) rec.annotations.push_back(read_annotation(s));
    return rec;
  }

  bool has_track(std::string_view name, std::string_view track_id) const override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    Statement s(db_, "SELECT 1 FROM tracks WHERE project_id = ? AND track_id = ?");
    return s.bind(1, p.id).bind(2, track_id).step();
  }

  std::vector<TrackMeta> list_meta(std::string_view name, const Query& q) const override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    std::vector<TrackMeta> out;
    for (const auto& id : query_locked(p.id, q)) out.push_back(meta(p.id, id));
    return out;
  }

  std::vector<std::string> query_tracks(std::string_view name, const Query& q) const override {
    std::lock_guard lock(mu_);
    return query_locked(project(name).id, q);
  }

  std::size_t delete_subjects(std::string_view name, SubjectKind kind) override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    Transaction tx(db_);
    const std::string where =
        "project_id = ?1 AND {} IN (SELECT track_id FROM tracks WHERE project_id = ?1 AND kind = ?2)";
    for (const auto& [table, col] : {std::pair{"annotations", "subject"}, std::pair{"positions", "track_id"},
                                     std::pair{"position_extras", "track_id"}}) {
      Statement s(db_, fmt::format("DELETE FROM {} WHERE {}", table, fmt::format(fmt::runtime(where), col)));
      s.bind(1, p.id).bind(2, to_string(kind)).run();
    }
    Statement s(db_, "DELETE FROM tracks WHERE project_id = ? AND kind = ?");
    s.bind(1, p.id).bind(2, to_string(kind)).run();
    const auto removed = static_cast<std::size_t>(sqlite3_changes(db_));
    tx.commit();
    return removed;
  }

  void assign_sets(std::string_view name, std::span<const std::pair<std::string, int>> sets) override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    Transaction tx(db_);
    Statement s(db_, "UPDATE tracks SET set_id = ? WHERE project_id = ? AND track_id = ?");
    for (const auto& [id, set] : sets) {
      s.bind(1, set).bind(2, p.id).bind(3, id).run();
      if (sqlite3_changes(db_) == 0) fail(ErrorCode::not_found, fmt::format("unknown track '{}'", id));
    }
    tx.commit();
  }

  AnnotatorRecord register_annotator(const AnnotatorRecord& proto) override {
    proto.validate();
    std::lock_guard lock(mu_);
    {
      Statement s(db_, R"sql(SELECT id FROM annotators WHERE kind = ? AND name = ? AND iteration IS ?)sql");
      s.bind(1, to_string(proto.kind)).bind(2, proto.name).bind(3, proto.iteration);
      if (s.step()) return annotator(s.i64(0));
    }
    Statement s(db_, "INSERT INTO annotators (kind, name, iteration, role) VALUES (?,?,?,?)");
    s.bind(1, to_string(proto.kind)).bind(2, proto.name).bind(3, proto.iteration).bind(4, proto.role).run();
    return annotator(sqlite3_last_insert_rowid(db_));
  }

  AnnotatorRecord get_annotator(std::int64_t id) const override {
    std::lock_guard lock(mu_);
    return annotator(id);
  }

  std::vector<AnnotatorRecord> list_annotators() const override {
    std::lock_guard lock(mu_);
    std::vector<AnnotatorRecord> out;
    Statement s(db_, "SELECT id, kind, name, iteration, role FROM annotators ORDER BY id");
    while (s.step()) out.push_back(read_annotator(s));
    return out;
  }

  AnnotationRecord annotate(std::string_view name, std::string_view subject, std::string_view label,
                            std::int64_t annotator_id) override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    meta(p.id, subject);
    detail::check_label(p, label);
    const auto who = annotator(annotator_id);
    Transaction tx(db_);
    auto rec = write(p.id, std::string(subject), std::string(label), who, 0, now_seconds());
    tx.commit();
    return rec;
  }

  std::size_t batch_annotate(std::string_view name, const Query& q, std::string_view label,
                             std::int64_t annotator_id) override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    detail::check_label(p, label);
    const auto who = annotator(annotator_id);
    Transaction tx(db_);
    const auto ids = query_locked(p.id, q);
    if (ids.empty()) return 0;
    std::int64_t batch;
    {
      Statement s(db_, "SELECT value FROM counters WHERE name = 'batch'");
      s.step();
      batch = s.i64(0);
    }
    Statement(db_, "UPDATE counters SET value = value + 1 WHERE name = 'batch'").run();
    const double at = now_seconds();
    for (const auto& id : ids) write(p.id, id, std::string(label), who, batch, at);
    tx.commit();
    return ids.size();
  }

  std::size_t put_annotations(std::string_view name, std::int64_t annotator_id,
                              std::span<const AnnotationRecord> records) override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    const auto who = annotator(annotator_id);
    for (const auto& r : records) {
      meta(p.id, r.subject);
      detail::check_label(p, r.label);
    }
    Transaction tx(db_);
    for (const auto& r : records) write(p.id, r.subject, r.label, who, 0, r.created_at);
    tx.commit();
    return records.size();
  }

  std::vector<AnnotationRecord> list_annotations(std::string_view name) const override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    Statement s(db_, R"sql(
      SELECT a.id, a.subject, a.label, a.annotator_id, a.verified, a.created_at, a.batch_id
      FROM annotations a JOIN annotators n ON n.id = a.annotator_id
      WHERE a.project_id = ?
      ORDER BY a.subject, n.name, COALESCE(n.iteration, ''), a.annotator_id)sql");
    s.bind(1, p.id);
    std::vector<AnnotationRecord> out;
    while (s.step()) out.push_back(read_annotation(s));
    return out;
  }

  std::vector<AuditEntry> audit_log(std::string_view name) const override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    Statement s(db_, R"sql(SELECT annotation_id, subject, label, annotator_id, verified, created_at, batch_id,
                                  seq, action, at FROM audit WHERE project_id = ? ORDER BY seq)sql");
    s.bind(1, p.id);
    std::vector<AuditEntry> out;
    while (s.step()) {
      AuditEntry e;
      e.record = read_annotation(s);
      e.seq = s.i64(7);
      e.action = s.text(8) == "resolved" ? AuditAction::resolved : AuditAction::superseded;
      e.at = s.real(9);
      out.push_back(std::move(e));
    }
    return out;
  }

  void put_artifact(std::string_view name, std::string_view key, std::string_view value) override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    Statement s(db_, "INSERT INTO artifacts VALUES (?,?,?) ON CONFLICT (project_id, key) DO UPDATE SET value = excluded.value");
    s.bind(1, p.id).bind(2, key).bind(3, value).run();
  }

  std::optional<std::string> get_artifact(std::string_view name, std::string_view key) const override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    Statement s(db_, "SELECT value FROM artifacts WHERE project_id = ? AND key = ?");
    s.bind(1, p.id).bind(2, key);
    if (!s.step()) return std::nullopt;
    return s.text(0);
  }

  std::vector<std::pair<std::string, std::string>> list_artifacts(std::string_view name,
                                                                  std::string_view prefix) const override {
    std::lock_guard lock(mu_);
    const auto p = project(name);
    Statement s(db_, R"sql(SELECT key, value FROM artifacts WHERE project_id = ? AND substr(key, 1, ?) = ?
                          ORDER BY key)sql");
    s.bind(1, p.id).bind(2, prefix.size()).bind(3, prefix);
    std::vector<std::pair<std::string, std::string>> out;
    while (s.step()) out.emplace_back(s.text(0), s.text(1));
    return out;
  }

 private:
  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      fail(ErrorCode::storage, fmt::format("sqlite exec failed: {}", msg));
    }
  }

  Project project(std::string_view name) const {
    Statement s(db_, "SELECT id, name, created_at, airport_lat, airport_lon, airport_elev FROM projects WHERE name = ?");
    s.bind(1, name);
    if (!s.step()) fail(ErrorCode::not_found, fmt::format("unknown project '{}'", name));
    Project p;
    p.id = s.i64(0);
    p.name = s.text(1);
    p.created_at = s.real(2);
    if (!s.is_null(3)) p.airport = geo::GeoPoint{s.real(3), s.real(4), s.real(5)};
    p.label_set.project_name = p.name;
    Statement l(db_, "SELECT name FROM project_labels WHERE project_id = ? ORDER BY pos");
    l.bind(1, p.id);
    while (l.step()) p.label_set.labels.push_back(l.text(0));
    return p;
  }

  TrackMeta meta(std::int64_t project_id, std::string_view id) const {
    Statement s(db_, R"sql(SELECT track_id, num_points, start_time, end_time, num_annotations, kind, set_id, parent,
                                  seg_start, seg_end, direction, runway, f0, f1, f2, f3, f4, contact, climbs_out
                           FROM tracks WHERE project_id = ? AND track_id = ?)sql");
    s.bind(1, project_id).bind(2, id);
    if (!s.step()) fail(ErrorCode::not_found, fmt::format("unknown track '{}'", id));
    TrackMeta m;
    m.track_id = s.text(0);
    m.project_id = project_id;
    m.num_points = static_cast<std::size_t>(s.i64(1));
    m.start_time = s.real(2);
    m.end_time = s.real(3);
    m.num_annotations = static_cast<std::size_t>(s.i64(4));
    m.kind = subject_kind_from_string(s.text(5));
    if (!s.is_null(6)) m.set_id = static_cast<int>(s.i64(6));
    if (m.kind == SubjectKind::segment) {
      SegmentInfo seg;
      seg.parent_track_id = s.text(7);
      seg.start_index = static_cast<std::size_t>(s.i64(8));
      seg.end_index = static_cast<std::size_t>(s.i64(9));
      if (!s.is_null(10)) seg.avg_direction_deg = s.real(10);
      seg.runway_id = s.text(11);
      for (int f = 0; f < 5; ++f) seg.feature[static_cast<std::size_t>(f)] = s.real(12 + f);
      seg.contains_contact = s.i64(17) != 0;
      seg.climbs_out = s.i64(18) != 0;
      m.segment = std::move(seg);
    }
    return m;
  }

  AnnotatorRecord annotator(std::int64_t id) const {
    Statement s(db_, "SELECT id, kind, name, iteration, role FROM annotators WHERE id = ?");
    s.bind(1, id);
    if (!s.step()) fail(ErrorCode::not_found, fmt::format("unknown annotator {}", id));
    return read_annotator(s);
  }

  static AnnotatorRecord read_annotator(const Statement& s) {
    AnnotatorRecord a;
    a.id = s.i64(0);
    a.kind = annotator_kind_from_string(s.text(1));
    a.name = s.text(2);
    a.iteration = s.opt_text(3);
    a.role = s.opt_text(4);
    return a;
  }

  static AnnotationRecord read_annotation(const Statement& s) {
    AnnotationRecord a;
    a.id = s.i64(0);
    a.subject = s.text(1);
    a.label = s.text(2);
    a.annotator_id = s.i64(3);
    a.verified = s.i64(4) != 0;
    a.created_at = s.real(5);
    a.batch_id = s.i64(6);
    return a;
  }

  std::vector<std::string> query_locked(std::int64_t project_id, const Query& q) const {
    q.validate();
    std::string sql = "SELECT t.track_id FROM tracks t WHERE t.project_id = ?1";
    if (q.kind) sql += " AND t.kind = ?2";
    if (q.set_id) sql += " AND t.set_id = ?3";
    if (q.runway_id) sql += " AND t.runway = ?4";
    if (q.time_range) sql += " AND t.end_time >= ?5 AND t.start_time <= ?6";
    if (q.bbox) {
      sql += R"sql( AND EXISTS (SELECT 1 FROM positions p WHERE p.project_id = t.project_id AND p.track_id = t.track_id
                    AND p.lat BETWEEN ?7 AND ?8 AND p.lon BETWEEN ?9 AND ?10))sql";
    }
    std::optional<AnnotatorRef> ref;
    if (q.annotator) ref = AnnotatorRef::parse(*q.annotator);
    if (q.has_annotation_filter()) {
      sql += R"sql( AND EXISTS (SELECT 1 FROM annotations a JOIN annotators n ON n.id = a.annotator_id
                    WHERE a.project_id = t.project_id AND a.subject = t.track_id)sql";
      if (q.label) sql += " AND a.label = ?11";
      if (q.verified) sql += " AND a.verified = ?12";
      if (q.annotator_kind) sql += " AND n.kind = ?13";
      if (ref) sql += " AND n.name = ?14";
      if (ref && ref->iteration) sql += " AND n.iteration = ?15";
      sql += ")";
    }
    sql += " ORDER BY t.track_id LIMIT ?16 OFFSET ?17";
    Statement s(db_, sql);
    s.bind(1, project_id);
    if (q.kind) s.bind(2, to_string(*q.kind));
    if (q.set_id) s.bind(3, *q.set_id);
    if (q.runway_id) s.bind(4, *q.runway_id);
    if (q.time_range) s.bind(5, q.time_range->start).bind(6, q.time_range->end);
    if (q.bbox) s.bind(7, q.bbox->min_lat).bind(8, q.bbox->max_lat).bind(9, q.bbox->min_lon).bind(10, q.bbox->max_lon);
    if (q.label) s.bind(11, *q.label);
    if (q.verified) s.bind(12, *q.verified);
    if (q.annotator_kind) s.bind(13, to_string(*q.annotator_kind));
    if (ref) s.bind(14, ref->name);
    if (ref && ref->iteration) s.bind(15, *ref->iteration);
    s.bind(16, q.limit ? static_cast<std::int64_t>(*q.limit) : std::int64_t{-1});
    s.bind(17, q.offset);
    std::vector<std::string> ids;
    while (s.step()) ids.push_back(s.text(0));
    return ids;
  }

  void retire(std::int64_t project_id, std::string_view where_sql, std::string_view subject, std::int64_t arg,
              AuditAction action) {
    const std::string cond = fmt::format("project_id = ?1 AND subject = ?2 AND {}", where_sql);
    Statement copy(db_, fmt::format(R"sql(
      INSERT INTO audit (project_id, annotation_id, subject, label, annotator_id, verified, created_at, batch_id,
                         action, at)
      SELECT project_id, id, subject, label, annotator_id, verified, created_at, batch_id, ?4, ?5
      FROM annotations WHERE {} ORDER BY annotator_id)sql", cond));
    copy.bind(1, project_id).bind(2, subject).bind(3, arg).bind(4, to_string(action)).bind(5, now_seconds()).run();
    Statement del(db_, fmt::format("DELETE FROM annotations WHERE {}", cond));
    del.bind(1, project_id).bind(2, subject).bind(3, arg).run();
  }

  AnnotationRecord write(std::int64_t project_id, const std::string& subject, const std::string& label,
                         const AnnotatorRecord& who, std::int64_t batch, double at) {
    count_write();
    retire(project_id, "annotator_id = ?3", subject, who.id, AuditAction::superseded);
    if (who.kind == AnnotatorKind::human) {
      retire(project_id, "annotator_id IN (SELECT id FROM annotators WHERE kind = 'model') AND ?3 = ?3", subject, 0,
             AuditAction::resolved);
    }
    Statement ins(db_, R"sql(INSERT INTO annotations (project_id, subject, label, annotator_id, verified, created_at,
                                                     batch_id) VALUES (?,?,?,?,?,?,?))sql");
    const bool verified = who.kind == AnnotatorKind::human;
    ins.bind(1, project_id).bind(2, subject).bind(3, label).bind(4, who.id).bind(5, verified).bind(6, at)
        .bind(7, batch).run();
    AnnotationRecord rec{sqlite3_last_insert_rowid(db_), subject, label, who.id, verified, at, batch};
    Statement cnt(db_, R"sql(UPDATE tracks SET num_annotations =
                              (SELECT COUNT(*) FROM annotations WHERE project_id = ?1 AND subject = ?2)
                            WHERE project_id = ?1 AND track_id = ?2)sql");
    cnt.bind(1, project_id).bind(2, subject).run();
    return rec;
  }

  sqlite3* db_ = nullptr;
  mutable std::mutex mu_;
};

}  // namespace

std::unique_ptr<Store> make_sqlite_store(const std::string& path) { return std::make_unique<SqliteStore>(path); }

}  // namespace tracklab::store
