#include "tracklab/server.hpp"

#include <httplib.h>

#include <charconv>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "tracklab/ingest.hpp"
#include "tracklab/workflow.hpp"

namespace tracklab::api {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::validation:
    case ErrorCode::undefined_direction:
      return 422;
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::conflict:
      return 409;
    case ErrorCode::unauthenticated:
      return 401;
    case ErrorCode::storage:
      return 503;
    case ErrorCode::internal:
      break;
  }
  return 500;
}

std::string_view wire_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
      return "invalid_argument";
    case ErrorCode::validation:
      return "validation";
    case ErrorCode::undefined_direction:
      return "undefined_direction";
    case ErrorCode::not_found:
      return "not_found";
    case ErrorCode::conflict:
      return "conflict";
    case ErrorCode::unauthenticated:
      return "unauthenticated";
    case ErrorCode::storage:
      return "storage_unavailable";
    case ErrorCode::internal:
      break;
  }
  return "internal";
}

namespace {

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) fail(ErrorCode::validation, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, fmt::format("malformed JSON body: {}", e.what()));
  }
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorCode::validation, fmt::format("missing required field '{}'", key));
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::validation, fmt::format("field '{}' has the wrong type", key));
  }
}

long parse_int(const std::string& text, const char* what) {
  long v = 0;
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) fail(ErrorCode::validation, fmt::format("'{}' must be an integer", what));
  return v;
}

bool parse_bool(const std::string& text, const char* what) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  fail(ErrorCode::validation, fmt::format("'{}' must be true or false", what));
}

double parse_double(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::logic_error&) {
  }
  fail(ErrorCode::validation, fmt::format("'{}' must be a number", what));
}

// Filters arrive as strings (query parameters) or JSON values (batch body).
store::Query make_query(const std::map<std::string, json>& in) {
  store::Query q;
  auto str = [&](const char* key) -> std::optional<std::string> {
    const auto it = in.find(key);
    if (it == in.end() || it->second.is_null()) return std::nullopt;
    if (it->second.is_string()) return it->second.get<std::string>();
    return it->second.dump();
  };
  if (auto v = str("label")) q.label = *v;
  if (auto v = str("annotator")) q.annotator = *v;
  if (auto v = str("annotator_kind")) q.annotator_kind = annotator_kind_from_string(*v);
  if (auto v = str("verified")) q.verified = parse_bool(*v, "verified");
  if (auto v = str("runway")) q.runway_id = *v;
  if (auto v = str("runway_id")) q.runway_id = *v;
  if (auto v = str("kind")) q.kind = store::subject_kind_from_string(*v);
  if (auto v = str("set")) q.set_id = static_cast<int>(parse_int(*v, "set"));
  if (auto v = str("set_id")) q.set_id = static_cast<int>(parse_int(*v, "set_id"));
  if (auto v = str("limit")) {
    const long n = parse_int(*v, "limit");
    if (n < 0) fail(ErrorCode::validation, "'limit' must be non-negative");
    q.limit = static_cast<std::size_t>(n);
  }
  if (auto v = str("offset")) {
    const long n = parse_int(*v, "offset");
    if (n < 0) fail(ErrorCode::validation, "'offset' must be non-negative");
    q.offset = static_cast<std::size_t>(n);
  }
  if (auto v = str("bbox")) {
    const auto parts = ingest::split_delimited(*v, ',');
    if (parts.size() != 4) fail(ErrorCode::validation, "'bbox' must be min_lat,min_lon,max_lat,max_lon");
    q.bbox = store::BoundingBox{parse_double(parts[0], "bbox"), parse_double(parts[2], "bbox"),
                                parse_double(parts[1], "bbox"), parse_double(parts[3], "bbox")};
  }
  const auto start = str("start_time"), end = str("end_time");
  if (start || end) {
    q.time_range = store::TimeRange{start ? parse_double(*start, "start_time") : -1e300,
                                    end ? parse_double(*end, "end_time") : 1e300};
  }
  q.validate();
  return q;
}

store::Query query_from_params(const httplib::Request& req) {
  std::map<std::string, json> in;
  for (const auto& [k, v] : req.params) in[k] = v;
  return make_query(in);
}

store::Query query_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::validation, "'query' must be an object");
  std::map<std::string, json> in;
  for (const auto& [k, v] : j.items()) {
    if (v.is_boolean()) {
      in[k] = v.get<bool>() ? "true" : "false";
    } else {
      in[k] = v;
    }
  }
  return make_query(in);
}

json to_json(const store::Project& p) {
  json j = {{"id", p.id}, {"name", p.name}, {"labels", p.label_set.labels}, {"created_at", p.created_at}};
  if (p.airport) {
    j["airport"] = {{"latitude", p.airport->latitude_deg},
                    {"longitude", p.airport->longitude_deg},
                    {"elevation_m", p.airport->altitude_m}};
  } else {
    j["airport"] = nullptr;
  }
  return j;
}

json to_json(const store::TrackMeta& m) {
  json j = {{"track_id", m.track_id},
            {"kind", store::to_string(m.kind)},
            {"num_points", m.num_points},
            {"start_time", m.start_time},
            {"end_time", m.end_time},
            {"num_annotations", m.num_annotations},
            {"set_id", m.set_id ? json(*m.set_id) : json(nullptr)}};
  if (m.segment) {
    const auto& s = *m.segment;
    j["segment"] = {{"parent_track_id", s.parent_track_id},
                    {"start_index", s.start_index},
                    {"end_index", s.end_index},
                    {"avg_direction_deg", s.avg_direction_deg ? json(*s.avg_direction_deg) : json(nullptr)},
                    {"runway_id", s.runway_id},
                    {"feature", s.feature},
                    {"contains_contact", s.contains_contact},
                    {"climbs_out", s.climbs_out}};
  }
  return j;
}

json to_json(const AnnotationRecord& r, const std::map<std::int64_t, AnnotatorRecord>& annotators) {
  json j = {{"id", r.id},         {"subject", r.subject},   {"label", r.label},
            {"annotator_id", r.annotator_id}, {"verified", r.verified}, {"created_at", r.created_at},
            {"batch_id", r.batch_id}};
  if (const auto it = annotators.find(r.annotator_id); it != annotators.end()) {
    j["annotator"] = it->second.qualified_name();
    j["annotator_kind"] = to_string(it->second.kind);
  }
  return j;
}

json report_json(const ml::EvalReport& r) { return json::parse(ml::to_json(r)); }

}  // namespace

struct ApiServer::Impl {
  config::ServiceConfig cfg;
  store::Store& store;
  auth::Authenticator auth;
  httplib::Server http;

  Impl(config::ServiceConfig c, store::Store& s)
      : cfg(std::move(c)), store(s), auth(cfg.users, cfg.token_ttl_s) {}

  workflow::Settings settings(const std::string& project) const {
    workflow::Settings s;
    s.pipeline = config::project_pipeline(store, project, cfg.pipeline);
    s.ml = cfg.ml;
    return s;
  }

  std::map<std::int64_t, AnnotatorRecord> annotators() const {
    std::map<std::int64_t, AnnotatorRecord> out;
    for (auto& a : store.list_annotators()) out.emplace(a.id, a);
    return out;
  }

  auth::Session authorize(const httplib::Request& req) const {
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (header.rfind(kBearer, 0) != 0) fail(ErrorCode::unauthenticated, "missing bearer token");
    return auth.check(header.substr(kBearer.size()));
  }

  AnnotatorRecord human(const auth::Session& s) {
    return store.register_annotator(AnnotatorRecord::human(s.username, s.role));
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&, const auth::Session&)>;

  httplib::Server::Handler wrap(Handler h, bool needs_auth = true) {
    return [this, h = std::move(h), needs_auth](const httplib::Request& req, httplib::Response& res) {
      try {
        const auth::Session session = needs_auth ? authorize(req) : auth::Session{};
        h(req, res, session);
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(json{{"error", {{"code", wire_code(e.code())}, {"message", e.what()}}}}.dump(),
                        "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump(), "application/json");
      }
    };
  }

  static void send(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  void routes() {
    http.Post("/api/auth/login", wrap(
                                     [this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
                                       const auto body = parse_body(req);
                                       const auto s = auth.login(field<std::string>(body, "username"),
                                                                 field<std::string>(body, "password"));
                                       send(res, {{"token", s.token},
                                                  {"username", s.username},
                                                  {"role", s.role},
                                                  {"expires_at", s.expires_at}});
                                     },
                                     false));

    http.Post("/api/projects", wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
      const auto cfg = config::parse_project_json(req.body, this->cfg.pipeline);
      send(res, to_json(config::create_project(store, cfg)), 201);
    }));

    http.Get("/api/projects", wrap([this](const httplib::Request&, httplib::Response& res, const auth::Session&) {
      json out = json::array();
      for (const auto& p : store.list_projects()) out.push_back(to_json(p));
      send(res, {{"projects", out}});
    }));

    http.Post(R"(/api/projects/([^/]+)/formats)",
              wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
                const std::string project = req.matches[1];
                const auto desc = ingest::parse_format_descriptor(req.body);
                config::put_format(store, project, desc);
                send(res, {{"format_name", desc.format_name}}, 201);
              }));

    http.Post(R"(/api/projects/([^/]+)/tracks)",
              wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
                const std::string project = req.matches[1];
                if (!req.has_param("format")) fail(ErrorCode::validation, "missing query parameter 'format'");
                const auto desc = config::get_format(store, project, req.get_param_value("format"));
                const auto summary = workflow::ingest_tracks(store, project, req.body, desc);
                json errors = json::array();
                for (const auto& e : summary.errors) errors.push_back({{"row", e.row}, {"message", e.message}});
                send(res,
                     {{"rows", summary.rows},
                      {"rejected_rows", summary.rejected_rows},
                      {"tracks", summary.tracks},
                      {"errors", errors}},
                     201);
              }));

    http.Get(R"(/api/projects/([^/]+)/tracks)",
             wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
               const std::string project = req.matches[1];
               const auto q = query_from_params(req);
               json tracks = json::array();
               for (const auto& m : store.list_meta(project, q)) tracks.push_back(to_json(m));
               send(res, {{"count", tracks.size()}, {"tracks", tracks}});
             }));

    http.Get(R"(/api/projects/([^/]+)/tracks/([^/]+))",
             wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
               const auto rec = store.get_track(std::string(req.matches[1]), std::string(req.matches[2]));
               const auto names = annotators();
               json points = json::array();
               for (const auto& p : rec.track.points) {
                 points.push_back({p.timestamp_s, p.geo.latitude_deg, p.geo.longitude_deg, p.geo.altitude_m});
               }
               json annotations = json::array();
               for (const auto& a : rec.annotations) annotations.push_back(to_json(a, names));
               send(res, {{"meta", to_json(rec.meta)}, {"points", points}, {"annotations", annotations}});
             }));

    http.Post(R"(/api/projects/([^/]+)/annotations)",
              wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session& s) {
                const std::string project = req.matches[1];
                const auto body = parse_body(req);
                const auto who = human(s);
                const auto rec = store.annotate(project, field<std::string>(body, "subject"),
                                                field<std::string>(body, "label"), who.id);
                send(res, to_json(rec, annotators()), 201);
              }));

    http.Post(R"(/api/projects/([^/]+)/annotations/batch)",
              wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session& s) {
                const std::string project = req.matches[1];
                const auto body = parse_body(req);
                const auto q = query_from_json(body.contains("query") ? body.at("query") : json::object());
                const auto who = human(s);
                const auto n = store.batch_annotate(project, q, field<std::string>(body, "label"), who.id);
                send(res, {{"count", n}});
              }));

    http.Post(R"(/api/projects/([^/]+)/annotations/ingest)",
              wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
                const std::string project = req.matches[1];
                const auto proj = store.get_project(project);
                ingest::AnnotationIngestDescriptor desc;
                desc.algorithm = req.get_param_value("algorithm");
                desc.version = req.get_param_value("version");
                if (desc.algorithm.empty() || desc.version.empty()) {
                  fail(ErrorCode::validation, "query parameters 'algorithm' and 'version' are required");
                }
                desc.labels = proj.label_set.labels;
                const auto table = ingest::parse_annotation_table(req.body);
                const auto rows = table.subject_labels();
                auto result = ingest::ingest_external_annotations(
                    rows, desc, [&](std::string_view id) { return store.has_track(project, id); });
                const auto annotator = store.register_annotator(result.annotator);
                for (auto& r : result.records) r.annotator_id = annotator.id;
                const auto n = store.put_annotations(project, annotator.id, result.records);
                json errors = json::array();
                for (const auto& e : result.errors) errors.push_back({{"row", e.row}, {"message", e.message}});
                send(res, {{"annotator", annotator.qualified_name()}, {"count", n}, {"errors", errors}}, 201);
              }));

    http.Get(R"(/api/projects/([^/]+)/annotations/export)",
             wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
               const std::string project = req.matches[1];
               const auto format = req.has_param("format") ? req.get_param_value("format") : "csv";
               if (format == "csv") {
                 res.set_content(store::export_annotations(store, project, store::ExportFormat::csv), "text/csv");
               } else if (format == "json") {
                 res.set_content(store::export_annotations(store, project, store::ExportFormat::json),
                                 "application/json");
               } else {
                 fail(ErrorCode::validation, fmt::format("unknown export format '{}'", format));
               }
             }));

    http.Post(R"(/api/projects/([^/]+)/pipeline/run)",
              wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
                const std::string project = req.matches[1];
                const auto summary = workflow::run_pipeline(store, project, settings(project));
                json runways = json::array();
                for (const auto& rw : summary.runways) {
                  runways.push_back({{"id", rw.id},
                                     {"latitude", rw.centroid.latitude_deg},
                                     {"longitude", rw.centroid.longitude_deg},
                                     {"heading_deg", rw.heading_deg},
                                     {"length_m", rw.length_m}});
                }
                send(res, {{"tracks", summary.tracks},
                           {"segments", summary.segments},
                           {"runways", runways},
                           {"set_sizes", summary.set_sizes}});
              }));

    http.Post(R"(/api/projects/([^/]+)/models/train)",
              wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
                const std::string project = req.matches[1];
                const auto body = parse_body(req);
                const auto algorithm = body.contains("algorithm") ? field<std::string>(body, "algorithm") : "svm";
                const auto sets = field<std::vector<int>>(body, "sets");
                const auto ref = workflow::train_model(store, project, algorithm, sets, settings(project));
                send(res, {{"model", ref}, {"training_sets", sets}}, 201);
              }));

    http.Post(R"(/api/projects/([^/]+)/models/([^/]+)/infer)",
              wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
                const std::string project = req.matches[1];
                const std::string model = req.matches[2];
                const auto body = parse_body(req);
                const auto n = workflow::infer(store, project, model, field<int>(body, "set"));
                send(res, {{"model", model}, {"count", n}});
              }));

    http.Get(R"(/api/projects/([^/]+)/models/([^/]+)/metrics)",
             wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
               const std::string project = req.matches[1];
               const std::string model = req.matches[2];
               workflow::load_model(store, project, model);
               if (req.has_param("set")) {
                 const int set = static_cast<int>(parse_int(req.get_param_value("set"), "set"));
                 send(res, report_json(workflow::evaluate_on(store, project, model, set)));
                 return;
               }
               const auto report = workflow::stored_metrics(store, project, model);
               if (!report) fail(ErrorCode::not_found, fmt::format("model '{}' has not been evaluated", model));
               send(res, report_json(*report));
             }));

    http.Get(R"(/api/projects/([^/]+)/reports/effort)",
             wrap([this](const httplib::Request& req, httplib::Response& res, const auth::Session&) {
               const std::string project = req.matches[1];
               store.get_project(project);
               const int validation = req.has_param("validation_set")
                                          ? static_cast<int>(parse_int(req.get_param_value("validation_set"),
                                                                       "validation_set"))
                                          : cfg.ml.n_sets;
               const auto rows = workflow::effort_report(store, project, validation);
               const auto format = req.has_param("format") ? req.get_param_value("format") : "csv";
               if (format == "csv") {
                 res.set_content(workflow::effort_csv(rows), "text/csv");
                 return;
               }
               if (format != "json") fail(ErrorCode::validation, fmt::format("unknown report format '{}'", format));
               res.set_content(workflow::effort_json(rows), "application/json");
             }));

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(json{{"error", {{"code", res.status == 404 ? "not_found" : "internal"},
                                        {"message", httplib::status_message(res.status)}}}}
                            .dump(),
                        "application/json");
      }
    });
  }
};

ApiServer::ApiServer(config::ServiceConfig cfg, store::Store& store)
    : impl_(std::make_unique<Impl>(std::move(cfg), store)) {
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->http.bind_to_any_port(host);
    if (p < 0) fail(ErrorCode::internal, fmt::format("cannot bind {}", host));
    return p;
  }
  if (!impl_->http.bind_to_port(host, port)) fail(ErrorCode::internal, fmt::format("cannot bind {}:{}", host, port));
  return port;
}

void ApiServer::run() { impl_->http.listen_after_bind(); }

int ApiServer::start(const std::string& host, int port) {
  const int p = bind(host, port);
  thread_ = std::thread([this] { run(); });
  impl_->http.wait_until_ready();
  return p;
}

void ApiServer::stop() {
  impl_->http.stop();
  if (thread_.joinable()) thread_.join();
}

auth::Authenticator& ApiServer::authenticator() { return impl_->auth; }

}  // namespace tracklab::api
