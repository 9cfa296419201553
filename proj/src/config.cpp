#include "tracklab/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "tracklab/error.hpp"

namespace tracklab::config {

using nlohmann::json;

namespace {

YAML::Node load(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::validation, fmt::format("malformed YAML: {}", e.what()));
  }
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, fmt::format("malformed JSON: {}", e.what()));
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (const auto v = node[key]) {
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(ErrorCode::validation, fmt::format("key '{}' has the wrong type", key));
    }
  }
}

template <typename T>
void read(const json& node, const char* key, T& out) {
  if (node.contains(key) && !node.at(key).is_null()) {
    try {
      out = node.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::validation, fmt::format("key '{}' has the wrong type", key));
    }
  }
}

// Both document kinds share field names, so one reader serves YAML and JSON.
template <typename Node>
void apply_pipeline(const Node& n, pipeline::PipelineConfig& cfg) {
  read(n, "zone_radius_m", cfg.zone_radius_m);
  read(n, "contact_agl_m", cfg.contact_agl_m);
  read(n, "pattern_alt_agl_m", cfg.pattern_alt_agl_m);
  read(n, "n_runways", cfg.n_runways);
  read(n, "lateral_gate_m", cfg.lateral_gate_m);
  read(n, "seed", cfg.seed);
  std::vector<double> edges;
  read(n, "histogram_edges_mps", edges);
  if (!edges.empty()) {
    if (edges.size() != cfg.histogram_edges_mps.size()) {
      fail(ErrorCode::validation, "histogram_edges_mps needs 4 edges for 5 bins");
    }
    std::copy(edges.begin(), edges.end(), cfg.histogram_edges_mps.begin());
  }
  cfg.validate();
}

template <typename Node>
geo::GeoPoint read_airport(const Node& n) {
  geo::GeoPoint p;
  double lat = 1000.0, lon = 1000.0;
  read(n, "latitude", lat);
  read(n, "longitude", lon);
  read(n, "elevation_m", p.altitude_m);
  p.latitude_deg = lat;
  p.longitude_deg = lon;
  if (!p.valid()) fail(ErrorCode::validation, "airport needs a valid latitude and longitude");
  return p;
}

template <typename Node>
ingest::FilterCriteria read_filter(const Node& n, const std::optional<geo::GeoPoint>& airport) {
  if (!airport) fail(ErrorCode::validation, "a filter needs the project airport");
  ingest::FilterCriteria f;
  f.airport_ref = *airport;
  read(n, "radius_nm", f.radius_nm);
  read(n, "agl_ceiling_ft", f.agl_ceiling_ft);
  f.validate();
  return f;
}

json filter_json(const ingest::FilterCriteria& f) {
  return {{"radius_nm", f.radius_nm}, {"agl_ceiling_ft", f.agl_ceiling_ft}};
}

}  // namespace

void apply_pipeline_yaml(std::string_view yaml_text, pipeline::PipelineConfig& cfg) {
  apply_pipeline(load(yaml_text), cfg);
}

void apply_pipeline_json(std::string_view json_text, pipeline::PipelineConfig& cfg) {
  apply_pipeline(parse_json(json_text), cfg);
}

std::string pipeline_config_json(const pipeline::PipelineConfig& cfg) {
  json j = {{"zone_radius_m", cfg.zone_radius_m},
            {"contact_agl_m", cfg.contact_agl_m},
            {"pattern_alt_agl_m", cfg.pattern_alt_agl_m},
            {"n_runways", cfg.n_runways},
            {"histogram_edges_mps", cfg.histogram_edges_mps},
            {"lateral_gate_m", cfg.lateral_gate_m},
            {"seed", cfg.seed}};
  return j.dump();
}

ServiceConfig parse_service_config(std::string_view yaml_text) {
  const auto root = load(yaml_text);
  ServiceConfig cfg;
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) fail(ErrorCode::validation, "service config must be a mapping");
  if (const auto s = root["server"]) {
    read(s, "host", cfg.host);
    read(s, "port", cfg.port);
  }
  if (const auto s = root["storage"]) {
    read(s, "backend", cfg.storage.backend);
    read(s, "path", cfg.storage.path);
    read(s, "url", cfg.storage.path);
  }
  if (const auto p = root["pipeline"]) apply_pipeline(p, cfg.pipeline);
  if (const auto m = root["ml"]) {
    read(m, "lambda", cfg.ml.svm.lambda);
    read(m, "epochs", cfg.ml.svm.epochs);
    read(m, "seed", cfg.ml.svm.seed);
    read(m, "n_sets", cfg.ml.n_sets);
    read(m, "split_seed", cfg.ml.split_seed);
    read(m, "max_iter", cfg.ml.kmeans.max_iter);
    read(m, "tol", cfg.ml.kmeans.tol);
    if (cfg.ml.n_sets < 2) fail(ErrorCode::validation, "ml.n_sets must be at least 2");
  }
  read(root, "token_ttl_s", cfg.token_ttl_s);
  if (const auto users = root["users"]) {
    if (!users.IsSequence()) fail(ErrorCode::validation, "key 'users' must be a list");
    for (const auto& u : users) {
      auth::User user;
      read(u, "username", user.username);
      read(u, "role", user.role);
      read(u, "password_hash", user.password_hash);
      if (user.password_hash.empty()) {
        std::string plain;
        read(u, "password", plain);
        if (plain.empty()) fail(ErrorCode::validation, fmt::format("user '{}' has no password", user.username));
        user.password_hash = auth::hash_password(plain);
      }
      if (user.username.empty()) fail(ErrorCode::validation, "a user entry has no username");
      cfg.users.push_back(std::move(user));
    }
  }
  return cfg;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::not_found, fmt::format("cannot read config file {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_service_config(ss.str());
}

ProjectConfig parse_project_yaml(std::string_view yaml_text, const pipeline::PipelineConfig& base) {
  ProjectConfig cfg;
  cfg.labels = ingest::parse_label_set(yaml_text);
  const auto root = load(yaml_text);
  if (const auto a = root["airport"]) cfg.airport = read_airport(a);
  if (const auto f = root["filter"]) cfg.filter = read_filter(f, cfg.airport);
  cfg.pipeline = base;
  if (const auto p = root["pipeline"]) apply_pipeline(p, cfg.pipeline);
  return cfg;
}

ProjectConfig parse_project_json(std::string_view json_text, const pipeline::PipelineConfig& base) {
  const json root = parse_json(json_text);
  if (!root.is_object()) fail(ErrorCode::validation, "project definition must be an object");
  ProjectConfig cfg;
  read(root, "project", cfg.labels.project_name);
  read(root, "name", cfg.labels.project_name);
  if (cfg.labels.project_name.empty()) fail(ErrorCode::validation, "missing required key 'project'");
  if (!root.contains("labels") || !root.at("labels").is_array()) {
    fail(ErrorCode::validation, "missing required key 'labels'");
  }
  for (const auto& l : root.at("labels")) {
    if (l.is_string()) {
      cfg.labels.labels.push_back(l.get<std::string>());
    } else if (l.is_object() && l.contains("name") && l.at("name").is_string()) {
      cfg.labels.labels.push_back(l.at("name").get<std::string>());
    } else {
      fail(ErrorCode::validation, "labels must be strings or {name: ...} objects");
    }
  }
  cfg.labels.validate();
  if (root.contains("airport") && !root.at("airport").is_null()) cfg.airport = read_airport(root.at("airport"));
  if (root.contains("filter") && !root.at("filter").is_null()) cfg.filter = read_filter(root.at("filter"), cfg.airport);
  cfg.pipeline = base;
  if (root.contains("pipeline") && !root.at("pipeline").is_null()) apply_pipeline(root.at("pipeline"), cfg.pipeline);
  return cfg;
}

store::Project create_project(store::Store& store, const ProjectConfig& cfg) {
  auto project = store.create_project(cfg.labels.project_name, cfg.labels, cfg.airport);
  if (cfg.filter) store.put_artifact(project.name, "config/filter", filter_json(*cfg.filter).dump());
  store.put_artifact(project.name, "config/pipeline", pipeline_config_json(cfg.pipeline));
  return project;
}

std::optional<ingest::FilterCriteria> project_filter(const store::Store& store, std::string_view project) {
  const auto text = store.get_artifact(project, "config/filter");
  if (!text) return std::nullopt;
  const auto p = store.get_project(project);
  return read_filter(parse_json(*text), p.airport);
}

pipeline::PipelineConfig project_pipeline(const store::Store& store, std::string_view project,
                                          const pipeline::PipelineConfig& base) {
  auto cfg = base;
  if (const auto text = store.get_artifact(project, "config/pipeline")) apply_pipeline_json(*text, cfg);
  return cfg;
}

void put_format(store::Store& store, std::string_view project, const ingest::TrackFormatDescriptor& desc) {
  store.get_project(project);
  store.put_artifact(project, "format/" + desc.format_name, ingest::to_yaml(desc));
}

ingest::TrackFormatDescriptor get_format(const store::Store& store, std::string_view project, std::string_view name) {
  const auto text = store.get_artifact(project, fmt::format("format/{}", name));
  if (!text) fail(ErrorCode::not_found, fmt::format("unknown track format '{}'", name));
  return ingest::parse_format_descriptor(*text);
}

}  // namespace tracklab::config
