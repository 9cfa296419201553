#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracklab/annotation.hpp"
#include "tracklab/auth.hpp"
#include "tracklab/ingest.hpp"
#include "tracklab/ml.hpp"
#include "tracklab/pipeline.hpp"
#include "tracklab/store.hpp"

namespace tracklab::config {

struct MlConfig {
  ml::SvmHyperparams svm;
  ml::KmeansOptions kmeans;
  int n_sets = 4;
  std::uint64_t split_seed = 0;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  store::StorageConfig storage;
  pipeline::PipelineConfig pipeline;
  MlConfig ml;
  std::vector<auth::User> users;
  double token_ttl_s = 3600.0;
};

/// Keys: server {host, port}, storage {backend, path}, pipeline {...},
/// ml {lambda, epochs, seed, n_sets, split_seed, max_iter, tol},
/// users [{username, password | password_hash, role}], token_ttl_s.
ServiceConfig parse_service_config(std::string_view yaml_text);
ServiceConfig load_service_config(const std::string& path);

/// Per-project settings that travel with the project definition.
struct ProjectConfig {
  LabelSet labels;
  std::optional<geo::GeoPoint> airport;  // altitude is the field elevation
  std::optional<ingest::FilterCriteria> filter;
  pipeline::PipelineConfig pipeline;
};

/// Keys: project, labels, airport {latitude, longitude, elevation_m},
/// filter {radius_nm, agl_ceiling_ft}, pipeline {...}. Pipeline fields not
/// given keep the values of `base`.
ProjectConfig parse_project_yaml(std::string_view yaml_text, const pipeline::PipelineConfig& base = {});
/// The same document as JSON (as posted to the service).
ProjectConfig parse_project_json(std::string_view json_text, const pipeline::PipelineConfig& base = {});

void apply_pipeline_yaml(std::string_view yaml_text, pipeline::PipelineConfig& cfg);
std::string pipeline_config_json(const pipeline::PipelineConfig& cfg);
void apply_pipeline_json(std::string_view json_text, pipeline::PipelineConfig& cfg);

/// Creates the project and stores its filter and pipeline settings.
store::Project create_project(store::Store& store, const ProjectConfig& cfg);
/// Filter and pipeline settings saved with a project.
std::optional<ingest::FilterCriteria> project_filter(const store::Store& store, std::string_view project);
pipeline::PipelineConfig project_pipeline(const store::Store& store, std::string_view project,
                                          const pipeline::PipelineConfig& base);

/// Registers a named track format for a project.
void put_format(store::Store& store, std::string_view project, const ingest::TrackFormatDescriptor& desc);
ingest::TrackFormatDescriptor get_format(const store::Store& store, std::string_view project, std::string_view name);

}  // namespace tracklab::config
