#include "tracklab/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "tracklab/config.hpp"
#include "tracklab/error.hpp"
#include "tracklab/server.hpp"
#include "tracklab/synth.hpp"
#include "tracklab/workflow.hpp"

namespace tracklab::cli {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::not_found, fmt::format("cannot read {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::storage, fmt::format("cannot write {}", path.string()));
  out << text;
}

std::vector<int> parse_sets(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : ingest::split_delimited(text, ',')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::logic_error&) {
      fail(ErrorCode::invalid_argument, fmt::format("bad set list '{}'", text));
    }
  }
  return out;
}

api::ApiServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Track annotation service and workflow tools", "tracklab"};
  app.require_subcommand(1);

  std::string config_path, store_path, backend;
  app.add_option("--config", config_path, "Service config YAML");
  app.add_option("--store", store_path, "Storage path, overriding the config");
  app.add_option("--backend", backend, "Storage backend: file or sqlite")->check(CLI::IsMember({"file", "sqlite"}));

  std::string project, host, format_path, tracks_path, project_file, annotations_path, algorithm, version, model,
      truth_path, sets_text, out_dir, report_format = "csv";
  int port = 0, set_id = 1, validation_set = 0, n_per_behavior = 100, max_circuits = 0;
  std::uint64_t seed = 7;

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic airport dataset");
  synth_cmd->add_option("--out", out_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", seed);
  synth_cmd->add_option("--n-per-behavior", n_per_behavior);
  synth_cmd->add_option("--max-circuits", max_circuits);
  synth_cmd->add_option("--project", project, "Project name for project.yaml");

  auto* ingest_cmd = app.add_subcommand("ingest", "Load tracks or external annotations");
  ingest_cmd->add_option("--project", project)->required();
  ingest_cmd->add_option("--project-file", project_file, "Project YAML; creates the project if missing");
  ingest_cmd->add_option("--format", format_path, "Track format YAML");
  ingest_cmd->add_option("--tracks", tracks_path, "Delimited position file");
  ingest_cmd->add_option("--annotations", annotations_path, "Delimited subject_id,label table");
  ingest_cmd->add_option("--algorithm", algorithm, "Algorithm that produced the annotations");
  ingest_cmd->add_option("--version", version, "Algorithm version");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Detect runways, segment tracks and split sets");
  pipeline_cmd->add_option("--project", project)->required();

  auto* bootstrap = app.add_subcommand("bootstrap", "Kmeans pre-labels for one set");
  bootstrap->add_option("--project", project)->required();
  bootstrap->add_option("--set", set_id);

  auto* verify = app.add_subcommand("verify", "Verify a set's pre-labels");
  verify->add_option("--project", project)->required();
  verify->add_option("--set", set_id);
  verify->add_option("--oracle", truth_path, "Truth CSV written by synth")->required();

  auto* train = app.add_subcommand("train", "Train a model on verified sets");
  train->add_option("--project", project)->required();
  train->add_option("--algorithm", algorithm)->default_val("svm");
  train->add_option("--sets", sets_text, "Comma-separated set ids")->required();

  auto* infer_cmd = app.add_subcommand("infer", "Pre-label a set with a model");
  infer_cmd->add_option("--project", project)->required();
  infer_cmd->add_option("--model", model)->required();
  infer_cmd->add_option("--set", set_id)->required();

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model on a held-out set");
  evaluate->add_option("--project", project)->required();
  evaluate->add_option("--model", model)->required();
  evaluate->add_option("--set", validation_set, "Validation set (defaults to the last set)");

  auto* report = app.add_subcommand("report", "Print the annotation effort report");
  report->add_option("--project", project)->required();
  report->add_option("--validation-set", validation_set);
  report->add_option("--format", report_format)->check(CLI::IsMember({"csv", "json"}));

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    config::ServiceConfig cfg;
    if (!config_path.empty()) cfg = config::load_service_config(config_path);
    if (!store_path.empty()) cfg.storage.path = store_path;
    if (!backend.empty()) cfg.storage.backend = backend;
    if (validation_set == 0) validation_set = cfg.ml.n_sets;

    if (*synth_cmd) {
      synth::SynthConfig sc;
      sc.seed = seed;
      sc.n_per_behavior = n_per_behavior;
      sc.max_circuits = max_circuits;
      const auto data = synth::synth_generate(sc);
      const std::filesystem::path dir(out_dir);
      std::filesystem::create_directories(dir);
      write_file(dir / "tracks.csv", synth::tracks_csv(data.tracks));
      write_file(dir / "truth.csv", synth::truth_csv(data.truth));
      write_file(dir / "format.yaml", synth::format_yaml());
      write_file(dir / "project.yaml", synth::project_yaml(sc, project.empty() ? "synthetic" : project));
      fmt::print(out, "wrote {} tracks and {} truth segments to {}\n", data.tracks.size(), data.truth.size(),
                 dir.string());
      return 0;
    }

    auto store = store::open_store(cfg.storage);
    auto settings = [&] {
      workflow::Settings s;
      s.pipeline = config::project_pipeline(*store, project, cfg.pipeline);
      s.ml = cfg.ml;
      return s;
    };

    if (*serve) {
      api::ApiServer server(cfg, *store);
      const int bound = server.bind(host.empty() ? cfg.host : host, port ? port : cfg.port);
      fmt::print(out, "listening on {}:{}\n", host.empty() ? cfg.host : host, bound);
      out.flush();
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_server = nullptr;
      store->flush();
      return 0;
    }

    if (*ingest_cmd) {
      if (!project_file.empty()) {
        auto pc = config::parse_project_yaml(read_file(project_file), cfg.pipeline);
        pc.labels.project_name = project;
        bool exists = false;
        for (const auto& p : store->list_projects()) exists = exists || p.name == project;
        if (!exists) config::create_project(*store, pc);
      }
      if (tracks_path.empty() && annotations_path.empty()) {
        fail(ErrorCode::invalid_argument, "ingest needs --tracks or --annotations");
      }
      if (!tracks_path.empty()) {
        if (format_path.empty()) fail(ErrorCode::invalid_argument, "--tracks needs --format");
        const auto desc = ingest::parse_format_descriptor(read_file(format_path));
        config::put_format(*store, project, desc);
        const auto s = workflow::ingest_tracks(*store, project, read_file(tracks_path), desc);
        fmt::print(out, "rows {} rejected {} tracks {}\n", s.rows, s.rejected_rows, s.tracks);
      }
      if (!annotations_path.empty()) {
        if (algorithm.empty() || version.empty()) {
          fail(ErrorCode::invalid_argument, "--annotations needs --algorithm and --version");
        }
        const auto proj = store->get_project(project);
        ingest::AnnotationIngestDescriptor desc{algorithm, version, proj.label_set.labels};
        const auto table = ingest::parse_annotation_table(read_file(annotations_path));
        const auto rows = table.subject_labels();
        auto result = ingest::ingest_external_annotations(
            rows, desc, [&](std::string_view id) { return store->has_track(project, id); });
        const auto annotator = store->register_annotator(result.annotator);
        for (auto& r : result.records) r.annotator_id = annotator.id;
        const auto n = store->put_annotations(project, annotator.id, result.records);
        for (const auto& e : result.errors) fmt::print(err, "row {}: {}\n", e.row, e.message);
        fmt::print(out, "annotations {} from {} rejected {}\n", n, annotator.qualified_name(), result.errors.size());
      }
    } else if (*pipeline_cmd) {
      const auto s = workflow::run_pipeline(*store, project, settings());
      fmt::print(out, "tracks {} segments {} runways", s.tracks, s.segments);
      for (const auto& rw : s.runways) fmt::print(out, " {}@{:.1f}", rw.id, rw.heading_deg);
      fmt::print(out, "\nsets");
      for (const auto n : s.set_sizes) fmt::print(out, " {}", n);
      fmt::print(out, "\n");
    } else if (*bootstrap) {
      const auto ref = workflow::bootstrap_cycle(*store, project, set_id, settings());
      fmt::print(out, "{} pre-labeled set {}\n", ref, set_id);
    } else if (*verify) {
      const workflow::OracleVerifier oracle(synth::parse_truth_csv(read_file(truth_path)));
      const auto c = workflow::verify_cycle(*store, project, set_id, oracle);
      fmt::print(out, "({}, {})\n", c.misclassified, c.batch_ops);
    } else if (*train) {
      const auto ref = workflow::train_model(*store, project, algorithm, parse_sets(sets_text), settings());
      fmt::print(out, "{}\n", ref);
    } else if (*infer_cmd) {
      const auto n = workflow::infer(*store, project, model, set_id);
      fmt::print(out, "{} annotations from {} on set {}\n", n, model, set_id);
    } else if (*evaluate) {
      const auto r = workflow::evaluate_on(*store, project, model, validation_set);
      out << ml::to_json(r) << "\n";
    } else if (*report) {
      const auto rows = workflow::effort_report(*store, project, validation_set);
      if (report_format == "csv") {
        out << workflow::effort_csv(rows);
      } else {
        out << workflow::effort_json(rows) << "\n";
      }
    }
    store->flush();
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tracklab::cli
