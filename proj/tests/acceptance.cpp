// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "support/geometry_checks.hpp"
#include "support/http.hpp"
#include "support/loop.hpp"
#include "support/ml_checks.hpp"
#include "support/paths.hpp"
#include "support/store_contract.hpp"
#include "support/temp_dir.hpp"

using namespace tracklab;
using support::json;

namespace {

struct Outcome {
  std::string failure;  // empty on success
  std::string detail;
};

// Integer percentage of the saved effort, by exact integer arithmetic.
long oracle_percent(long single, long batches, long total) {
  const long saved = total - single - batches;
  return (200 * saved + total) / (2 * total);
}

Outcome effort_oracle() {
  struct Row {
    std::size_t misclassified, batches, total;
    long expected;
  };
  const std::vector<Row> rows{{57, 6, 271, 77}, {19, 6, 273, 91}, {10, 6, 271, 94}};
  std::string detail;
  for (const auto& r : rows) {
    const auto got = workflow::to_percent(workflow::effort_reduction(r.misclassified, r.batches, r.total));
    const auto oracle = oracle_percent(long(r.misclassified), long(r.batches), long(r.total));
    detail += fmt::format("{}% ", got);
    if (got != r.expected || oracle != r.expected) {
      return {fmt::format("({},{},{}) gave {}%, oracle {}%, expected {}%", r.misclassified, r.batches, r.total, got,
                          oracle, r.expected)};
    }
  }
  return {{}, detail};
}

Outcome f1_consistency() { return {support::check_reference_f1(), fmt::format("{} rows", support::kReferenceRows.size())}; }

Outcome synthetic_loop() {
  auto s = store::make_memory_store();
  synth::SynthConfig sc;
  workflow::Settings settings;
  const auto r = support::run_loop(*s, sc, settings, true);
  const double bootstrap = 1.0 - double(r.verify[0].misclassified) / double(r.effort[0].num_tracks);
  const auto detail = fmt::format("kmeans {:.3f} (set 1 {:.3f}), svm:v1 {:.3f}, cycle 1 effort {:.3f}, loop {:.2f}s",
                                  r.kmeans_eval.accuracy, bootstrap, r.svm_v1_eval.accuracy,
                                  r.effort[0].effort_reduction, r.seconds);
  if (r.kmeans_eval.accuracy < 0.80) return {"kmeans accuracy below 0.80", detail};
  if (bootstrap < 0.80) return {"kmeans bootstrap accuracy below 0.80", detail};
  if (r.svm_v1_eval.accuracy < 0.95) return {"svm:v1 accuracy below 0.95", detail};
  if (r.effort.empty() || r.effort[0].effort_reduction < 0.70) return {"cycle 1 effort below 0.70", detail};
  if (!(r.svm_v1_eval.accuracy > r.kmeans_eval.accuracy)) return {"svm:v1 not above kmeans", detail};
  return {{}, detail};
}

Outcome geometry() {
  if (auto e = support::check_noiseless_line(); !e.empty()) return {e};
  if (auto e = support::check_noisy_clouds(); !e.empty()) return {e};
  if (auto e = support::check_histograms(10000); !e.empty()) return {e};
  synth::SynthConfig sc;
  if (auto e = support::check_synth_coverage(sc); !e.empty()) return {e};
  return {{}, "line, sigma 5 m clouds, 10000 histograms, synthetic coverage"};
}

Outcome ml_properties() {
  if (auto e = support::check_kmeans_monotone(100); !e.empty()) return {e};
  if (auto e = support::check_kmeans_fixed_point(); !e.empty()) return {e};
  if (auto e = support::check_svm_separable(); !e.empty()) return {e};
  if (auto e = support::check_determinism(); !e.empty()) return {e};
  return {{}, "100 kmeans datasets"};
}

Outcome store_contract() {
  support::TempDir dir;
  int counter = 0;
  const std::vector<std::pair<std::string, std::function<std::unique_ptr<store::Store>()>>> backends{
      {"file", [&] { return store::open_store({"file", dir.file(fmt::format("s{}.json", counter++))}); }},
      {"sqlite", [&] { return store::open_store({"sqlite", dir.file(fmt::format("s{}.db", counter++))}); }},
  };
  for (const auto& [name, open] : backends) {
    if (auto e = support::run_contract(open, 1000, 100, 17); !e.empty()) return {name + ": " + e};
  }
  return {{}, "file and sqlite, 1000 tracks x 100 queries"};
}

struct Call {
  std::string method, path, body, content_type;
  int expect;
};

Outcome api_contract() {
  support::TempDir dir;
  support::write_dataset(dir.path.string(), 40);
  auto s = store::make_memory_store();
  support::Api a(support::service_config(), *s);

  const std::vector<std::string> protected_paths{
      "/api/projects", "/api/projects/demo/tracks", "/api/projects/demo/tracks/x",
      "/api/projects/demo/annotations/export?format=csv", "/api/projects/demo/models/m/metrics",
      "/api/projects/demo/reports/effort"};
  for (const auto& path : protected_paths) {
    const auto r = a.client.Get(path);
    if (!r || r->status != 401) return {"anonymous GET " + path + " not 401"};
  }
  for (const auto& path : {"/api/projects/demo/pipeline/run", "/api/projects/demo/annotations",
                           "/api/projects/demo/annotations/batch", "/api/projects/demo/models/train"}) {
    const auto r = a.client.Post(path, "{}", "application/json");
    if (!r || r->status != 401) return {fmt::format("anonymous POST {} not 401", path)};
  }

  const auto bad = a.client.Post("/api/auth/login", R"({"username":"alice","password":"x"})", "application/json");
  if (!bad || bad->status != 401) return {"bad password not 401"};
  a.login();

  const std::string project =
      json{{"project", "demo"}, {"labels", {"landing", "touch_and_go", "takeoff"}},
           {"airport", {{"latitude", 42.2231}, {"longitude", -83.7456}, {"elevation_m", 251}}}}
          .dump();
  const std::string j = "application/json";
  const std::string b = "/api/projects/demo";
  const std::vector<Call> calls{
      {"POST", "/api/projects", project, j, 201},
      {"POST", "/api/projects", project, j, 409},
      {"POST", "/api/projects", "{}", j, 422},
      {"GET", "/api/projects", "", "", 200},
      {"POST", b + "/formats", support::slurp(dir.file("format.yaml")), "application/yaml", 201},
      {"POST", b + "/tracks?format=nope", "a,b\n", "text/csv", 404},
      {"POST", b + "/tracks?format=synth_positions", support::slurp(dir.file("tracks.csv")), "text/csv", 201},
      {"GET", b + "/tracks?limit=5", "", "", 200},
      {"GET", b + "/tracks/none", "", "", 404},
      {"GET", "/api/projects/none/tracks", "", "", 404},
      {"POST", b + "/models/train", R"({"algorithm":"kmeans","sets":[1]})", j, 422},
      {"POST", b + "/pipeline/run", "{}", j, 200},
      {"POST", b + "/models/train", R"({"algorithm":"kmeans","sets":[1]})", j, 201},
      {"POST", b + "/models/kmeans:v0/infer", R"({"set":1})", j, 200},
      {"POST", b + "/models/kmeans:v5/infer", R"({"set":1})", j, 404},
      {"GET", b + "/models/kmeans:v0/metrics", "", "", 404},
      {"POST", b + "/annotations", R"({"subject":"none","label":"landing"})", j, 404},
      {"POST", b + "/annotations", R"({"subject":"{first}","label":"hover"})", j, 422},
      {"POST", b + "/annotations/batch", R"({"query":{"set":1,"label":"landing","annotator":"kmeans:v0"},"label":"landing"})", j, 200},
      {"POST", b + "/annotations/ingest?algorithm=ext&version=1", "subject_id,label\nnone,landing\n", "text/csv", 201},
      {"GET", b + "/annotations/export?format=csv", "", "", 200},
      {"GET", b + "/annotations/export?format=json", "", "", 200},
      {"GET", b + "/annotations/export?format=xml", "", "", 422},
      {"POST", b + "/models/kmeans:v0/infer", R"({"set":4})", j, 200},
      {"GET", b + "/models/kmeans:v0/metrics?set=4", "", "", 422},
      {"VERIFY", "", "", "", 0},
      {"GET", b + "/models/kmeans:v0/metrics?set=4", "", "", 200},
      {"GET", b + "/models/kmeans:v0/metrics", "", "", 200},
      {"GET", b + "/reports/effort", "", "", 200},
      {"GET", b + "/reports/effort?format=json", "", "", 200},
      {"GET", "/api/unknown", "", "", 404},
  };
  const workflow::OracleVerifier truth(synth::parse_truth_csv(support::slurp(dir.file("truth.csv"))));
  std::string first;  // a segment id, known once the pipeline has run
  for (auto c : calls) {
    if (c.method == "VERIFY") {
      support::http_verify(a, "demo", 4, "kmeans:v0", truth);
      continue;
    }
    if (const auto at = c.body.find("{first}"); at != std::string::npos) c.body.replace(at, 7, first);
    const auto r = c.method == "GET" ? a.get(c.path) : a.post(c.path, c.body, c.content_type);
    if (c.path == b + "/pipeline/run" && r && r->status == 200) {
      first = a.get_json(b + "/tracks?kind=segment&limit=1")["tracks"][0]["track_id"];
    }
    const int got = r ? r->status : -1;
    if (got != c.expect) return {fmt::format("{} {} returned {}, expected {}", c.method, c.path, got, c.expect)};
  }
  {
    workflow::WorkflowLock held("demo");
    const auto r = a.post(b + "/pipeline/run", std::string("{}"), j);
    if (!r || r->status != 409) return {"pipeline under lock not 409"};
  }
  s->inject_write_failure(0);
  const auto failed = a.post(b + "/annotations", json{{"subject", first}, {"label", "landing"}}.dump(), j);
  s->inject_write_failure(std::nullopt);
  if (!failed || failed->status != 503) return {"injected storage failure not 503"};
  a.server.authenticator().advance_clock(1e6);
  const auto expired = a.get("/api/projects");
  if (!expired || expired->status != 401) return {"expired token not 401"};

  support::TempDir same;
  support::write_dataset(same.path.string(), 100);
  const auto from_cli = support::cli_path(same.path.string());
  auto hs = store::make_memory_store();
  const auto from_http = support::http_path(same.path.string(), *hs);
  if (from_cli != from_http) return {"CLI and HTTP reports differ:\n" + from_cli + "---\n" + from_http};
  return {{}, fmt::format("{} calls, report {} bytes identical", calls.size(), from_cli.size())};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "effort metric", 1.0, effort_oracle},
      {2, "F1 consistency", 1.0, f1_consistency},
      {3, "synthetic loop", 60.0, synthetic_loop},
      {4, "pipeline geometry", 0.0, geometry},
      {5, "ml properties", 0.0, ml_properties},
      {6, "store contract", 0.0, store_contract},
      {7, "api contract", 0.0, api_contract},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.failure = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.failure.empty() && c.budget_s > 0 && secs >= c.budget_s) {
      o.failure = fmt::format("took {:.3f}s, budget {:.0f}s", secs, c.budget_s);
    }
    const bool ok = o.failure.empty();
    failed += ok ? 0 : 1;
    fmt::print("{} {} {} ({:.3f}s){}{}\n", ok ? "PASS" : "FAIL", c.id, c.name, secs, (ok ? o.detail : o.failure).empty() ? "" : ": ",
               ok ? o.detail : o.failure);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
