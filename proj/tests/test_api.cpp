#include <doctest.h>

#include <thread>

#include "support/cycle_fixture.hpp"
#include "support/http.hpp"
#include "support/paths.hpp"
#include "support/temp_dir.hpp"
#include "tracklab/error.hpp"
#include "tracklab/server.hpp"
#include "tracklab/workflow.hpp"

using namespace tracklab;
using support::Api;
using support::json;

namespace {

int status(const httplib::Result& r) { return r ? r->status : -1; }

std::string error_code(const httplib::Result& r) { return json::parse(r->body).at("error").at("code"); }

// A project with the synthetic dataset uploaded and the pipeline run.
struct Loaded {
  support::TempDir dir;
  std::unique_ptr<store::Store> store = store::make_memory_store();
  std::unique_ptr<Api> api;

  explicit Loaded(int n_per_behavior = 40) {
    support::write_dataset(dir.path.string(), n_per_behavior);
    api = std::make_unique<Api>(support::service_config(), *store);
    api->login();
    api->post_json("/api/projects", {{"project", "demo"},
                                     {"labels", {"landing", "touch_and_go", "takeoff"}},
                                     {"airport", {{"latitude", 42.2231}, {"longitude", -83.7456}, {"elevation_m", 251}}}},
                   201);
    Api::check(api->post("/api/projects/demo/formats", support::slurp(dir.file("format.yaml")), "application/yaml"),
               201, "formats");
    Api::check(api->post("/api/projects/demo/tracks?format=synth_positions", support::slurp(dir.file("tracks.csv")),
                         "text/csv"),
               201, "tracks");
  }
};

}  // namespace

TEST_CASE("error codes map to statuses") {
  CHECK(api::http_status(ErrorCode::invalid_argument) == 422);
  CHECK(api::http_status(ErrorCode::validation) == 422);
  CHECK(api::http_status(ErrorCode::undefined_direction) == 422);
  CHECK(api::http_status(ErrorCode::not_found) == 404);
  CHECK(api::http_status(ErrorCode::conflict) == 409);
  CHECK(api::http_status(ErrorCode::unauthenticated) == 401);
  CHECK(api::http_status(ErrorCode::storage) == 503);
  CHECK(api::http_status(ErrorCode::internal) == 500);
  CHECK(api::wire_code(ErrorCode::storage) == "storage_unavailable");
  CHECK(api::wire_code(ErrorCode::validation) == "validation");
}

TEST_CASE("login and token checks") {
  auto store = store::make_memory_store();
  Api a(support::service_config(), *store);
  auto bad = a.client.Post("/api/auth/login", R"({"username":"alice","password":"nope"})", "application/json");
  CHECK(status(bad) == 401);
  CHECK(error_code(bad) == "unauthenticated");
  CHECK(status(a.client.Post("/api/auth/login", R"({"username":"mallory","password":"x"})", "application/json")) == 401);
  CHECK(status(a.client.Post("/api/auth/login", R"({"username":"alice"})", "application/json")) == 422);
  CHECK(status(a.client.Post("/api/auth/login", "{not json", "application/json")) == 422);

  const auto ok = a.client.Post("/api/auth/login", R"({"username":"victor","password":"verify-me"})", "application/json");
  REQUIRE(status(ok) == 200);
  const auto session = json::parse(ok->body);
  CHECK(session["role"] == "verifier");
  CHECK(session["token"].get<std::string>().size() == 48);

  a.token = session["token"];
  CHECK(status(a.get("/api/projects")) == 200);
  a.token = "0123";
  CHECK(status(a.get("/api/projects")) == 401);
  a.token = session["token"];
  a.server.authenticator().advance_clock(3601);
  CHECK(status(a.get("/api/projects")) == 401);
}

TEST_CASE("every protected endpoint rejects anonymous requests") {
  auto store = store::make_memory_store();
  Api a(support::service_config(), *store);
  const std::vector<std::pair<std::string, std::string>> routes{
      {"POST", "/api/projects"},
      {"GET", "/api/projects"},
      {"POST", "/api/projects/p/formats"},
      {"POST", "/api/projects/p/tracks?format=f"},
      {"GET", "/api/projects/p/tracks"},
      {"GET", "/api/projects/p/tracks/t"},
      {"POST", "/api/projects/p/annotations"},
      {"POST", "/api/projects/p/annotations/batch"},
      {"POST", "/api/projects/p/annotations/ingest"},
      {"GET", "/api/projects/p/annotations/export?format=csv"},
      {"POST", "/api/projects/p/pipeline/run"},
      {"POST", "/api/projects/p/models/train"},
      {"POST", "/api/projects/p/models/m/infer"},
      {"GET", "/api/projects/p/models/m/metrics"},
      {"GET", "/api/projects/p/reports/effort"},
  };
  for (const auto& [method, path] : routes) {
    CAPTURE(path);
    const auto r = method == "GET" ? a.client.Get(path) : a.client.Post(path, "{}", "application/json");
    CHECK(status(r) == 401);
    if (r) CHECK(error_code(r) == "unauthenticated");
  }
  httplib::Headers wrong{{"Authorization", "Token abc"}};
  CHECK(status(a.client.Get("/api/projects", wrong)) == 401);
  a.login();
  const auto missing = a.get("/api/nothing-here");
  CHECK(status(missing) == 404);
  CHECK(error_code(missing) == "not_found");
}

TEST_CASE("project, format and track endpoints") {
  auto store = store::make_memory_store();
  Api a(support::service_config(), *store);
  a.login();
  const json project{{"project", "p"}, {"labels", {"landing", "takeoff"}},
                     {"airport", {{"latitude", 10}, {"longitude", 20}, {"elevation_m", 0}}}};
  const auto created = a.post_json("/api/projects", project, 201);
  CHECK(created["name"] == "p");
  CHECK(created["labels"].size() == 2);
  CHECK(status(a.post("/api/projects", project)) == 409);
  CHECK(status(a.post("/api/projects", json{{"project", "q"}})) == 422);
  CHECK(status(a.post("/api/projects", std::string("[1,2"))) == 422);
  CHECK(a.get_json("/api/projects")["projects"].size() == 1);

  const std::string format = "format_name: f\ncolumns:\n  timestamp: {source: t}\n  latitude: {source: lat}\n"
                             "  longitude: {source: lon}\n  altitude: {source: alt}\n  track_id: {source: id}\n";
  CHECK(status(a.post("/api/projects/p/formats", format, "application/yaml")) == 201);
  CHECK(status(a.post("/api/projects/p/formats", std::string("format_name: g\n"), "application/yaml")) == 422);
  CHECK(status(a.post("/api/projects/zz/formats", format, "application/yaml")) == 404);

  const std::string csv = "t,lat,lon,alt,id\n0,10,20,5,a\n1,10.001,20,6,a\n2,10.002,20,7,a\n0,10,20.01,50,b\n5,10,20.02,60,b\n";
  const auto up = a.post("/api/projects/p/tracks?format=f", csv, "text/csv");
  REQUIRE(status(up) == 201);
  CHECK(json::parse(up->body)["tracks"] == 2);
  CHECK(json::parse(up->body)["rows"] == 5);
  CHECK(status(a.post("/api/projects/p/tracks?format=nope", csv, "text/csv")) == 404);
  CHECK(status(a.post("/api/projects/p/tracks", csv, "text/csv")) == 422);
  CHECK(status(a.post("/api/projects/p/tracks?format=f", std::string("t,lat,lon,alt,id\n"), "text/csv")) == 422);

  const auto list = a.get_json("/api/projects/p/tracks");
  CHECK(list["count"] == 2);
  CHECK(list["tracks"][0]["track_id"] == "a");
  CHECK(list["tracks"][0]["num_points"] == 3);
  CHECK(a.get_json("/api/projects/p/tracks?limit=1&offset=1")["tracks"][0]["track_id"] == "b");
  CHECK(a.get_json("/api/projects/p/tracks?bbox=9.9,19.9,10.1,20.005")["count"] == 1);
  CHECK(a.get_json("/api/projects/p/tracks?start_time=3")["count"] == 1);
  CHECK(status(a.get("/api/projects/p/tracks?limit=0")) == 422);
  CHECK(status(a.get("/api/projects/p/tracks?verified=maybe")) == 422);
  CHECK(status(a.get("/api/projects/zz/tracks")) == 404);

  const auto one = a.get_json("/api/projects/p/tracks/a");
  CHECK(one["points"].size() == 3);
  CHECK(one["points"][1][1] == 10.001);
  CHECK(status(a.get("/api/projects/p/tracks/none")) == 404);
}

TEST_CASE("annotation endpoints") {
  auto store = store::make_memory_store();
  Api a(support::service_config(), *store);
  a.login();
  store->create_project("p", LabelSet{"p", {"landing", "takeoff"}}, std::nullopt);
  std::vector<store::StoredTrack> tracks;
  for (int i = 0; i < 271; ++i) {
    store::StoredTrack st;
    st.track.track_id = fmt::format("t{:03}", i);
    for (int k = 0; k < 2; ++k) st.track.points.push_back({{1, 2, 3}, double(k), st.track.track_id});
    tracks.push_back(st);
  }
  store->upsert_tracks("p", tracks);
  const auto km = store->register_annotator(AnnotatorRecord::model("kmeans", "v0"));
  for (int i = 0; i < 271; ++i) store->annotate("p", fmt::format("t{:03}", i), i < 57 ? "takeoff" : "landing", km.id);

  const auto batch = a.post_json("/api/projects/p/annotations/batch",
                                 {{"query", {{"label", "landing"}, {"annotator", "kmeans:v0"}, {"verified", false}}},
                                  {"label", "landing"}},
                                 200);
  CHECK(batch == json{{"count", 214}});
  CHECK(a.get_json("/api/projects/p/tracks?label=landing&annotator=alice&verified=true")["count"] == 214);
  CHECK(a.post_json("/api/projects/p/annotations/batch",
                    {{"query", {{"label", "landing"}, {"annotator", "kmeans:v0"}}}, {"label", "landing"}}, 200) ==
        json{{"count", 0}});
  CHECK(status(a.post("/api/projects/p/annotations/batch", json{{"query", {{"label", "landing"}}}})) == 422);
  CHECK(status(a.post("/api/projects/p/annotations/batch", json{{"query", 5}, {"label", "landing"}})) == 422);

  const auto single = a.post_json("/api/projects/p/annotations", {{"subject", "t004"}, {"label", "landing"}}, 201);
  CHECK(single["verified"] == true);
  CHECK(single["annotator"] == "alice");
  CHECK(single["batch_id"] == 0);
  CHECK(status(a.post("/api/projects/p/annotations", json{{"subject", "t004"}, {"label", "glide"}})) == 422);
  CHECK(status(a.post("/api/projects/p/annotations", json{{"subject", "zzz"}, {"label", "landing"}})) == 404);
  CHECK(status(a.post("/api/projects/p/annotations", json{{"label", "landing"}})) == 422);

  const auto detail = a.get_json("/api/projects/p/tracks/t004");
  REQUIRE(detail["annotations"].size() == 1);
  CHECK(detail["annotations"][0]["annotator_kind"] == "human");

  const auto ingest = a.post("/api/projects/p/annotations/ingest?algorithm=svm&version=v1",
                             std::string("subject_id,label\nt000,takeoff\nt001,landing\nmissing,landing\nt002,hover\n"),
                             "text/csv");
  REQUIRE(status(ingest) == 201);
  const auto ij = json::parse(ingest->body);
  CHECK(ij["annotator"] == "svm:v1");
  CHECK(ij["count"] == 2);
  CHECK(ij["errors"].size() == 2);
  CHECK(status(a.post("/api/projects/p/annotations/ingest", std::string("subject_id,label\n"), "text/csv")) == 422);

  const auto csv = a.get("/api/projects/p/annotations/export?format=csv");
  REQUIRE(status(csv) == 200);
  CHECK(csv->body.rfind(std::string(store::kExportCsvHeader) + "\n", 0) == 0);
  CHECK(status(a.get("/api/projects/p/annotations/export?format=xml")) == 422);
  CHECK(json::parse(a.get("/api/projects/p/annotations/export?format=json")->body).size() ==
        store->list_annotations("p").size());
}

TEST_CASE("export lists three annotations as three rows") {
  auto store = store::make_memory_store();
  Api a(support::service_config(), *store);
  a.login();
  store->create_project("p", LabelSet{"p", {"landing", "takeoff"}}, std::nullopt);
  std::vector<store::StoredTrack> tracks;
  for (const char* id : {"x", "y", "z"}) {
    store::StoredTrack st;
    st.track.track_id = id;
    for (int k = 0; k < 2; ++k) st.track.points.push_back({{1, 2, 3}, double(k), id});
    tracks.push_back(st);
  }
  store->upsert_tracks("p", tracks);
  for (const char* id : {"x", "y", "z"}) a.post_json("/api/projects/p/annotations", {{"subject", id}, {"label", "takeoff"}}, 201);
  const auto lines = ingest::split_lines(a.get("/api/projects/p/annotations/export?format=csv")->body);
  CHECK(lines.size() == 4);
}

TEST_CASE("workflow endpoints and their error codes") {
  Loaded l;
  auto& a = *l.api;
  const std::string base = "/api/projects/demo";
  const auto run = a.post_json(base + "/pipeline/run", json::object(), 200);
  CHECK(run["runways"].size() == 2);
  CHECK(run["set_sizes"].size() == 4);

  {
    workflow::WorkflowLock held("demo");
    const auto locked = a.post(base + "/pipeline/run", json::object());
    CHECK(status(locked) == 409);
    CHECK(error_code(locked) == "conflict");
    CHECK(status(a.post(base + "/models/train", json{{"algorithm", "kmeans"}, {"sets", {1}}})) == 409);
  }

  CHECK(status(a.post(base + "/models/train", json{{"algorithm", "forest"}, {"sets", {1}}})) == 422);
  CHECK(status(a.post(base + "/models/train", json{{"algorithm", "svm"}})) == 422);
  const auto km = a.post_json(base + "/models/train", {{"algorithm", "kmeans"}, {"sets", {1}}}, 201);
  CHECK(km["model"] == "kmeans:v0");
  // The svm has no human labels to learn from yet.
  CHECK(status(a.post(base + "/models/train", json{{"sets", {1}}})) == 422);
  CHECK(a.post_json(base + "/models/kmeans:v0/infer", {{"set", 1}}, 200)["count"] > 0);
  CHECK(status(a.post(base + "/models/kmeans:v7/infer", json{{"set", 1}})) == 404);
  CHECK(status(a.post(base + "/models/kmeans:v0/infer", json::object())) == 422);

  CHECK(status(a.get(base + "/models/kmeans:v0/metrics")) == 404);
  CHECK(status(a.get(base + "/models/kmeans:v0/metrics?set=1")) == 422);
  CHECK(status(a.get(base + "/models/kmeans:v9/metrics")) == 404);

  const workflow::OracleVerifier truth(synth::parse_truth_csv(support::slurp(l.dir.file("truth.csv"))));
  support::http_verify(a, "demo", 1, "kmeans:v0", truth);
  a.post_json(base + "/models/kmeans:v0/infer", {{"set", 4}}, 200);
  support::http_verify(a, "demo", 4, "kmeans:v0", truth);
  CHECK(a.post_json(base + "/models/train", {{"sets", {1}}}, 201)["model"] == "svm:v1");
  const auto metrics = a.get_json(base + "/models/svm:v1/metrics?set=4");
  CHECK(metrics["accuracy"] >= 0.9);
  CHECK(metrics["classes"].size() == 3);
  CHECK(a.get_json(base + "/models/svm:v1/metrics")["accuracy"] == metrics["accuracy"]);

  const auto report = a.get(base + "/reports/effort");
  REQUIRE(status(report) == 200);
  CHECK(report->body.rfind(std::string(workflow::kEffortCsvHeader), 0) == 0);
  const auto rj = a.get_json(base + "/reports/effort?format=json");
  REQUIRE(rj["cycles"].size() == 1);
  CHECK(rj["cycles"][0]["model"] == "kmeans:v0");
  CHECK(rj["cycles"][0]["effort_reduction"] >= 0.7);
  CHECK(status(a.get(base + "/reports/effort?format=pdf")) == 422);
  CHECK(status(a.get("/api/projects/zz/reports/effort")) == 404);
}

TEST_CASE("pipeline on a project without tracks is rejected") {
  auto store = store::make_memory_store();
  Api a(support::service_config(), *store);
  a.login();
  a.post_json("/api/projects", {{"project", "e"}, {"labels", {"landing"}},
                                {"airport", {{"latitude", 1}, {"longitude", 1}, {"elevation_m", 0}}}},
              201);
  const auto r = a.post("/api/projects/e/pipeline/run", json::object());
  CHECK(status(r) == 422);
  CHECK(json::parse(r->body)["error"]["message"].get<std::string>().find("no tracks") != std::string::npos);
}

TEST_CASE("storage failures surface as 503") {
  auto store = store::make_memory_store();
  Api a(support::service_config(), *store);
  a.login();
  store->create_project("p", LabelSet{"p", {"landing"}}, std::nullopt);
  store::StoredTrack st;
  st.track.track_id = "a";
  for (int k = 0; k < 2; ++k) st.track.points.push_back({{1, 2, 3}, double(k), "a"});
  store->upsert_tracks("p", std::vector{st});
  store->inject_write_failure(0);
  const auto r = a.post("/api/projects/p/annotations", json{{"subject", "a"}, {"label", "landing"}});
  CHECK(status(r) == 503);
  CHECK(error_code(r) == "storage_unavailable");
  store->inject_write_failure(std::nullopt);
  CHECK(store->list_annotations("p").empty());
}

TEST_CASE("concurrent clients") {
  auto store = store::make_memory_store();
  Api a(support::service_config(), *store);
  a.login();
  store->create_project("p", LabelSet{"p", {"landing"}}, std::nullopt);
  std::vector<store::StoredTrack> tracks;
  for (int i = 0; i < 40; ++i) {
    store::StoredTrack st;
    st.track.track_id = fmt::format("c{:02}", i);
    for (int k = 0; k < 2; ++k) st.track.points.push_back({{1, 2, 3}, double(k), st.track.track_id});
    tracks.push_back(st);
  }
  store->upsert_tracks("p", tracks);
  std::atomic<int> created{0};
  std::vector<std::thread> threads;
  for (int w = 0; w < 4; ++w) {
    threads.emplace_back([&, w] {
      httplib::Client c("127.0.0.1", a.port);
      for (int i = w; i < 40; i += 4) {
        const auto r = c.Post("/api/projects/p/annotations", a.headers(),
                              json{{"subject", fmt::format("c{:02}", i)}, {"label", "landing"}}.dump(),
                              "application/json");
        if (r && r->status == 201) ++created;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(created == 40);
  CHECK(store->list_annotations("p").size() == 40);
}

TEST_CASE("the CLI and the HTTP service produce the same effort report") {
  support::TempDir dir;
  support::write_dataset(dir.path.string(), 100);
  const auto from_cli = support::cli_path(dir.path.string());
  auto store = store::make_memory_store();
  const auto from_http = support::http_path(dir.path.string(), *store);
  CHECK(from_cli == from_http);
  CHECK(from_cli.rfind(std::string(workflow::kEffortCsvHeader) + "\n1,", 0) == 0);
  CHECK(ingest::split_lines(from_cli).size() == 4);
}
