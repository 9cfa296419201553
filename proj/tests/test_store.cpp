#include <doctest.h>

#include <atomic>
#include <functional>
#include <thread>

#include <json.hpp>

#include "support/store_contract.hpp"
#include "support/temp_dir.hpp"
#include "tracklab/error.hpp"
#include "tracklab/store.hpp"

using namespace tracklab;
using namespace tracklab::store;

namespace {

using Opener = std::function<std::unique_ptr<Store>()>;

struct Backend {
  std::string name;
  std::function<Opener(support::TempDir&)> make;
};

std::vector<Backend> backends() {
  static std::atomic<int> counter{0};
  return {
      {"memory", [](support::TempDir&) -> Opener { return [] { return make_memory_store(); }; }},
      {"file",
       [](support::TempDir& d) -> Opener {
         return [&d] { return open_store({"file", d.file(fmt::format("s{}.json", counter++))}); };
       }},
      {"sqlite", [](support::TempDir&) -> Opener { return [] { return open_store({"sqlite", ""}); }; }},
      {"sqlite-file",
       [](support::TempDir& d) -> Opener {
         return [&d] { return open_store({"sqlite", d.file(fmt::format("s{}.db", counter++))}); };
       }},
  };
}

StoredTrack simple_track(const std::string& id, std::size_t n, double t0 = 0) {
  StoredTrack st;
  st.track.track_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    st.track.points.push_back({{1.0 + 0.001 * double(i), 2.0, 100.0 + double(i)}, t0 + double(i), id});
  }
  return st;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

const LabelSet kSet{"p", support::kLabels};

}  // namespace

TEST_CASE("every backend passes the shared contract") {
  for (const auto& b : backends()) {
    CAPTURE(b.name);
    support::TempDir dir;
    const auto open = b.make(dir);
    CHECK(support::run_contract(open) == "");
  }
}

TEST_CASE("track round trip, replacement and lookup errors") {
  for (const auto& b : backends()) {
    CAPTURE(b.name);
    support::TempDir dir;
    auto s = b.make(dir)();
    s->create_project("p", kSet, std::nullopt);
    CHECK(code_of([&] { s->create_project("p", kSet, std::nullopt); }) == ErrorCode::conflict);
    CHECK(code_of([&] { s->get_project("missing"); }) == ErrorCode::not_found);

    std::vector<StoredTrack> two{simple_track("a", 3), simple_track("b", 4, 10)};
    CHECK(s->upsert_tracks("p", two) == 2);
    auto a = s->get_track("p", "a");
    CHECK(a.track.points == two[0].track.points);
    CHECK(a.meta.num_points == 3);
    CHECK(a.meta.start_time == 0.0);
    CHECK(a.meta.end_time == 2.0);
    CHECK(a.meta.kind == SubjectKind::track);

    const std::vector<std::pair<std::string, int>> sets{{"a", 2}};
    s->assign_sets("p", sets);
    const auto u = s->register_annotator(AnnotatorRecord::human("u1", "annotator"));
    s->annotate("p", "a", "landing", u.id);
    std::vector<StoredTrack> longer{simple_track("a", 4)};
    s->upsert_tracks("p", longer);
    a = s->get_track("p", "a");
    CHECK(a.meta.num_points == 4);
    CHECK(a.meta.set_id == 2);
    CHECK(a.meta.num_annotations == 1);

    CHECK(code_of([&] { s->get_track("p", "zz"); }) == ErrorCode::not_found);
    CHECK(code_of([&] { s->upsert_tracks("nope", two); }) == ErrorCode::not_found);
    std::vector<StoredTrack> tiny{simple_track("c", 1)};
    CHECK(code_of([&] { s->upsert_tracks("p", tiny); }) == ErrorCode::validation);
    CHECK_FALSE(s->has_track("p", "c"));
  }
}

TEST_CASE("annotation replacement and verification semantics") {
  for (const auto& b : backends()) {
    CAPTURE(b.name);
    support::TempDir dir;
    auto s = b.make(dir)();
    s->create_project("p", kSet, std::nullopt);
    std::vector<StoredTrack> one{simple_track("T", 3)};
    s->upsert_tracks("p", one);
    const auto u1 = s->register_annotator(AnnotatorRecord::human("u1", "annotator"));
    const auto km = s->register_annotator(AnnotatorRecord::model("kmeans", "v0"));
    CHECK(s->register_annotator(AnnotatorRecord::model("kmeans", "v0")).id == km.id);

    const auto m = s->annotate("p", "T", "takeoff", km.id);
    CHECK_FALSE(m.verified);
    const auto first = s->annotate("p", "T", "landing", u1.id);
    CHECK(first.verified);
    CHECK(first.batch_id == 0);
    s->annotate("p", "T", "takeoff", u1.id);
    const auto current = s->list_annotations("p");
    REQUIRE(current.size() == 1);
    CHECK(current[0].label == "takeoff");
    CHECK(current[0].annotator_id == u1.id);
    CHECK(s->get_track("p", "T").meta.num_annotations == 1);

    const auto audit = s->audit_log("p");
    REQUIRE(audit.size() == 2);
    CHECK(audit[0].action == AuditAction::resolved);
    CHECK(audit[0].record.annotator_id == km.id);
    CHECK(audit[1].action == AuditAction::superseded);
    CHECK(audit[1].record.label == "landing");

    CHECK(code_of([&] { s->annotate("p", "T", "go_around", u1.id); }) == ErrorCode::validation);
    CHECK(code_of([&] { s->annotate("p", "X", "landing", u1.id); }) == ErrorCode::not_found);
    CHECK(code_of([&] { s->annotate("p", "T", "landing", 999); }) == ErrorCode::not_found);
    CHECK(code_of([&] { s->register_annotator(AnnotatorRecord{0, AnnotatorKind::model, "m", {}, {}}); }) ==
          ErrorCode::validation);
  }
}

TEST_CASE("a batch over 214 pre-labelled tracks verifies all of them") {
  for (const auto& b : backends()) {
    CAPTURE(b.name);
    support::TempDir dir;
    auto s = b.make(dir)();
    s->create_project("p", kSet, std::nullopt);
    std::vector<StoredTrack> tracks;
    for (int i = 0; i < 271; ++i) tracks.push_back(simple_track(fmt::format("s{:03}", i), 3));
    s->upsert_tracks("p", tracks);
    const auto km = s->register_annotator(AnnotatorRecord::model("kmeans", "v0"));
    const auto v = s->register_annotator(AnnotatorRecord::human("v", "verifier"));
    for (int i = 0; i < 271; ++i) s->annotate("p", fmt::format("s{:03}", i), i < 214 ? "landing" : "takeoff", km.id);

    Query q;
    q.label = "landing";
    q.annotator = "kmeans:v0";
    q.verified = false;
    CHECK(s->batch_annotate("p", q, "landing", v.id) == 214);
    Query check;
    check.label = "landing";
    check.verified = true;
    check.annotator = "v";
    CHECK(s->query_tracks("p", check).size() == 214);
    CHECK(s->batch_annotate("p", q, "landing", v.id) == 0);

    std::set<std::int64_t> batch_ids;
    for (const auto& a : s->list_annotations("p")) {
      if (a.annotator_id == v.id) batch_ids.insert(a.batch_id);
    }
    CHECK(batch_ids.size() == 1);
    CHECK(*batch_ids.begin() != 0);
  }
}

TEST_CASE("export has one row per current annotation") {
  for (const auto& b : backends()) {
    CAPTURE(b.name);
    support::TempDir dir;
    auto s = b.make(dir)();
    s->create_project("p", kSet, std::nullopt);
    CHECK(export_annotations(*s, "p", ExportFormat::csv) == std::string(kExportCsvHeader) + "\n");
    std::vector<StoredTrack> tracks{simple_track("a", 2), simple_track("b", 2)};
    s->upsert_tracks("p", tracks);
    const auto km = s->register_annotator(AnnotatorRecord::model("kmeans", "v0"));
    const auto svm = s->register_annotator(AnnotatorRecord::model("svm", "v1"));
    const auto u = s->register_annotator(AnnotatorRecord::human("u1", "annotator"));
    s->annotate("p", "b", "takeoff", svm.id);
    s->annotate("p", "b", "landing", km.id);
    s->annotate("p", "a", "landing", u.id);
    const auto lines = ingest::split_lines(export_annotations(*s, "p", ExportFormat::csv));
    REQUIRE(lines.size() == 4);
    CHECK(lines[1].substr(0, 23) == "a,landing,u1,,human,tru");
    CHECK(lines[2].substr(0, 32) == "b,landing,kmeans,v0,model,false,");
    CHECK(lines[3].substr(0, 29) == "b,takeoff,svm,v1,model,false,");
    const auto json = nlohmann::json::parse(export_annotations(*s, "p", ExportFormat::json));
    REQUIRE(json.size() == 3);
    CHECK(json[2]["annotator_name"] == "svm");
    CHECK(code_of([&] { export_annotations(*s, "none", ExportFormat::csv); }) == ErrorCode::not_found);
  }
}

TEST_CASE("random operation sequences keep the annotation counts exact") {
  for (const auto& b : backends()) {
    CAPTURE(b.name);
    support::TempDir dir;
    auto s = b.make(dir)();
    auto fx = support::build_fixture(*s, 120, 5);
    std::mt19937_64 rng(77);
    std::vector<std::string> ids;
    for (const auto& [id, _] : fx.mirror.tracks) ids.push_back(id);
    for (int step = 0; step < 400; ++step) {
      const auto& a = fx.mirror.annotators[rng() % fx.mirror.annotators.size()];
      const auto& label = support::kLabels[rng() % 3];
      if (rng() % 5 == 0) {
        const auto q = support::random_query(rng);
        const auto hit = fx.mirror.expected(q);
        CHECK(s->batch_annotate(fx.project, q, label, a.id) == hit.size());
        for (const auto& id : hit) fx.mirror.write(id, label, a.id);
      } else {
        const auto& id = ids[rng() % ids.size()];
        s->annotate(fx.project, id, label, a.id);
        fx.mirror.write(id, label, a.id);
      }
    }
    CHECK(support::check_counts(*s, fx) == "");
    CHECK(support::check_queries(*s, fx, 50, 3) == "");
  }
}

TEST_CASE("durable backends reload what they wrote") {
  for (const std::string backend : {"file", "sqlite"}) {
    CAPTURE(backend);
    support::TempDir dir;
    const auto path = dir.file("persist");
    support::Fixture fx;
    {
      auto s = open_store({backend, path});
      fx = support::build_fixture(*s, 200, 9);
      s->put_artifact(fx.project, "cycle/0002", "b");
      s->put_artifact(fx.project, "cycle/0001", "a");
      s->put_artifact(fx.project, "model/x", "m");
      s->flush();
    }
    auto s = open_store({backend, path});
    CHECK(support::check_counts(*s, fx) == "");
    CHECK(support::check_queries(*s, fx, 30, 4) == "");
    const auto cycles = s->list_artifacts(fx.project, "cycle/");
    REQUIRE(cycles.size() == 2);
    CHECK(cycles[0].second == "a");
    CHECK(cycles[1].first == "cycle/0002");
    CHECK(s->get_artifact(fx.project, "model/x") == "m");
    CHECK_FALSE(s->get_artifact(fx.project, "model/y"));
  }
}

TEST_CASE("deleting segments removes their annotations") {
  for (const auto& b : backends()) {
    CAPTURE(b.name);
    support::TempDir dir;
    auto s = b.make(dir)();
    auto fx = support::build_fixture(*s, 100, 12);
    std::size_t segments = 0, tracks = 0;
    for (const auto& [_, t] : fx.mirror.tracks) (t.segment ? segments : tracks)++;
    CHECK(s->delete_subjects(fx.project, SubjectKind::segment) == segments);
    CHECK(s->query_tracks(fx.project, {}).size() == tracks);
    for (const auto& a : s->list_annotations(fx.project)) CHECK_FALSE(fx.mirror.tracks.at(a.subject).segment);
  }
}

TEST_CASE("concurrent writers do not lose annotations") {
  for (const auto& b : backends()) {
    CAPTURE(b.name);
    support::TempDir dir;
    auto s = b.make(dir)();
    s->create_project("p", kSet, std::nullopt);
    std::vector<StoredTrack> tracks;
    for (int i = 0; i < 200; ++i) tracks.push_back(simple_track(fmt::format("c{:03}", i), 2));
    s->upsert_tracks("p", tracks);
    std::vector<std::int64_t> who;
    for (int w = 0; w < 4; ++w) who.push_back(s->register_annotator(AnnotatorRecord::human(fmt::format("w{}", w), "annotator")).id);
    std::vector<std::thread> threads;
    for (int w = 0; w < 4; ++w) {
      threads.emplace_back([&, w] {
        for (int i = 0; i < 200; ++i) s->annotate("p", fmt::format("c{:03}", i), "landing", who[static_cast<std::size_t>(w)]);
      });
    }
    for (int r = 0; r < 2; ++r) {
      threads.emplace_back([&] {
        for (int i = 0; i < 50; ++i) (void)s->query_tracks("p", Query{});
      });
    }
    for (auto& t : threads) t.join();
    CHECK(s->list_annotations("p").size() == 800);
    for (const auto& m : s->list_meta("p", {})) CHECK(m.num_annotations == 4);
  }
}

TEST_CASE("query validation") {
  Query q;
  q.limit = 0;
  CHECK(code_of([&] { q.validate(); }) == ErrorCode::validation);
  Query inverted;
  inverted.time_range = TimeRange{5, 1};
  CHECK(code_of([&] { inverted.validate(); }) == ErrorCode::validation);
  auto s = make_memory_store();
  s->create_project("p", kSet, std::nullopt);
  CHECK(code_of([&] { s->query_tracks("p", q); }) == ErrorCode::validation);
  Query unknown;
  unknown.label = "nonexistent";
  CHECK(s->query_tracks("p", unknown).empty());
}
