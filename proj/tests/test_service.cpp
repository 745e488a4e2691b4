#include "btrads/service.hpp"

#include <filesystem>

#include "btrads/json_io.hpp"
#include "doctest.h"
#include "httplib.h"

using namespace btrads;
using nlohmann::json;

namespace {

CaseRecord make_case(const std::string& id, double flair_follow, double enh_follow, Category reference) {
  CaseRecord c;
  c.case_id = id;
  c.baseline_exam_id = id + "-b";
  c.baseline_date = Date::parse_iso("2023-01-10");
  c.followup_date = *Date::parse_iso("2023-04-10");
  c.baseline_flair_ml = 10.0;
  c.followup_flair_ml = flair_follow;
  c.baseline_enh_ml = 4.0;
  c.followup_enh_ml = enh_follow;
  c.note_text = "Follow-up MRI. Chemoradiation completed 2022-06-01. No steroids.";
  c.reference_label = ObservedLabel(reference);
  c.initial_clinical_label = ObservedLabel(Category::BT2);
  return c;
}

struct Fixture {
  std::shared_ptr<CaseStore> store;
  std::unique_ptr<ReviewService> service;
  std::unique_ptr<httplib::Client> client;

  explicit Fixture(const std::string& name, std::optional<std::string> token = std::nullopt) {
    const auto dir = std::filesystem::temp_directory_path() / ("btrads_service_" + name);
    std::filesystem::remove_all(dir);
    store = std::make_shared<CaseStore>(dir);
    const PipelineConfig config;
    const Extractor extractor(config.backend);
    for (const auto& c : {make_case("c1", 12.5, 5.2, Category::BT3c), make_case("c2", 10.0, 4.0, Category::BT2),
                          make_case("c3", 12.5, 5.2, Category::BT3b)}) {
      store->put_scored(c, run_case(c, config, extractor));
    }
    service = std::make_unique<ReviewService>(store, config, ServiceOptions{"127.0.0.1", 0, token});
    const int port = service->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  json get(const std::string& path, int expect = 200) {
    auto res = client->Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }

  json post(const std::string& path, const json& body, int expect = 200) {
    auto res = client->Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
};

}  // namespace

TEST_CASE("list cases with filters and paging") {
  Fixture f("list");
  auto all = f.get("/cases");
  CHECK(all["total"] == 3);
  CHECK(all["items"].size() == 3);
  CHECK(all["items"][0]["case_id"] == "c1");
  CHECK(all["items"][0]["category"] == "BT-3c");

  CHECK(f.get("/cases?category=BT-2")["total"] == 1);
  CHECK(f.get("/cases?correct=false")["items"][0]["case_id"] == "c3");
  CHECK(f.get("/cases?status=scored")["total"] == 3);
  const auto page = f.get("/cases?offset=1&limit=1");
  CHECK(page["total"] == 3);
  REQUIRE(page["items"].size() == 1);
  CHECK(page["items"][0]["case_id"] == "c2");

  CHECK(f.get("/cases?category=BT-9", 400)["error"]["code"] == "ValidationError");
  CHECK(f.get("/cases?limit=abc", 400)["error"].contains("message"));
}

TEST_CASE("get one case with its trace") {
  Fixture f("get");
  const auto c = f.get("/cases/c1");
  CHECK(c["case"]["note_text"] == make_case("c1", 12.5, 5.2, Category::BT3c).note_text);
  CHECK(c["report"]["score"]["category"] == "BT-3c");
  CHECK(c["report"]["score"]["trace"].size() == 8);
  CHECK(c["reviewer"].is_object());
  CHECK(f.get("/cases/nope", 404)["error"]["code"] == "NotFound");
}

TEST_CASE("reads write no audit events") {
  Fixture f("reads");
  const auto before = f.store->audit_log().size();
  f.get("/cases");
  f.get("/cases/c1");
  f.get("/cases/c1/audit");
  f.get("/metrics");
  CHECK(f.store->audit_log().size() == before);
}

TEST_CASE("rescore returns the delta and one event") {
  Fixture f("rescore");
  json edited = variables_to_json(f.store->get("c1").system.variables);
  edited["radiation_completion_date"] = "2023-03-01";
  edited["evidence"]["radiation_completion_date"] = nullptr;
  const auto before = f.store->audit_log().size();
  const auto r = f.post("/cases/c1/rescore", {{"edited_variables", edited}});
  CHECK(r["delta"]["system_category"] == "BT-3c");
  CHECK(r["delta"]["category"] == "BT-3a");
  CHECK(r["delta"]["category_changed"] == true);
  CHECK(r["delta"]["first_divergent_rule"] == "R3a");
  CHECK(r["audit_event"]["action"] == "Rescored");
  CHECK(f.store->audit_log().size() == before + 1);
  CHECK(f.get("/cases/c1")["report"]["score"]["category"] == "BT-3c");

  CHECK(f.post("/cases/c1/rescore", json::object(), 400)["error"]["code"] == "ValidationError");
  CHECK(f.post("/cases/missing/rescore", {{"edited_variables", edited}}, 404)["error"]["code"] == "NotFound");
  CHECK(f.store->audit_log().size() == before + 1);
}

TEST_CASE("override adds exactly one event") {
  Fixture f("override");
  const auto before = f.get("/cases/c1/audit")["events"].size();
  const auto r = f.post("/cases/c1/override", {{"category", "BT-3b"}, {"reason", "enhancement is post-surgical"}});
  CHECK(r["audit_event"]["action"] == "Overridden");
  const auto events = f.get("/cases/c1/audit")["events"];
  CHECK(events.size() == before + 1);
  CHECK(events.back()["payload"]["reason"] == "enhancement is post-surgical");
  CHECK(f.get("/cases/c1")["reviewer"]["override_category"] == "BT-3b");

  f.post("/cases/c1/override", {{"category", "BT-3b"}}, 400);
  f.post("/cases/c1/override", {{"category", "BT-9"}, {"reason", "x"}}, 400);
  f.post("/cases/nope/override", {{"category", "BT-2"}, {"reason", "x"}}, 404);
  CHECK(f.get("/cases/c1/audit")["events"].size() == before + 1);
}

TEST_CASE("malformed bodies and unknown routes") {
  Fixture f("errors");
  auto res = f.client->Post("/cases/c1/rescore", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["error"]["code"] == "ValidationError");
  res = f.client->Get("/nothing/here");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(json::parse(res->body)["error"]["code"] == "NotFound");
}

TEST_CASE("metrics reflect stored system reports") {
  Fixture f("metrics");
  const auto m = f.get("/metrics");
  CHECK(m["system_accuracy"]["correct"] == 2);
  CHECK(m["system_accuracy"]["n"] == 3);
}

TEST_CASE("shared token") {
  Fixture f("token", std::string("s3cret"));
  auto res = f.client->Get("/cases");
  REQUIRE(res);
  CHECK(res->status == 401);
  CHECK(json::parse(res->body)["error"]["code"] == "Unauthorized");
  f.client->set_default_headers({{kTokenHeader, "wrong"}});
  CHECK(f.client->Get("/cases")->status == 401);
  f.client->set_default_headers({{kTokenHeader, "s3cret"}});
  CHECK(f.client->Get("/cases")->status == 200);
}

TEST_CASE("concurrent overrides all land in the log") {
  Fixture f("concurrent");
  const int port = f.service->port();
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([port, t] {
      httplib::Client c("127.0.0.1", port);
      for (int i = 0; i < 5; ++i) {
        const json body = {{"category", "BT-2"}, {"reason", "r" + std::to_string(t * 5 + i)}};
        c.Post("/cases/c" + std::to_string(1 + t % 3) + "/override", body.dump(), "application/json");
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto log = f.store->audit_log();
  CHECK(log.size() == 3 + 40);
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].sequence == i + 1);
  const auto state = replay(log);
  for (const auto& id : f.store->ids()) CHECK(state.at(id) == f.store->get(id).reviewer);
}
