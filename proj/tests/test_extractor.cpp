#include "btrads/extractor.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>

#include "btrads/json_io.hpp"
#include "doctest.h"
#include "httplib.h"

using namespace btrads;
using nlohmann::json;
using M = MedicationStatus;

namespace {

const std::filesystem::path kData = BTRADS_TEST_DATA;

void check_span_verbatim(const ClinicalVariables& v, std::string_view note) {
  for (Variable var : kAllVariables) {
    const auto& s = v.evidence_for(var);
    if (!s) continue;
    REQUIRE(s->end <= note.size());
    CHECK(note.substr(s->start, s->end - s->start) == s->quoted_text);
  }
  CHECK(validate_clinical_variables(v, note).empty());
}

}  // namespace

TEST_CASE("patterns: single cues") {
  auto v = pattern_rules("continues dexamethasone 4 mg twice daily");
  CHECK(v.steroid_status == M::Active);
  REQUIRE(v.evidence_for(Variable::Steroid));
  CHECK(v.evidence_for(Variable::Steroid)->quoted_text == "continues dexamethasone 4 mg twice daily");

  v = pattern_rules("completed chemoradiation on 2023-05-10");
  CHECK(v.radiation_completion_date == Date::parse_iso("2023-05-10"));

  v = pattern_rules("bevacizumab was discontinued last month");
  CHECK(v.bevacizumab_status == M::Recent);

  v = pattern_rules("Avastin held since last month");
  CHECK(v.bevacizumab_status == M::Recent);

  v = pattern_rules("on dexamethasone taper, now discontinued");
  CHECK(v.steroid_status == M::Recent);
  CHECK(v.conflicting_cues.empty());

  v = pattern_rules("completed radiation therapy January 15, 2024");
  CHECK(v.radiation_completion_date == Date::parse_iso("2024-01-15"));
}

TEST_CASE("patterns: nothing to find") {
  const auto v = pattern_rules("Patient doing well. No new deficits. KPS 90.");
  CHECK(v == ClinicalVariables{});
}

TEST_CASE("patterns: negation and later sentences") {
  CHECK(pattern_rules("Not on steroids.").steroid_status == M::None);
  CHECK(pattern_rules("Denies steroid use.").steroid_status == M::None);
  const auto v = pattern_rules("Remains on dexamethasone 2 mg daily. Dexamethasone was tapered off this week.");
  CHECK(v.steroid_status == M::Recent);
  CHECK(v.conflicting_cues == std::vector<Variable>{Variable::Steroid});
}

TEST_CASE("patterns: date formats and abbreviations") {
  CHECK(pattern_rules("Finished RT on 03/14/2022.").radiation_completion_date == Date::parse_iso("2022-03-14"));
  CHECK(pattern_rules("Radiation therapy was completed Sept. 5, 2022.").radiation_completion_date ==
        Date::parse_iso("2022-09-05"));
  CHECK_FALSE(pattern_rules("Radiation therapy was completed 2022-02-30.").radiation_completion_date);
  const auto sentences = split_sentences("Dr. Smith saw her. Next visit Jan. 5.\nDone");
  CHECK(sentences.size() == 3);
}

TEST_CASE("patterns: deterministic") {
  const std::string note = "Continues Avastin 10 mg/kg. Completed chemoradiation on 2023-05-10. Steroids were discontinued.";
  CHECK(pattern_rules(note) == pattern_rules(note));
  check_span_verbatim(pattern_rules(note), note);
}

TEST_CASE("patterns: labeled corpus accuracy gate") {
  std::ifstream in(kData / "notes_corpus.jsonl");
  REQUIRE(in);
  std::string line;
  std::array<std::size_t, 3> correct{};
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string note = j["note"];
    const auto v = pattern_rules(note);
    check_span_verbatim(v, note);
    ++n;
    const bool s_ok = to_string(v.steroid_status) == j["steroid_status"].get<std::string>();
    const bool b_ok = to_string(v.bevacizumab_status) == j["bevacizumab_status"].get<std::string>();
    const bool r_ok = j["radiation_completion_date"].is_null()
                          ? !v.radiation_completion_date
                          : v.radiation_completion_date &&
                                v.radiation_completion_date->iso() == j["radiation_completion_date"].get<std::string>();
    correct[0] += s_ok;
    correct[1] += b_ok;
    correct[2] += r_ok;
    if (!(s_ok && b_ok && r_ok)) MESSAGE("corpus miss: ", note);
  }
  REQUIRE(n >= 50);
  for (std::size_t i = 0; i < 3; ++i) {
    const double acc = static_cast<double>(correct[i]) / static_cast<double>(n);
    MESSAGE(to_string(kAllVariables[i]), " accuracy ", acc);
    CHECK(acc >= 0.95);
  }
}

TEST_CASE("request payload") {
  BackendConfig cfg;
  cfg.kind = BackendKind::RemoteLlm;
  cfg.endpoint_url = "http://localhost:8000/v1/chat/completions";
  cfg.model_name = "local-model";
  const std::string note = "Remains on Decadron 4 mg.";
  const json req = llm_request_payload(note, cfg);
  CHECK(req["model"] == "local-model");
  CHECK(req["temperature"] == 0.0);
  CHECK(req["messages"][1]["content"] == note);
  CHECK(req["response_format"]["json_schema"]["schema"] == extraction_schema());

  auto no_model = cfg;
  no_model.model_name.clear();
  CHECK_THROWS_AS(llm_request_payload(note, no_model), Error);
  auto warm = cfg;
  warm.temperature = 0.7;
  try {
    llm_request_payload(note, warm);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
  CHECK_THROWS_AS(check_backend_config(warm), Error);
}

namespace {

class ReplayTransport final : public ChatTransport {
 public:
  explicit ReplayTransport(std::vector<json> responses) : responses_(std::move(responses)) {}
  std::string post(const json& request) override {
    std::lock_guard lock(mutex_);
    requests.push_back(request);
    if (next_ >= responses_.size()) throw Error(ErrorCode::TransportError, "no more recorded responses");
    return responses_[next_++].dump();
  }
  std::vector<json> requests;

 private:
  std::mutex mutex_;
  std::vector<json> responses_;
  std::size_t next_ = 0;
};

BackendConfig llm_config() {
  BackendConfig cfg;
  cfg.kind = BackendKind::RemoteLlm;
  cfg.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  cfg.model_name = "local-model";
  cfg.max_retries = 2;
  return cfg;
}

}  // namespace

TEST_CASE("llm: recorded replies") {
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kData / "llm")) {
    const std::string name = entry.path().stem().string();
    SUBCASE(name.c_str()) {
      std::ifstream in(entry.path());
      const json fx = json::parse(in);
      auto transport = std::make_shared<ReplayTransport>(fx["responses"].get<std::vector<json>>());
      Extractor ex(llm_config(), transport);
      const std::string note = fx["note"];
      if (fx.contains("expect")) {
        const auto v = ex.extract(note);
        const json got = variables_to_json(v);
        for (const auto& [k, val] : fx["expect"].items()) CHECK_MESSAGE(got[k] == val, k);
        check_span_verbatim(v, note);
      } else {
        try {
          ex.extract(note);
          FAIL("expected ", fx["expect_error"].get<std::string>());
        } catch (const Error& e) {
          CHECK(to_string(e.code()) == fx["expect_error"].get<std::string>());
        }
      }
      CHECK(transport->requests.size() == fx["requests"].get<std::size_t>());
      if (transport->requests.size() > 1) {
        // Re-prompts carry the rejected reply and the validation error.
        const auto& msgs = transport->requests.back()["messages"];
        CHECK(msgs.size() == 2 + 2 * (transport->requests.size() - 1));
        CHECK(msgs.back()["content"].get<std::string>().find("rejected") != std::string::npos);
      }
    }
    ++files;
  }
  CHECK(files >= 6);
}

TEST_CASE("llm: reply validation") {
  const std::string note = "Remains on Decadron 4 mg.";
  const json ok = {{"steroid_status", {{"value", "active"}, {"evidence", {{"start", 0}, {"end", 25}, {"text", note}}}}},
                   {"bevacizumab_status", {{"value", "none"}, {"evidence", nullptr}}},
                   {"radiation_completion_date", {{"value", nullptr}, {"evidence", nullptr}}}};
  CHECK(validate_llm_reply(ok.dump(), note).ok());

  auto extra = ok;
  extra["mood"] = "good";
  CHECK_FALSE(validate_llm_reply(extra.dump(), note).ok());

  auto bad_date = ok;
  bad_date["radiation_completion_date"]["value"] = "05/10/2023";
  CHECK_FALSE(validate_llm_reply(bad_date.dump(), note).schema_errors.empty());

  auto shifted = ok;
  shifted["steroid_status"]["evidence"]["start"] = 1;
  const auto r = validate_llm_reply(shifted.dump(), note);
  CHECK(r.schema_errors.empty());
  CHECK_FALSE(r.span_errors.empty());

  CHECK_THROWS_AS(reply_content("{}"), Error);
  CHECK(reply_content(R"({"choices":[{"message":{"content":"x"}}]})") == "x");
}

TEST_CASE("llm: http transport against a local stub server") {
  const std::string note = "Continues Avastin 10 mg/kg every 2 weeks.";
  const json content = {
      {"steroid_status", {{"value", "none"}, {"evidence", nullptr}}},
      {"bevacizumab_status", {{"value", "active"}, {"evidence", {{"start", 0}, {"end", note.size()}, {"text", note}}}}},
      {"radiation_completion_date", {{"value", nullptr}, {"evidence", nullptr}}}};
  const json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content.dump()}}}}}}};

  httplib::Server server;
  std::string auth;
  json seen;
  std::mutex m;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(m);
    auth = req.get_header_value("Authorization");
    seen = json::parse(req.body);
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/v1/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto cfg = llm_config();
  cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.api_key = "secret";
  cfg.timeout = std::chrono::seconds(5);
  const auto v = Extractor(cfg).extract(note);
  CHECK(v.bevacizumab_status == M::Active);
  {
    std::lock_guard lock(m);
    CHECK(auth == "Bearer secret");
    CHECK(seen["messages"][1]["content"] == note);
  }

  auto broken = cfg;
  broken.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/broken";
  try {
    Extractor(broken).extract(note);
    FAIL("expected TransportError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TransportError);
  }

  server.stop();
  t.join();
}

TEST_CASE("llm: unreachable endpoint is a transport error") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto cfg = llm_config();
  cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.timeout = std::chrono::seconds(2);
  try {
    Extractor(cfg).extract("Remains on Decadron 4 mg.");
    FAIL("expected TransportError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TransportError);
  }
}

TEST_CASE("extractor: empty note and config checks") {
  Extractor patterns(BackendConfig{});
  CHECK_THROWS_AS(patterns.extract(""), Error);
  auto cfg = llm_config();
  cfg.endpoint_url = "no-scheme";
  CHECK_THROWS_AS(Extractor{cfg}, Error);
  cfg = llm_config();
  cfg.max_retries = -1;
  CHECK_THROWS_AS(check_backend_config(cfg), Error);
}
