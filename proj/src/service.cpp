#include "btrads/service.hpp"

#include <charconv>
#include <thread>

#include "btrads/json_io.hpp"
#include "btrads/report.hpp"
#include "httplib.h"

namespace btrads {

using nlohmann::json;

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::ValidationError:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidDate:
    case ErrorCode::InvalidVolume: return 400;
    case ErrorCode::EmptyCohort: return 409;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ValidationError, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(ErrorCode::ValidationError, std::string("query parameter '") + key + "' must be a non-negative integer");
  }
  return out;
}

json summary(const StoredCase& c) {
  const CaseReport& r = c.system;
  json conflicts = json::array();
  for (const auto& f : r.conflicts) conflicts.push_back(to_string(f.kind));
  return {{"case_id", r.case_id},
          {"status", to_string(r.status)},
          {"category", r.score ? json(to_string(r.score->category)) : json(nullptr)},
          {"reference_label", r.reference_label ? label_to_json(*r.reference_label) : json(nullptr)},
          {"correct_vs_reference", r.correct_vs_reference ? json(*r.correct_vs_reference) : json(nullptr)},
          {"conflicts", conflicts},
          {"reviewer_category",
           c.reviewer.override_category ? json(to_string(*c.reviewer.override_category)) : json(nullptr)},
          {"rescore_category",
           c.reviewer.rescore ? json(to_string(c.reviewer.rescore->category)) : json(nullptr)}};
}

bool matches_filters(const httplib::Request& req, const StoredCase& c) {
  const CaseReport& r = c.system;
  if (req.has_param("category")) {
    auto want = parse_btrads_label(req.get_param_value("category")).category();
    if (!want) throw Error(ErrorCode::ValidationError, "category filter is not a BT-RADS category");
    if (!r.score || r.score->category != *want) return false;
  }
  if (req.has_param("conflict")) {
    const std::string v = req.get_param_value("conflict");
    if (v == "true" || v == "false") {
      if (r.conflicts.empty() == (v == "true")) return false;
    } else {
      auto kind = conflict_kind_from_string(v);
      if (!kind) throw Error(ErrorCode::ValidationError, "unknown conflict filter '" + v + "'");
      if (std::none_of(r.conflicts.begin(), r.conflicts.end(), [&](const auto& f) { return f.kind == *kind; })) {
        return false;
      }
    }
  }
  if (req.has_param("correct")) {
    const std::string v = req.get_param_value("correct");
    if (v != "true" && v != "false") throw Error(ErrorCode::ValidationError, "correct filter must be true or false");
    if (!r.correct_vs_reference || *r.correct_vs_reference != (v == "true")) return false;
  }
  if (req.has_param("status")) {
    auto s = case_status_from_string(req.get_param_value("status"));
    if (!s) throw Error(ErrorCode::ValidationError, "unknown status filter");
    if (r.status != *s) return false;
  }
  return true;
}

}  // namespace

struct ReviewService::Impl {
  std::shared_ptr<CaseStore> store;
  PipelineConfig config;
  ServiceOptions options;
  httplib::Server server;
  std::thread thread;

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      if (options.token && req.get_header_value(kTokenHeader) != *options.token) {
        send_error(res, 401, "Unauthorized", std::string("missing or wrong ") + kTokenHeader + " header");
        return;
      }
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    };
  }

  void routes() {
    server.Get("/cases", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::size_t offset = query_size(req, "offset", 0);
      const std::size_t limit = std::min<std::size_t>(query_size(req, "limit", 50), 1000);
      json items = json::array();
      std::size_t total = 0;
      for (const auto& id : store->ids()) {
        const StoredCase c = store->get(id);
        if (!matches_filters(req, c)) continue;
        if (total >= offset && items.size() < limit) items.push_back(summary(c));
        ++total;
      }
      send_json(res, 200, {{"total", total}, {"offset", offset}, {"limit", limit}, {"items", items}});
    }));

    server.Get(R"(/cases/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const StoredCase c = store->get(req.matches[1].str());
      send_json(res, 200,
                {{"case", case_to_json(c.record)},
                 {"report", report_to_json(c.system)},
                 {"reviewer", reviewer_state_to_json(c.reviewer)}});
    }));

    server.Get(R"(/cases/([^/]+)/audit)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1].str();
      if (!store->contains(id)) throw Error(ErrorCode::NotFound, "unknown case '" + id + "'");
      json events = json::array();
      for (const auto& e : store->audit_log()) {
        if (e.case_id == id) events.push_back(audit_event_to_json(e));
      }
      send_json(res, 200, {{"case_id", id}, {"events", events}});
    }));

    server.Post(R"(/cases/([^/]+)/rescore)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1].str();
      const json body = parse_body(req);
      if (!body.is_object() || !body.contains("edited_variables")) {
        throw Error(ErrorCode::ValidationError, "body must carry edited_variables");
      }
      if (body.contains("case_id") && body["case_id"] != id) {
        throw Error(ErrorCode::ValidationError, "case_id in body does not match the path");
      }
      const ClinicalVariables edited = variables_from_json(body["edited_variables"], true);
      const RescoreOutcome r = store->rescore_with_edits(id, edited, config);
      json asserted = json::array();
      for (Variable v : r.reviewer_asserted) asserted.push_back(to_string(v));
      send_json(res, 200,
                {{"case_id", id},
                 {"score", score_to_json(r.score)},
                 {"delta",
                  {{"system_category", to_string(r.system_category)},
                   {"category", to_string(r.score.category)},
                   {"category_changed", r.category_changed},
                   {"first_divergent_rule", r.first_divergent_rule ? json(*r.first_divergent_rule) : json(nullptr)},
                   {"reviewer_asserted", asserted}}},
                 {"audit_event", audit_event_to_json(r.event)}});
    }));

    server.Post(R"(/cases/([^/]+)/override)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1].str();
      const json body = parse_body(req);
      if (!body.is_object()) throw Error(ErrorCode::ValidationError, "body must be an object");
      std::optional<ClinicalVariables> vars;
      if (body.contains("variables") && !body["variables"].is_null()) {
        vars = variables_from_json(body["variables"], true);
      }
      std::optional<Category> category;
      if (body.contains("category") && !body["category"].is_null()) {
        if (!body["category"].is_string()) throw Error(ErrorCode::ValidationError, "category must be a string");
        category = parse_btrads_label(body["category"].get<std::string>()).category();
        if (!category) throw Error(ErrorCode::ValidationError, "category is not a standard BT-RADS category");
      }
      if (!body.contains("reason") || !body["reason"].is_string()) {
        throw Error(ErrorCode::ValidationError, "override needs a reason");
      }
      const AuditEvent e = store->record_override(id, vars, category, body["reason"].get<std::string>());
      send_json(res, 200, {{"case_id", id}, {"audit_event", audit_event_to_json(e)}});
    }));

    server.Get("/metrics", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto reports = store->system_reports();
      send_json(res, 200, evaluation_to_json(evaluate_reports(reports)));
    }));

    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", std::string("Content-Type, ") + kTokenHeader},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, "NotFound", "no such endpoint");
    });
  }
};

ReviewService::ReviewService(std::shared_ptr<CaseStore> store, PipelineConfig config, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->store = std::move(store);
  impl_->config = std::move(config);
  impl_->options = std::move(options);
  impl_->routes();
}

ReviewService::~ReviewService() { stop(); }

int ReviewService::start() {
  auto& s = impl_->server;
  port_ = impl_->options.port == 0 ? s.bind_to_any_port(impl_->options.host)
                                   : (s.bind_to_port(impl_->options.host, impl_->options.port) ? impl_->options.port : -1);
  if (port_ <= 0) {
    throw Error(ErrorCode::IoError, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  impl_->thread = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return port_;
}

void ReviewService::wait() {
  while (impl_->server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

void ReviewService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace btrads
