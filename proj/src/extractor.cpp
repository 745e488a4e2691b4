#include "btrads/extractor.hpp"

#include <sstream>

#include "httplib.h"

namespace btrads {

using nlohmann::json;

std::string_view to_string(BackendKind k) noexcept {
  return k == BackendKind::PatternRules ? "patterns" : "llm";
}

void check_backend_config(const BackendConfig& config) {
  if (config.kind != BackendKind::RemoteLlm) return;
  if (config.model_name.empty()) throw Error(ErrorCode::ConfigError, "model_name must not be empty");
  if (config.temperature != 0.0) {
    throw Error(ErrorCode::ConfigError, "temperature must be 0.0 for reproducible extraction");
  }
  if (config.endpoint_url.empty()) {
    throw Error(ErrorCode::ConfigError, "endpoint_url must not be empty");
  }
  if (config.max_retries < 0) throw Error(ErrorCode::ConfigError, "max_retries must be >= 0");
}

const json& extraction_schema() {
  static const json schema = [] {
    const json span = {
        {"type", "object"},
        {"additionalProperties", false},
        {"required", {"start", "end", "text"}},
        {"properties",
         {{"start", {{"type", "integer"}, {"minimum", 0}}},
          {"end", {{"type", "integer"}, {"minimum", 1}}},
          {"text", {{"type", "string"}}}}},
    };
    const json evidence = {{"anyOf", {span, {{"type", "null"}}}}};
    const json status = {
        {"type", "object"},
        {"additionalProperties", false},
        {"required", {"value", "evidence"}},
        {"properties",
         {{"value", {{"type", "string"}, {"enum", {"active", "recent", "none"}}}},
          {"evidence", evidence}}},
    };
    const json date = {
        {"type", "object"},
        {"additionalProperties", false},
        {"required", {"value", "evidence"}},
        {"properties",
         {{"value", {{"type", {"string", "null"}}, {"pattern", "^[0-9]{4}-[0-9]{2}-[0-9]{2}$"}}},
          {"evidence", evidence}}},
    };
    return json{
        {"type", "object"},
        {"additionalProperties", false},
        {"required", {"steroid_status", "bevacizumab_status", "radiation_completion_date"}},
        {"properties",
         {{"steroid_status", status},
          {"bevacizumab_status", status},
          {"radiation_completion_date", date}}},
    };
  }();
  return schema;
}

namespace {

std::string system_prompt() {
  std::ostringstream p;
  p << "You extract three clinical variables from a neuro-oncology clinical note.\n"
       "- steroid_status: \"active\" if the patient currently takes corticosteroids "
       "(e.g. dexamethasone), \"recent\" if they were tapered, held, or discontinued recently "
       "with no ongoing use, otherwise \"none\".\n"
       "- bevacizumab_status: same three values for bevacizumab (Avastin).\n"
       "- radiation_completion_date: the date radiation therapy was completed, as YYYY-MM-DD, "
       "or null when the note does not state it.\n"
       "For every value other than \"none\"/null, give evidence: the exact passage copied "
       "verbatim from the note, with 0-based character offsets start (inclusive) and end "
       "(exclusive) such that note[start:end] == text. Use null evidence otherwise.\n"
       "Reply with a single JSON object and nothing else. It must validate against this "
       "JSON schema:\n"
    << extraction_schema().dump();
  return p.str();
}

}  // namespace

json llm_request_payload(std::string_view note, const BackendConfig& config,
                         const std::vector<RetryFeedback>& feedback) {
  if (config.model_name.empty()) throw Error(ErrorCode::ConfigError, "model_name must not be empty");
  if (config.temperature != 0.0) {
    throw Error(ErrorCode::ConfigError, "temperature must be 0.0 for reproducible extraction");
  }
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", system_prompt()}});
  messages.push_back({{"role", "user"}, {"content", std::string(note)}});
  for (const auto& f : feedback) {
    messages.push_back({{"role", "assistant"}, {"content", f.rejected_reply}});
    messages.push_back(
        {{"role", "user"},
         {"content", "Your previous reply was rejected: " + f.error +
                         "\nReturn a corrected JSON object for the same note."}});
  }
  return json{
      {"model", config.model_name},
      {"temperature", 0.0},
      {"messages", messages},
      {"response_format",
       {{"type", "json_schema"},
        {"json_schema",
         {{"name", "clinical_variables"}, {"strict", true}, {"schema", extraction_schema()}}}}},
  };
}

std::string ReplyValidation::describe() const {
  std::string out;
  for (const auto& e : schema_errors) out += (out.empty() ? "" : "; ") + e;
  for (const auto& e : span_errors) out += (out.empty() ? "" : "; ") + e;
  return out;
}

namespace {

std::string strip_code_fence(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  s.remove_prefix(b);
  if (s.rfind("```", 0) == 0) {
    auto nl = s.find('\n');
    auto close = s.rfind("```");
    if (nl != std::string_view::npos && close != std::string_view::npos && close > nl) {
      return std::string(s.substr(nl + 1, close - nl - 1));
    }
  }
  return std::string(s);
}

std::optional<EvidenceSpan> read_evidence(const json& field, std::string_view name,
                                          ReplyValidation& r) {
  if (!field.contains("evidence")) {
    r.schema_errors.push_back(std::string(name) + ": missing 'evidence'");
    return std::nullopt;
  }
  const json& ev = field["evidence"];
  if (ev.is_null()) return std::nullopt;
  if (!ev.is_object()) {
    r.schema_errors.push_back(std::string(name) + ".evidence: must be an object or null");
    return std::nullopt;
  }
  for (const auto& [key, _] : ev.items()) {
    if (key != "start" && key != "end" && key != "text") {
      r.schema_errors.push_back(std::string(name) + ".evidence: unexpected key '" + key + "'");
    }
  }
  if (!ev.contains("start") || !ev["start"].is_number_integer() || !ev.contains("end") ||
      !ev["end"].is_number_integer() || !ev.contains("text") || !ev["text"].is_string()) {
    r.schema_errors.push_back(std::string(name) +
                              ".evidence: needs integer start, integer end, string text");
    return std::nullopt;
  }
  const auto start = ev["start"].get<std::int64_t>();
  const auto end = ev["end"].get<std::int64_t>();
  if (start < 0 || end < 0) {
    r.schema_errors.push_back(std::string(name) + ".evidence: offsets must be non-negative");
    return std::nullopt;
  }
  return EvidenceSpan{static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                      ev["text"].get<std::string>()};
}

}  // namespace

ReplyValidation validate_llm_reply(std::string_view content, std::string_view note) {
  ReplyValidation r;
  json obj;
  try {
    obj = json::parse(strip_code_fence(content));
  } catch (const json::parse_error& e) {
    r.schema_errors.push_back(std::string("reply is not valid JSON: ") + e.what());
    return r;
  }
  if (!obj.is_object()) {
    r.schema_errors.push_back("reply must be a JSON object");
    return r;
  }
  for (const auto& [key, _] : obj.items()) {
    if (!variable_from_string(key)) r.schema_errors.push_back("unexpected key '" + key + "'");
  }

  ClinicalVariables vars;
  for (Variable v : kAllVariables) {
    const std::string name(to_string(v));
    if (!obj.contains(name) || !obj[name].is_object()) {
      r.schema_errors.push_back(name + ": missing or not an object");
      continue;
    }
    const json& field = obj[name];
    for (const auto& [key, _] : field.items()) {
      if (key != "value" && key != "evidence") {
        r.schema_errors.push_back(name + ": unexpected key '" + key + "'");
      }
    }
    if (!field.contains("value")) {
      r.schema_errors.push_back(name + ": missing 'value'");
      continue;
    }
    const json& value = field["value"];
    if (v == Variable::RadiationDate) {
      if (value.is_string()) {
        auto d = Date::parse_iso(value.get<std::string>());
        if (!d) {
          r.schema_errors.push_back(name + ": '" + value.get<std::string>() +
                                    "' is not a valid YYYY-MM-DD date");
        } else {
          vars.radiation_completion_date = d;
        }
      } else if (!value.is_null()) {
        r.schema_errors.push_back(name + ": value must be a date string or null");
      }
    } else {
      std::optional<MedicationStatus> s;
      if (value.is_string()) s = medication_status_from_string(value.get<std::string>());
      if (!s) {
        r.schema_errors.push_back(name + ": value must be one of active, recent, none");
      } else if (v == Variable::Steroid) {
        vars.steroid_status = *s;
      } else {
        vars.bevacizumab_status = *s;
      }
    }
    vars.evidence_for(v) = read_evidence(field, name, r);
  }
  if (!r.schema_errors.empty()) return r;

  for (const auto& violation : validate_clinical_variables(vars, note)) {
    std::string msg = std::string(to_string(violation.variable)) + ": " + violation.detail;
    if (violation.kind == ViolationKind::SpanMismatch ||
        violation.kind == ViolationKind::SpanOutOfBounds) {
      r.span_errors.push_back(std::move(msg));
    } else {
      r.schema_errors.push_back(std::move(msg));
    }
  }
  if (r.schema_errors.empty() && r.span_errors.empty()) r.variables = std::move(vars);
  return r;
}

std::string reply_content(std::string_view response_body) {
  json body;
  try {
    body = json::parse(response_body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("response body is not JSON: ") + e.what());
  }
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() ||
      body["choices"].empty()) {
    throw Error(ErrorCode::SchemaViolation, "response has no choices");
  }
  const json& msg = body["choices"][0].value("message", json::object());
  if (!msg.contains("content") || !msg["content"].is_string()) {
    throw Error(ErrorCode::SchemaViolation, "response choice has no string content");
  }
  return msg["content"].get<std::string>();
}

// ---------------------------------------------------------------------------

HttpChatTransport::HttpChatTransport(std::string endpoint_url, std::string api_key,
                                     std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  const auto scheme_end = endpoint_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "endpoint_url must include a scheme: " + endpoint_url);
  }
  const auto path_start = endpoint_url.find('/', scheme_end + 3);
  base_ = endpoint_url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : endpoint_url.substr(path_start);
}

std::string HttpChatTransport::post(const json& request) {
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, request.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::TransportError,
                "request to " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::TransportError,
                "endpoint returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

// ---------------------------------------------------------------------------

Extractor::Extractor(BackendConfig config, std::shared_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  check_backend_config(config_);
  if (config_.kind == BackendKind::RemoteLlm && !transport_) {
    transport_ = std::make_shared<HttpChatTransport>(config_.endpoint_url, config_.api_key,
                                                     config_.timeout);
  }
}

ClinicalVariables Extractor::extract(std::string_view note) const {
  if (note.empty()) throw Error(ErrorCode::ValidationError, "note must not be empty");
  if (config_.kind == BackendKind::PatternRules) return pattern_rules(note);
  return extract_remote(note);
}

ClinicalVariables Extractor::extract_remote(std::string_view note) const {
  std::vector<RetryFeedback> feedback;
  ReplyValidation last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    const std::string body = transport_->post(llm_request_payload(note, config_, feedback));
    std::string content;
    try {
      content = reply_content(body);
    } catch (const Error& e) {
      last = ReplyValidation{};
      last.schema_errors.push_back(e.what());
      feedback.push_back({body, e.what()});
      continue;
    }
    last = validate_llm_reply(content, note);
    if (last.ok()) return *last.variables;
    feedback.push_back({content, last.describe()});
  }
  const auto attempts = std::to_string(config_.max_retries + 1);
  if (last.schema_errors.empty() && !last.span_errors.empty()) {
    throw Error(ErrorCode::SpanVerificationFailure,
                "evidence spans not verbatim after " + attempts + " attempts: " + last.describe());
  }
  throw Error(ErrorCode::SchemaViolation,
              "reply failed validation after " + attempts + " attempts: " + last.describe());
}

ClinicalVariables extract(std::string_view note, const BackendConfig& config) {
  return Extractor(config).extract(note);
}

}  // namespace btrads
