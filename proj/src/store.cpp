#include "btrads/store.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>

#include "btrads/json_io.hpp"

namespace btrads {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Actor a) noexcept { return a == Actor::System ? "System" : "Reviewer"; }

std::string_view to_string(AuditAction a) noexcept {
  switch (a) {
    case AuditAction::Scored: return "Scored";
    case AuditAction::VariablesEdited: return "VariablesEdited";
    case AuditAction::Rescored: return "Rescored";
    case AuditAction::Overridden: return "Overridden";
  }
  return "";
}

namespace {

std::optional<AuditAction> action_from_string(std::string_view s) {
  for (auto a : {AuditAction::Scored, AuditAction::VariablesEdited, AuditAction::Rescored, AuditAction::Overridden}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

std::string format_timestamp(std::chrono::system_clock::time_point t) {
  using namespace std::chrono;
  const auto us = time_point_cast<microseconds>(t);
  const auto day = floor<days>(us);
  const year_month_day ymd{day};
  const hh_mm_ss hms{us - day};
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:06}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                     hms.minutes().count(), hms.seconds().count(), hms.subseconds().count());
}

std::optional<std::chrono::system_clock::time_point> parse_timestamp(const std::string& s) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  long us = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%uT%u:%u:%u.%ldZ", &y, &mo, &d, &h, &mi, &sec, &us) != 7) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} + microseconds{us};
}

json variable_list(const std::vector<Variable>& vars) {
  json arr = json::array();
  for (Variable v : vars) arr.push_back(to_string(v));
  return arr;
}

std::vector<Variable> variable_list_from(const json& j) {
  std::vector<Variable> out;
  if (!j.is_array()) return out;
  for (const auto& v : j) {
    if (auto var = v.is_string() ? variable_from_string(v.get<std::string>()) : std::nullopt) out.push_back(*var);
  }
  return out;
}

void apply_event(ReviewerState& s, const AuditEvent& e) {
  const json& p = e.payload;
  switch (e.action) {
    case AuditAction::Scored:
      s = ReviewerState{};
      break;
    case AuditAction::VariablesEdited:
      s.variables = variables_from_json(p.at("variables"));
      s.reviewer_asserted = variable_list_from(p.at("reviewer_asserted"));
      s.rescore.reset();
      break;
    case AuditAction::Rescored:
      s.variables = variables_from_json(p.at("variables"));
      s.reviewer_asserted = variable_list_from(p.at("reviewer_asserted"));
      s.rescore = score_from_json(p.at("score"));
      break;
    case AuditAction::Overridden:
      if (!p.at("variables").is_null()) {
        s.variables = variables_from_json(p.at("variables"));
        s.reviewer_asserted = variable_list_from(p.at("reviewer_asserted"));
      }
      if (!p.at("category").is_null()) s.override_category = parse_btrads_label(p.at("category").get<std::string>()).category();
      s.override_reason = p.at("reason").get<std::string>();
      break;
  }
}

std::optional<std::string> first_divergence(const std::vector<TraceStep>& a, const std::vector<TraceStep>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].rule_id != b[i].rule_id || a[i].outcome != b[i].outcome) return b[i].rule_id;
  }
  if (b.size() > n) return b[n].rule_id;
  if (a.size() > n) return a[n].rule_id;
  return std::nullopt;
}

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace

json audit_event_to_json(const AuditEvent& e) {
  return {{"sequence", e.sequence},
          {"timestamp", e.timestamp},
          {"case_id", e.case_id},
          {"actor", to_string(e.actor)},
          {"action", to_string(e.action)},
          {"payload", e.payload}};
}

AuditEvent audit_event_from_json(const json& j) {
  try {
    AuditEvent e;
    e.sequence = j.at("sequence").get<std::uint64_t>();
    e.timestamp = j.at("timestamp").get<std::string>();
    e.case_id = j.at("case_id").get<std::string>();
    const auto actor = j.at("actor").get<std::string>();
    if (actor != "System" && actor != "Reviewer") throw Error(ErrorCode::ValidationError, "unknown actor " + actor);
    e.actor = actor == "System" ? Actor::System : Actor::Reviewer;
    auto action = action_from_string(j.at("action").get<std::string>());
    if (!action) throw Error(ErrorCode::ValidationError, "unknown audit action");
    e.action = *action;
    e.payload = j.at("payload");
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ValidationError, std::string("malformed audit event: ") + ex.what());
  }
}

json reviewer_state_to_json(const ReviewerState& s) {
  return {{"variables", s.variables ? variables_to_json(*s.variables) : json(nullptr)},
          {"reviewer_asserted", variable_list(s.reviewer_asserted)},
          {"rescore", s.rescore ? score_to_json(*s.rescore) : json(nullptr)},
          {"override_category", s.override_category ? json(to_string(*s.override_category)) : json(nullptr)},
          {"override_reason", s.override_reason ? json(*s.override_reason) : json(nullptr)}};
}

ReviewerState reviewer_state_from_json(const json& j) {
  ReviewerState s;
  if (!j.is_object()) return s;
  if (j.contains("variables") && !j["variables"].is_null()) s.variables = variables_from_json(j["variables"]);
  if (j.contains("reviewer_asserted")) s.reviewer_asserted = variable_list_from(j["reviewer_asserted"]);
  if (j.contains("rescore") && !j["rescore"].is_null()) s.rescore = score_from_json(j["rescore"]);
  if (j.contains("override_category") && j["override_category"].is_string()) {
    s.override_category = parse_btrads_label(j["override_category"].get<std::string>()).category();
  }
  if (j.contains("override_reason") && j["override_reason"].is_string()) {
    s.override_reason = j["override_reason"].get<std::string>();
  }
  return s;
}

std::map<std::string, ReviewerState> replay(std::span<const AuditEvent> events) {
  std::map<std::string, ReviewerState> out;
  for (const auto& e : events) apply_event(out[e.case_id], e);
  return out;
}

std::vector<Variable> check_reviewer_variables(const ClinicalVariables& edited, std::string_view note) {
  std::vector<Variable> asserted;
  std::string problems;
  for (const auto& v : validate_clinical_variables(edited, note)) {
    if (v.kind == ViolationKind::MissingEvidence) {
      asserted.push_back(v.variable);
    } else {
      problems += (problems.empty() ? "" : "; ") + std::string(to_string(v.variable)) + ": " + v.detail;
    }
  }
  if (!problems.empty()) throw Error(ErrorCode::ValidationError, problems);
  std::sort(asserted.begin(), asserted.end());
  asserted.erase(std::unique(asserted.begin(), asserted.end()), asserted.end());
  return asserted;
}

std::string case_file_name(std::string_view case_id) {
  std::string out;
  for (unsigned char ch : case_id) {
    if (std::isalnum(ch) || ch == '-' || ch == '_') {
      out += static_cast<char>(ch);
    } else {
      out += fmt::format("%{:02X}", ch);
    }
  }
  return out + ".json";
}

// ---------------------------------------------------------------------------

struct CaseStore::Entry {
  mutable std::mutex mutex;
  StoredCase data;
};

CaseStore::CaseStore(fs::path dir, Clock clock) : dir_(std::move(dir)), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
  std::error_code ec;
  fs::create_directories(dir_ / "cases", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create store at " + dir_.string() + ": " + ec.message());

  for (const auto& f : fs::directory_iterator(dir_ / "cases")) {
    if (f.path().extension() != ".json") continue;
    std::ifstream in(f.path());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, f.path().string() + ": " + e.what());
    }
    auto entry = std::make_unique<Entry>();
    entry->data.record = case_from_json(j.at("record"));
    entry->data.system = report_from_json(j.at("system_report"));
    entry->data.reviewer = reviewer_state_from_json(j.value("reviewer", json::object()));
    cases_[entry->data.record.case_id] = std::move(entry);
  }
  for (const auto& e : audit_log()) {
    next_sequence_ = std::max(next_sequence_, e.sequence + 1);
    if (auto t = parse_timestamp(e.timestamp)) last_time_ = std::max(last_time_, *t);
  }
}

CaseStore::~CaseStore() = default;

CaseStore::Entry& CaseStore::entry(const std::string& case_id) const {
  std::lock_guard lock(index_mutex_);
  auto it = cases_.find(case_id);
  if (it == cases_.end()) throw Error(ErrorCode::NotFound, "unknown case '" + case_id + "'");
  return *it->second;
}

void CaseStore::persist(const std::string& case_id, const StoredCase& c) const {
  const json j = {{"record", case_to_json(c.record)},
                  {"system_report", report_to_json(c.system)},
                  {"reviewer", reviewer_state_to_json(c.reviewer)}};
  write_atomically(dir_ / "cases" / case_file_name(case_id), j.dump(2) + "\n");
}

AuditEvent CaseStore::append(const std::string& case_id, Actor actor, AuditAction action, json payload) {
  std::lock_guard lock(audit_mutex_);
  AuditEvent e;
  e.sequence = next_sequence_;
  last_time_ = std::max(last_time_, clock_());
  e.timestamp = format_timestamp(last_time_);
  e.case_id = case_id;
  e.actor = actor;
  e.action = action;
  e.payload = std::move(payload);
  std::ofstream out(dir_ / "audit.jsonl", std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to audit log in " + dir_.string());
  out << audit_event_to_json(e).dump() << '\n';
  if (!out.flush()) throw Error(ErrorCode::IoError, "cannot append to audit log in " + dir_.string());
  ++next_sequence_;
  return e;
}

AuditEvent CaseStore::put_scored(const CaseRecord& record, const CaseReport& report) {
  Entry* e = nullptr;
  {
    std::lock_guard lock(index_mutex_);
    auto& slot = cases_[record.case_id];
    if (!slot) slot = std::make_unique<Entry>();
    e = slot.get();
  }
  std::lock_guard lock(e->mutex);
  e->data = StoredCase{record, report, ReviewerState{}};
  persist(record.case_id, e->data);
  return append(record.case_id, Actor::System, AuditAction::Scored,
                {{"status", to_string(report.status)},
                 {"category", report.score ? json(to_string(report.score->category)) : json(nullptr)}});
}

std::vector<std::string> CaseStore::ids() const {
  std::lock_guard lock(index_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : cases_) out.push_back(id);
  return out;
}

bool CaseStore::contains(const std::string& case_id) const {
  std::lock_guard lock(index_mutex_);
  return cases_.count(case_id) > 0;
}

StoredCase CaseStore::get(const std::string& case_id) const {
  Entry& e = entry(case_id);
  std::lock_guard lock(e.mutex);
  return e.data;
}

std::vector<CaseReport> CaseStore::system_reports() const {
  std::vector<CaseReport> out;
  for (const auto& id : ids()) out.push_back(get(id).system);
  return out;
}

RescoreOutcome CaseStore::rescore_with_edits(const std::string& case_id, const ClinicalVariables& edited,
                                             const PipelineConfig& config) {
  Entry& e = entry(case_id);
  std::lock_guard lock(e.mutex);
  const StoredCase& c = e.data;
  if (!c.record.has_baseline()) {
    throw Error(ErrorCode::ValidationError, "case '" + case_id + "' has no baseline volumetrics to rescore");
  }
  RescoreOutcome r;
  r.reviewer_asserted = check_reviewer_variables(edited, c.record.note_text);
  r.score = rescore_case(c.record, c.system, edited, config);
  const std::vector<TraceStep> none;
  const auto& system_trace = c.system.score ? c.system.score->trace : none;
  r.first_divergent_rule = first_divergence(system_trace, r.score.trace);
  if (c.system.score) {
    r.system_category = c.system.score->category;
    r.category_changed = r.system_category != r.score.category;
  } else {
    r.category_changed = true;
  }
  r.event = append(case_id, Actor::Reviewer, AuditAction::Rescored,
                   {{"variables", variables_to_json(edited)},
                    {"reviewer_asserted", variable_list(r.reviewer_asserted)},
                    {"score", score_to_json(r.score)},
                    {"system_category", c.system.score ? json(to_string(c.system.score->category)) : json(nullptr)}});
  apply_event(e.data.reviewer, r.event);
  persist(case_id, e.data);
  return r;
}

AuditEvent CaseStore::edit_variables(const std::string& case_id, const ClinicalVariables& edited) {
  Entry& e = entry(case_id);
  std::lock_guard lock(e.mutex);
  const auto asserted = check_reviewer_variables(edited, e.data.record.note_text);
  AuditEvent ev = append(case_id, Actor::Reviewer, AuditAction::VariablesEdited,
                         {{"variables", variables_to_json(edited)}, {"reviewer_asserted", variable_list(asserted)}});
  apply_event(e.data.reviewer, ev);
  persist(case_id, e.data);
  return ev;
}

AuditEvent CaseStore::record_override(const std::string& case_id, const std::optional<ClinicalVariables>& reviewer_vars,
                                      const std::optional<Category>& reviewer_category, const std::string& reason) {
  Entry& e = entry(case_id);
  std::lock_guard lock(e.mutex);
  if (reason.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::ValidationError, "override reason must not be empty");
  }
  if (!reviewer_vars && !reviewer_category) {
    throw Error(ErrorCode::ValidationError, "override needs reviewer variables or a reviewer category");
  }
  std::vector<Variable> asserted;
  if (reviewer_vars) asserted = check_reviewer_variables(*reviewer_vars, e.data.record.note_text);
  AuditEvent ev = append(
      case_id, Actor::Reviewer, AuditAction::Overridden,
      {{"variables", reviewer_vars ? variables_to_json(*reviewer_vars) : json(nullptr)},
       {"reviewer_asserted", variable_list(asserted)},
       {"category", reviewer_category ? json(to_string(*reviewer_category)) : json(nullptr)},
       {"system_category", e.data.system.score ? json(to_string(e.data.system.score->category)) : json(nullptr)},
       {"reason", reason}});
  apply_event(e.data.reviewer, ev);
  persist(case_id, e.data);
  return ev;
}

std::vector<AuditEvent> CaseStore::audit_log() const {
  std::lock_guard lock(audit_mutex_);
  std::vector<AuditEvent> out;
  std::ifstream in(dir_ / "audit.jsonl");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(audit_event_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, "audit log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace btrads
