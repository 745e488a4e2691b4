#include "btrads/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace btrads {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ValidationError, msg); }

void expect_object(const json& j, const std::string& what) {
  if (!j.is_object()) invalid(what + " must be an object");
}

void only_keys(const json& j, std::initializer_list<std::string_view> keys, const std::string& what) {
  for (const auto& [k, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      invalid(what + ": unexpected field '" + k + "'");
    }
  }
}

const json& need(const json& j, const char* key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) invalid(what + ": missing field '" + key + "'");
  return *it;
}

bool has_value(const json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && !it->is_null();
}

std::string get_string(const json& v, const std::string& what) {
  if (!v.is_string()) invalid(what + " must be a string");
  return v.get<std::string>();
}

double get_number(const json& v, const std::string& what) {
  if (!v.is_number()) invalid(what + " must be a number");
  return v.get<double>();
}

bool get_bool(const json& v, const std::string& what) {
  if (!v.is_boolean()) invalid(what + " must be true or false");
  return v.get<bool>();
}

std::size_t get_offset(const json& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) invalid(what + " must be a non-negative integer");
  return v.get<std::size_t>();
}

Date get_date(const json& v, const std::string& what) {
  auto d = Date::parse_iso(get_string(v, what));
  if (!d) invalid(what + " must be a YYYY-MM-DD date");
  return *d;
}

std::optional<Date> get_opt_date(const json& j, const char* key, const std::string& what) {
  if (!has_value(j, key)) return std::nullopt;
  return get_date(j.at(key), what + "." + key);
}

template <typename E, typename F>
E get_enum(const json& v, F parse, const std::string& what) {
  auto e = parse(get_string(v, what));
  if (!e) invalid(what + ": unknown value '" + v.get<std::string>() + "'");
  return *e;
}

json opt_date(const std::optional<Date>& d) { return d ? json(d->iso()) : json(nullptr); }

std::optional<Category> category_from_text(std::string_view s) {
  ObservedLabel l = parse_btrads_label(s);
  return l.category();
}

}  // namespace

json label_to_json(const ObservedLabel& l) { return l.text(); }

ObservedLabel label_from_json(const json& j) {
  if (!j.is_string()) invalid("label must be a string");
  return parse_btrads_label(j.get<std::string>());
}

json span_to_json(const EvidenceSpan& s) {
  return {{"start", s.start}, {"end", s.end}, {"quoted_text", s.quoted_text}};
}

EvidenceSpan span_from_json(const json& j) {
  expect_object(j, "evidence span");
  only_keys(j, {"start", "end", "quoted_text"}, "evidence span");
  EvidenceSpan s;
  s.start = get_offset(need(j, "start", "evidence span"), "evidence span start");
  s.end = get_offset(need(j, "end", "evidence span"), "evidence span end");
  s.quoted_text = get_string(need(j, "quoted_text", "evidence span"), "evidence span quoted_text");
  return s;
}

json variables_to_json(const ClinicalVariables& v) {
  json evidence = json::object();
  for (Variable var : kAllVariables) {
    const auto& s = v.evidence_for(var);
    evidence[std::string(to_string(var))] = s ? span_to_json(*s) : json(nullptr);
  }
  json cues = json::array();
  for (Variable var : v.conflicting_cues) cues.push_back(to_string(var));
  return {{"steroid_status", to_string(v.steroid_status)},
          {"bevacizumab_status", to_string(v.bevacizumab_status)},
          {"radiation_completion_date", opt_date(v.radiation_completion_date)},
          {"evidence", evidence},
          {"conflicting_cues", cues}};
}

ClinicalVariables variables_from_json(const json& j, bool allow_partial) {
  const std::string what = "variables";
  expect_object(j, what);
  only_keys(j, {"steroid_status", "bevacizumab_status", "radiation_completion_date", "evidence", "conflicting_cues"},
            what);
  ClinicalVariables v;
  auto status = [&](const char* key, MedicationStatus& out) {
    if (!j.contains(key)) {
      if (!allow_partial) invalid(what + ": missing field '" + key + "'");
      return;
    }
    out = get_enum<MedicationStatus>(j.at(key), medication_status_from_string, what + "." + key);
  };
  status("steroid_status", v.steroid_status);
  status("bevacizumab_status", v.bevacizumab_status);
  if (!allow_partial && !j.contains("radiation_completion_date")) {
    invalid(what + ": missing field 'radiation_completion_date'");
  }
  v.radiation_completion_date = get_opt_date(j, "radiation_completion_date", what);
  if (j.contains("evidence") && !j.at("evidence").is_null()) {
    const json& ev = j.at("evidence");
    expect_object(ev, what + ".evidence");
    for (const auto& [k, span] : ev.items()) {
      auto var = variable_from_string(k);
      if (!var) invalid(what + ".evidence: unknown variable '" + k + "'");
      if (!span.is_null()) v.evidence_for(*var) = span_from_json(span);
    }
  }
  if (j.contains("conflicting_cues")) {
    const json& cues = j.at("conflicting_cues");
    if (!cues.is_array()) invalid(what + ".conflicting_cues must be an array");
    for (const auto& c : cues) {
      v.conflicting_cues.push_back(get_enum<Variable>(c, variable_from_string, what + ".conflicting_cues"));
    }
  }
  return v;
}

json adjudication_to_json(const Adjudication& a) {
  return {{"cause", a.cause ? json(to_string(*a.cause)) : json(nullptr)},
          {"correct_if_perfect_extraction", a.correct_if_perfect_extraction},
          {"correct_if_perfect_algorithm", a.correct_if_perfect_algorithm},
          {"correct_if_perfect_both", a.correct_if_perfect_both},
          {"expert_variables", a.expert_variables ? variables_to_json(*a.expert_variables) : json(nullptr)}};
}

Adjudication adjudication_from_json(const json& j) {
  const std::string what = "adjudication";
  expect_object(j, what);
  only_keys(j, {"cause", "correct_if_perfect_extraction", "correct_if_perfect_algorithm", "correct_if_perfect_both",
                "expert_variables"},
            what);
  Adjudication a;
  if (has_value(j, "cause")) a.cause = get_enum<ErrorCause>(j.at("cause"), error_cause_from_string, what + ".cause");
  auto flag = [&](const char* key, bool& out) {
    if (j.contains(key)) out = get_bool(j.at(key), what + "." + key);
  };
  flag("correct_if_perfect_extraction", a.correct_if_perfect_extraction);
  flag("correct_if_perfect_algorithm", a.correct_if_perfect_algorithm);
  flag("correct_if_perfect_both", a.correct_if_perfect_both);
  if (has_value(j, "expert_variables")) a.expert_variables = variables_from_json(j.at("expert_variables"));
  return a;
}

json case_to_json(const CaseRecord& c) {
  json j = {{"case_id", c.case_id},
            {"baseline_exam_id", c.baseline_exam_id ? json(*c.baseline_exam_id) : json(nullptr)},
            {"baseline_date", opt_date(c.baseline_date)},
            {"followup_date", c.followup_date.iso()},
            {"baseline_flair_ml", c.baseline_flair_ml},
            {"followup_flair_ml", c.followup_flair_ml},
            {"baseline_enh_ml", c.baseline_enh_ml},
            {"followup_enh_ml", c.followup_enh_ml},
            {"note_text", c.note_text},
            {"reference_label", c.reference_label ? label_to_json(*c.reference_label) : json(nullptr)},
            {"initial_clinical_label",
             c.initial_clinical_label ? label_to_json(*c.initial_clinical_label) : json(nullptr)},
            {"qc_pass", c.qc_pass}};
  if (c.adjudication) j["adjudication"] = adjudication_to_json(*c.adjudication);
  return j;
}

CaseRecord case_from_json(const json& j) {
  std::string what = "case";
  expect_object(j, what);
  only_keys(j, {"case_id", "baseline_exam_id", "baseline_date", "followup_date", "baseline_flair_ml",
                "followup_flair_ml", "baseline_enh_ml", "followup_enh_ml", "note_text", "reference_label",
                "initial_clinical_label", "qc_pass", "adjudication"},
            what);
  CaseRecord c;
  c.case_id = get_string(need(j, "case_id", what), "case_id");
  if (c.case_id.empty()) invalid("case_id must not be empty");
  what = "case " + c.case_id;
  if (has_value(j, "baseline_exam_id")) c.baseline_exam_id = get_string(j.at("baseline_exam_id"), what + ".baseline_exam_id");
  c.baseline_date = get_opt_date(j, "baseline_date", what);
  c.followup_date = get_date(need(j, "followup_date", what), what + ".followup_date");
  auto volume = [&](const char* key, double& out) {
    if (!has_value(j, key)) {
      if (c.has_baseline() || std::string_view(key).starts_with("followup")) {
        invalid(what + ": missing field '" + key + "'");
      }
      return;
    }
    out = get_number(j.at(key), what + "." + key);
  };
  volume("baseline_flair_ml", c.baseline_flair_ml);
  volume("followup_flair_ml", c.followup_flair_ml);
  volume("baseline_enh_ml", c.baseline_enh_ml);
  volume("followup_enh_ml", c.followup_enh_ml);
  c.note_text = get_string(need(j, "note_text", what), what + ".note_text");
  if (has_value(j, "reference_label")) c.reference_label = label_from_json(j.at("reference_label"));
  if (has_value(j, "initial_clinical_label")) c.initial_clinical_label = label_from_json(j.at("initial_clinical_label"));
  if (j.contains("qc_pass")) c.qc_pass = get_bool(j.at("qc_pass"), what + ".qc_pass");
  if (has_value(j, "adjudication")) c.adjudication = adjudication_from_json(j.at("adjudication"));
  check_case_invariants(c);
  return c;
}

namespace {

json change_to_json(const PercentChange& p) {
  switch (p.kind) {
    case PercentChange::Kind::Value: return {{"kind", "value"}, {"percent", p.percent}};
    case PercentChange::Kind::NewFromZero: return {{"kind", "new_from_zero"}};
    case PercentChange::Kind::BothZero: return {{"kind", "both_zero"}};
  }
  return nullptr;
}

PercentChange change_from_json(const json& j, const std::string& what) {
  expect_object(j, what);
  const std::string kind = get_string(need(j, "kind", what), what + ".kind");
  if (kind == "value") return PercentChange::value(get_number(need(j, "percent", what), what + ".percent"));
  if (kind == "new_from_zero") return PercentChange::new_from_zero();
  if (kind == "both_zero") return PercentChange::both_zero();
  invalid(what + ": unknown kind '" + kind + "'");
}

}  // namespace

json volumetrics_to_json(const VolumetricChange& v) {
  return {{"flair_change", change_to_json(v.flair_change)},
          {"enh_change", change_to_json(v.enh_change)},
          {"flair_trend", to_string(v.flair_trend)},
          {"enh_trend", to_string(v.enh_trend)}};
}

VolumetricChange volumetrics_from_json(const json& j) {
  const std::string what = "volumetrics";
  expect_object(j, what);
  VolumetricChange v;
  v.flair_change = change_from_json(need(j, "flair_change", what), what + ".flair_change");
  v.enh_change = change_from_json(need(j, "enh_change", what), what + ".enh_change");
  v.flair_trend = get_enum<Trend>(need(j, "flair_trend", what), trend_from_string, what + ".flair_trend");
  v.enh_trend = get_enum<Trend>(need(j, "enh_trend", what), trend_from_string, what + ".enh_trend");
  return v;
}

json window_to_json(const RadiationWindow& w) {
  return {{"status", to_string(w.status)}, {"days_since", w.days_since ? json(*w.days_since) : json(nullptr)}};
}

RadiationWindow window_from_json(const json& j) {
  const std::string what = "radiation_window";
  expect_object(j, what);
  RadiationWindow w;
  w.status = get_enum<WindowStatus>(need(j, "status", what), window_status_from_string, what + ".status");
  if (has_value(j, "days_since")) {
    if (!j.at("days_since").is_number_integer()) invalid(what + ".days_since must be an integer");
    w.days_since = j.at("days_since").get<int>();
  }
  return w;
}

json score_to_json(const ScoreResult& s) {
  json trace = json::array();
  for (const auto& t : s.trace) {
    trace.push_back({{"rule_id", t.rule_id}, {"inputs_summary", t.inputs_summary}, {"outcome", t.outcome}});
  }
  json flags = json::array();
  for (auto f : s.flags) flags.push_back(to_string(f));
  return {{"category", to_string(s.category)}, {"trace", trace}, {"flags", flags}};
}

ScoreResult score_from_json(const json& j) {
  const std::string what = "score";
  expect_object(j, what);
  ScoreResult s;
  s.category = get_enum<Category>(need(j, "category", what), category_from_text, what + ".category");
  const json& trace = need(j, "trace", what);
  if (!trace.is_array()) invalid(what + ".trace must be an array");
  for (const auto& t : trace) {
    expect_object(t, what + ".trace step");
    s.trace.push_back({get_string(need(t, "rule_id", "trace step"), "rule_id"),
                       get_string(need(t, "inputs_summary", "trace step"), "inputs_summary"),
                       get_string(need(t, "outcome", "trace step"), "outcome")});
  }
  const json& flags = need(j, "flags", what);
  if (!flags.is_array()) invalid(what + ".flags must be an array");
  for (const auto& f : flags) s.flags.push_back(get_enum<ScoreFlag>(f, score_flag_from_string, what + ".flags"));
  return s;
}

json conflict_to_json(const ConflictFlag& f) { return {{"kind", to_string(f.kind)}, {"detail", f.detail}}; }

ConflictFlag conflict_from_json(const json& j) {
  expect_object(j, "conflict");
  return {get_enum<ConflictKind>(need(j, "kind", "conflict"), conflict_kind_from_string, "conflict.kind"),
          get_string(need(j, "detail", "conflict"), "conflict.detail")};
}

json report_to_json(const CaseReport& r) {
  json conflicts = json::array();
  for (const auto& f : r.conflicts) conflicts.push_back(conflict_to_json(f));
  auto opt_bool = [](const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); };
  json j = {{"case_id", r.case_id},
            {"status", to_string(r.status)},
            {"exclusion", r.exclusion ? json(to_string(*r.exclusion)) : json(nullptr)},
            {"failure_reason", r.failure_reason ? json(*r.failure_reason) : json(nullptr)},
            {"variables", variables_to_json(r.variables)},
            {"volumetrics", r.volumetrics ? volumetrics_to_json(*r.volumetrics) : json(nullptr)},
            {"radiation_window", window_to_json(r.radiation_window)},
            {"score", r.score ? score_to_json(*r.score) : json(nullptr)},
            {"conflicts", conflicts},
            {"reference_label", r.reference_label ? label_to_json(*r.reference_label) : json(nullptr)},
            {"initial_clinical_label",
             r.initial_clinical_label ? label_to_json(*r.initial_clinical_label) : json(nullptr)},
            {"correct_vs_reference", opt_bool(r.correct_vs_reference)},
            {"initial_correct", opt_bool(r.initial_correct)}};
  if (r.adjudication) j["adjudication"] = adjudication_to_json(*r.adjudication);
  return j;
}

CaseReport report_from_json(const json& j) {
  std::string what = "report";
  expect_object(j, what);
  only_keys(j, {"case_id", "status", "exclusion", "failure_reason", "variables", "volumetrics", "radiation_window",
                "score", "conflicts", "reference_label", "initial_clinical_label", "correct_vs_reference",
                "initial_correct", "adjudication"},
            what);
  CaseReport r;
  r.case_id = get_string(need(j, "case_id", what), "case_id");
  what = "report " + r.case_id;
  r.status = get_enum<CaseStatus>(need(j, "status", what), case_status_from_string, what + ".status");
  if (has_value(j, "exclusion")) {
    r.exclusion = get_enum<ExclusionReason>(j.at("exclusion"), exclusion_reason_from_string, what + ".exclusion");
  }
  if (has_value(j, "failure_reason")) r.failure_reason = get_string(j.at("failure_reason"), what + ".failure_reason");
  r.variables = variables_from_json(need(j, "variables", what));
  if (has_value(j, "volumetrics")) r.volumetrics = volumetrics_from_json(j.at("volumetrics"));
  r.radiation_window = window_from_json(need(j, "radiation_window", what));
  if (has_value(j, "score")) r.score = score_from_json(j.at("score"));
  const json& conflicts = need(j, "conflicts", what);
  if (!conflicts.is_array()) invalid(what + ".conflicts must be an array");
  for (const auto& f : conflicts) r.conflicts.push_back(conflict_from_json(f));
  if (has_value(j, "reference_label")) r.reference_label = label_from_json(j.at("reference_label"));
  if (has_value(j, "initial_clinical_label")) r.initial_clinical_label = label_from_json(j.at("initial_clinical_label"));
  if (has_value(j, "correct_vs_reference")) {
    r.correct_vs_reference = get_bool(j.at("correct_vs_reference"), what + ".correct_vs_reference");
  }
  if (has_value(j, "initial_correct")) r.initial_correct = get_bool(j.at("initial_correct"), what + ".initial_correct");
  if (has_value(j, "adjudication")) r.adjudication = adjudication_from_json(j.at("adjudication"));
  if (r.status == CaseStatus::Scored && !r.score) invalid(what + ": scored report without a score");
  if (r.status == CaseStatus::Excluded && !r.exclusion) invalid(what + ": excluded report without a reason");
  return r;
}

namespace {

template <typename T, typename F>
std::vector<T> read_lines(std::istream& in, F parse, const char* kind) {
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError,
                  std::string(kind) + " file line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      out.push_back(parse(j));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(kind) + " file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return in;
}

}  // namespace

std::vector<CaseRecord> read_cases(std::istream& in) {
  auto cases = read_lines<CaseRecord>(in, case_from_json, "case");
  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.case_id);
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
    invalid("duplicate case_id '" + *dup + "'");
  }
  return cases;
}

std::vector<CaseRecord> read_cases_file(const std::string& path) {
  auto in = open_input(path);
  return read_cases(in);
}

void write_cases(std::ostream& out, const std::vector<CaseRecord>& cases) {
  for (const auto& c : cases) out << case_to_json(c).dump() << '\n';
}

std::vector<CaseReport> read_reports(std::istream& in) {
  return read_lines<CaseReport>(in, report_from_json, "report");
}

std::vector<CaseReport> read_reports_file(const std::string& path) {
  auto in = open_input(path);
  return read_reports(in);
}

void write_reports(std::ostream& out, const std::vector<CaseReport>& reports) {
  for (const auto& r : reports) out << report_to_json(r).dump() << '\n';
}

}  // namespace btrads
