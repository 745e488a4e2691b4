#include "btrads/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace btrads {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidVolume: return "InvalidVolume";
    case ErrorCode::InvalidDate: return "InvalidDate";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::SpanVerificationFailure: return "SpanVerificationFailure";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::BT0: return "BT-0";
    case Category::BT1a: return "BT-1a";
    case Category::BT1b: return "BT-1b";
    case Category::BT2: return "BT-2";
    case Category::BT3a: return "BT-3a";
    case Category::BT3b: return "BT-3b";
    case Category::BT3c: return "BT-3c";
    case Category::BT4: return "BT-4";
  }
  return "BT-?";
}

std::string_view to_string(NonStandardReason r) noexcept {
  switch (r) {
    case NonStandardReason::InvalidSubcategory: return "InvalidSubcategory";
    case NonStandardReason::MissingSubcategory: return "MissingSubcategory";
    case NonStandardReason::Unparseable: return "Unparseable";
  }
  return "Unparseable";
}

std::string ObservedLabel::text() const {
  if (auto c = category()) return std::string(to_string(*c));
  return non_standard()->raw_text;
}

namespace {

std::string normalize_label(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char ch : raw) {
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  // Leading "bt-rads", "btrads", "bt" in any punctuation variant.
  auto strip_prefix = [&s](std::string_view prefix) {
    if (s.rfind(prefix, 0) == 0) {
      s.erase(0, prefix.size());
      return true;
    }
    return false;
  };
  auto trim_separators = [&s] {
    std::size_t i = 0;
    while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == '-' ||
                            s[i] == '_' || s[i] == ':')) {
      ++i;
    }
    s.erase(0, i);
  };
  trim_separators();
  if (strip_prefix("bt-rads") || strip_prefix("btrads") || strip_prefix("bt rads") ||
      strip_prefix("bt")) {
    trim_separators();
  }
  std::string out;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.' ||
        ch == '(' || ch == ')') {
      continue;
    }
    out.push_back(ch);
  }
  return out;
}

}  // namespace

ObservedLabel parse_btrads_label(std::string_view raw) {
  const std::string s = normalize_label(raw);
  static constexpr std::array<std::pair<std::string_view, Category>, 8> kCanonical = {{
      {"0", Category::BT0},
      {"1a", Category::BT1a},
      {"1b", Category::BT1b},
      {"2", Category::BT2},
      {"3a", Category::BT3a},
      {"3b", Category::BT3b},
      {"3c", Category::BT3c},
      {"4", Category::BT4},
  }};
  for (const auto& [text, cat] : kCanonical) {
    if (s == text) return cat;
  }
  std::string raw_text(raw);
  if (s == "1" || s == "3") {
    return NonStandardLabel{raw_text, NonStandardReason::MissingSubcategory};
  }
  if (s.size() == 2 && s[0] >= '0' && s[0] <= '4' && std::isalpha(static_cast<unsigned char>(s[1]))) {
    return NonStandardLabel{raw_text, NonStandardReason::InvalidSubcategory};
  }
  return NonStandardLabel{raw_text, NonStandardReason::Unparseable};
}

// ---------------------------------------------------------------------------

std::optional<Date> Date::from_ymd(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{sys_days{ymd}};
}

std::optional<Date> Date::parse_iso(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto digits = [&](std::size_t from, std::size_t n) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = from; i < from + n; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  auto y = digits(0, 4);
  auto m = digits(5, 2);
  auto d = digits(8, 2);
  if (!y || !m || !d) return std::nullopt;
  return from_ymd(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
}

std::string Date::iso() const {
  using namespace std::chrono;
  const year_month_day ymd{days_};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

// ---------------------------------------------------------------------------

std::string_view to_string(MedicationStatus s) noexcept {
  switch (s) {
    case MedicationStatus::None: return "none";
    case MedicationStatus::Active: return "active";
    case MedicationStatus::Recent: return "recent";
  }
  return "none";
}

std::optional<MedicationStatus> medication_status_from_string(std::string_view s) noexcept {
  if (s == "none") return MedicationStatus::None;
  if (s == "active") return MedicationStatus::Active;
  if (s == "recent") return MedicationStatus::Recent;
  return std::nullopt;
}

std::string_view to_string(Variable v) noexcept {
  switch (v) {
    case Variable::Steroid: return "steroid_status";
    case Variable::Bevacizumab: return "bevacizumab_status";
    case Variable::RadiationDate: return "radiation_completion_date";
  }
  return "";
}

std::optional<Variable> variable_from_string(std::string_view s) noexcept {
  for (Variable v : kAllVariables) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

bool ClinicalVariables::is_non_default(Variable v) const noexcept {
  switch (v) {
    case Variable::Steroid: return steroid_status != MedicationStatus::None;
    case Variable::Bevacizumab: return bevacizumab_status != MedicationStatus::None;
    case Variable::RadiationDate: return radiation_completion_date.has_value();
  }
  return false;
}

std::string_view to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::InvalidValue: return "InvalidValue";
    case ViolationKind::MissingEvidence: return "MissingEvidence";
    case ViolationKind::SpanOutOfBounds: return "SpanOutOfBounds";
    case ViolationKind::SpanMismatch: return "SpanMismatch";
  }
  return "";
}

std::vector<Violation> verify_evidence_spans(std::string_view note, const ClinicalVariables& vars) {
  std::vector<Violation> out;
  for (Variable v : kAllVariables) {
    const auto& span = vars.evidence_for(v);
    if (!span) continue;
    if (span->start >= span->end || span->end > note.size()) {
      out.push_back({v, ViolationKind::SpanOutOfBounds,
                     "span [" + std::to_string(span->start) + "," + std::to_string(span->end) +
                         ") outside note of length " + std::to_string(note.size())});
      continue;
    }
    if (note.substr(span->start, span->end - span->start) != span->quoted_text) {
      out.push_back({v, ViolationKind::SpanMismatch,
                     "quoted text does not match note at [" + std::to_string(span->start) + "," +
                         std::to_string(span->end) + ")"});
    }
  }
  return out;
}

std::vector<Violation> validate_clinical_variables(const ClinicalVariables& vars,
                                                   std::string_view note) {
  std::vector<Violation> out;
  auto in_enum = [](MedicationStatus s) {
    return s == MedicationStatus::None || s == MedicationStatus::Active ||
           s == MedicationStatus::Recent;
  };
  if (!in_enum(vars.steroid_status)) {
    out.push_back({Variable::Steroid, ViolationKind::InvalidValue, "status outside enumeration"});
  }
  if (!in_enum(vars.bevacizumab_status)) {
    out.push_back({Variable::Bevacizumab, ViolationKind::InvalidValue, "status outside enumeration"});
  }
  for (Variable v : kAllVariables) {
    if (vars.is_non_default(v) && !vars.evidence_for(v)) {
      out.push_back({v, ViolationKind::MissingEvidence, "non-default value without evidence span"});
    }
  }
  auto spans = verify_evidence_spans(note, vars);
  out.insert(out.end(), spans.begin(), spans.end());
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ErrorCause c) noexcept {
  switch (c) {
    case ErrorCause::ThresholdBoundary: return "threshold_boundary";
    case ErrorCause::ExtractionError: return "extraction_error";
    case ErrorCause::AlgorithmLimitation: return "algorithm_limitation";
    case ErrorCause::GroundTruthAmbiguity: return "ground_truth_ambiguity";
  }
  return "";
}

std::optional<ErrorCause> error_cause_from_string(std::string_view s) noexcept {
  for (ErrorCause c : kAllErrorCauses) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

void check_case_invariants(const CaseRecord& c) {
  auto check = [&](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::ValidationError,
                  "case " + c.case_id + ": " + name + " must be finite and non-negative");
    }
  };
  check(c.baseline_flair_ml, "baseline_flair_ml");
  check(c.followup_flair_ml, "followup_flair_ml");
  check(c.baseline_enh_ml, "baseline_enh_ml");
  check(c.followup_enh_ml, "followup_enh_ml");
  if (c.case_id.empty()) throw Error(ErrorCode::ValidationError, "case_id must not be empty");
  if (c.has_baseline() && c.baseline_date && *c.baseline_date > c.followup_date) {
    throw Error(ErrorCode::ValidationError,
                "case " + c.case_id + ": followup_date precedes baseline_date");
  }
}

}  // namespace btrads
