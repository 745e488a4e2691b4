#pragma once

// Shared vocabulary for the BT-RADS scoring pipeline: categories, observed
// labels (including non-standard clinical nomenclature), clinical variables
// with evidence spans, and the per-examination case record.

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace btrads {

enum class ErrorCode {
  InvalidVolume,
  InvalidDate,
  DomainError,
  ConfigError,
  TransportError,
  SchemaViolation,
  SpanVerificationFailure,
  ValidationError,
  NotFound,
  EmptyCohort,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Categories and labels

enum class Category : std::uint8_t { BT0, BT1a, BT1b, BT2, BT3a, BT3b, BT3c, BT4 };

inline constexpr std::array<Category, 8> kAllCategories = {
    Category::BT0,  Category::BT1a, Category::BT1b, Category::BT2,
    Category::BT3a, Category::BT3b, Category::BT3c, Category::BT4};

// The seven categories a follow-up with a usable baseline can receive.
inline constexpr std::array<Category, 7> kFollowupCategories = {
    Category::BT1a, Category::BT1b, Category::BT2, Category::BT3a,
    Category::BT3b, Category::BT3c, Category::BT4};

/// Ordinal rank used by weighted agreement statistics (BT-0 = 0 ... BT-4 = 7).
constexpr int rank(Category c) noexcept { return static_cast<int>(c); }

/// Canonical rendering, e.g. "BT-3c".
std::string_view to_string(Category c) noexcept;

enum class NonStandardReason { InvalidSubcategory, MissingSubcategory, Unparseable };

std::string_view to_string(NonStandardReason r) noexcept;

struct NonStandardLabel {
  std::string raw_text;
  NonStandardReason reason = NonStandardReason::Unparseable;

  bool operator==(const NonStandardLabel&) const = default;
};

/// A label as written by a human reader. Non-standard labels never equal a
/// standard category, so they always count against the system in accuracy.
class ObservedLabel {
 public:
  ObservedLabel(Category c) : value_(c) {}  // NOLINT(google-explicit-constructor)
  ObservedLabel(NonStandardLabel ns) : value_(std::move(ns)) {}  // NOLINT

  bool is_standard() const noexcept { return std::holds_alternative<Category>(value_); }
  std::optional<Category> category() const noexcept {
    if (auto* c = std::get_if<Category>(&value_)) return *c;
    return std::nullopt;
  }
  const NonStandardLabel* non_standard() const noexcept {
    return std::get_if<NonStandardLabel>(&value_);
  }
  bool matches(Category predicted) const noexcept {
    auto c = category();
    return c && *c == predicted;
  }
  /// Canonical text for standard labels, the original text otherwise.
  std::string text() const;

  bool operator==(const ObservedLabel&) const = default;

 private:
  std::variant<Category, NonStandardLabel> value_;
};

/// Total: every input maps to some ObservedLabel.
ObservedLabel parse_btrads_label(std::string_view raw);

// ---------------------------------------------------------------------------
// Calendar dates

class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}
  static std::optional<Date> from_ymd(int y, unsigned m, unsigned d);
  /// Strict YYYY-MM-DD; two-digit years and impossible dates are rejected.
  static std::optional<Date> parse_iso(std::string_view text);

  std::chrono::sys_days days() const noexcept { return days_; }
  std::string iso() const;
  Date plus_days(int n) const { return Date{days_ + std::chrono::days{n}}; }
  /// Signed day count from *this to other.
  int days_until(Date other) const noexcept {
    return static_cast<int>((other.days_ - days_).count());
  }

  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

// ---------------------------------------------------------------------------
// Clinical variables

enum class MedicationStatus { None, Active, Recent };

std::string_view to_string(MedicationStatus s) noexcept;
std::optional<MedicationStatus> medication_status_from_string(std::string_view s) noexcept;

enum class Variable { Steroid = 0, Bevacizumab = 1, RadiationDate = 2 };

inline constexpr std::array<Variable, 3> kAllVariables = {
    Variable::Steroid, Variable::Bevacizumab, Variable::RadiationDate};

/// Field name as used in record files and schemas, e.g. "steroid_status".
std::string_view to_string(Variable v) noexcept;
std::optional<Variable> variable_from_string(std::string_view s) noexcept;

struct EvidenceSpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string quoted_text;

  bool operator==(const EvidenceSpan&) const = default;
};

struct ClinicalVariables {
  MedicationStatus steroid_status = MedicationStatus::None;
  MedicationStatus bevacizumab_status = MedicationStatus::None;
  std::optional<Date> radiation_completion_date;
  std::array<std::optional<EvidenceSpan>, 3> evidence{};
  /// Medications whose note carried contradictory status cues.
  std::vector<Variable> conflicting_cues;

  const std::optional<EvidenceSpan>& evidence_for(Variable v) const {
    return evidence[static_cast<std::size_t>(v)];
  }
  std::optional<EvidenceSpan>& evidence_for(Variable v) {
    return evidence[static_cast<std::size_t>(v)];
  }
  /// True when the variable holds something other than none / Unknown.
  bool is_non_default(Variable v) const noexcept;

  bool operator==(const ClinicalVariables&) const = default;
};

enum class ViolationKind { InvalidValue, MissingEvidence, SpanOutOfBounds, SpanMismatch };

std::string_view to_string(ViolationKind k) noexcept;

struct Violation {
  Variable variable;
  ViolationKind kind;
  std::string detail;
};

/// Offset bounds and verbatim match for every present span.
std::vector<Violation> verify_evidence_spans(std::string_view note, const ClinicalVariables& vars);

/// Enum ranges, span checks, and evidence presence for non-default values.
std::vector<Violation> validate_clinical_variables(const ClinicalVariables& vars,
                                                   std::string_view note);

// ---------------------------------------------------------------------------
// Review adjudication carried alongside a case (error attribution and
// counterfactual ceiling flags, expert-annotated variables).

enum class ErrorCause { ThresholdBoundary, ExtractionError, AlgorithmLimitation, GroundTruthAmbiguity };

inline constexpr std::array<ErrorCause, 4> kAllErrorCauses = {
    ErrorCause::ThresholdBoundary, ErrorCause::ExtractionError,
    ErrorCause::AlgorithmLimitation, ErrorCause::GroundTruthAmbiguity};

std::string_view to_string(ErrorCause c) noexcept;
std::optional<ErrorCause> error_cause_from_string(std::string_view s) noexcept;

struct Adjudication {
  std::optional<ErrorCause> cause;
  bool correct_if_perfect_extraction = false;
  bool correct_if_perfect_algorithm = false;
  /// Fixed only when extraction and algorithm are both perfected.
  bool correct_if_perfect_both = false;
  std::optional<ClinicalVariables> expert_variables;

  bool operator==(const Adjudication&) const = default;
};

// ---------------------------------------------------------------------------

struct CaseRecord {
  std::string case_id;
  std::optional<std::string> baseline_exam_id;
  std::optional<Date> baseline_date;
  Date followup_date;
  double baseline_flair_ml = 0.0;
  double followup_flair_ml = 0.0;
  double baseline_enh_ml = 0.0;
  double followup_enh_ml = 0.0;
  std::string note_text;
  std::optional<ObservedLabel> reference_label;
  std::optional<ObservedLabel> initial_clinical_label;
  bool qc_pass = true;
  std::optional<Adjudication> adjudication;

  bool has_baseline() const noexcept { return baseline_exam_id.has_value(); }

  bool operator==(const CaseRecord&) const = default;
};

/// Throws Error(ValidationError) when volumes are negative or non-finite or
/// the follow-up precedes the baseline.
void check_case_invariants(const CaseRecord& c);

}  // namespace btrads
