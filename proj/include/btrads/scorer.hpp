#pragma once

// Deterministic BT-RADS decision engine. Rules are evaluated in a fixed order
// and every evaluated rule is recorded in the trace, so a reviewer can replay
// the path that produced a category. Rule ids ("R0" ... "R3f") are stable
// strings consumed by the review service and error-attribution tooling.

#include <optional>
#include <string>
#include <vector>

#include "btrads/core.hpp"
#include "btrads/volumetrics.hpp"

namespace btrads {

enum class WindowStatus { Within90Days, Beyond90Days, Unknown };

std::string_view to_string(WindowStatus s) noexcept;
std::optional<WindowStatus> window_status_from_string(std::string_view s) noexcept;

struct RadiationWindow {
  WindowStatus status = WindowStatus::Unknown;
  std::optional<int> days_since;

  bool operator==(const RadiationWindow&) const = default;
};

/// Unknown when the completion date is unknown or falls after the follow-up.
RadiationWindow radiation_window_status(const std::optional<Date>& completion, Date followup,
                                        int window_days = 90);

enum class Direction { Improvement, Worsening };

bool medication_explains(Direction direction, const ClinicalVariables& vars) noexcept;

struct TraceStep {
  std::string rule_id;
  std::string inputs_summary;
  std::string outcome;

  bool operator==(const TraceStep&) const = default;
};

enum class ScoreFlag { UnknownRadiationDate, ZeroBaselineCompartment, MedicationConflict };

std::string_view to_string(ScoreFlag f) noexcept;
std::optional<ScoreFlag> score_flag_from_string(std::string_view s) noexcept;

struct ScoreResult {
  Category category = Category::BT0;
  std::vector<TraceStep> trace;
  std::vector<ScoreFlag> flags;  // sorted, unique

  bool has_flag(ScoreFlag f) const noexcept;
  bool operator==(const ScoreResult&) const = default;
};

struct ScorerPolicy {
  /// Enhancement worsening outranks discordant FLAIR improvement (BT-3c).
  /// When false, enhancement-worse with FLAIR-improved routes to BT-3b (R3f).
  bool enhancement_priority = true;
};

/// Outcome text prefix written on the final trace step; the step's outcome
/// is "<category>" for terminal rules, "no match" / "match" otherwise.
inline constexpr std::string_view kNoMatch = "no match";
inline constexpr std::string_view kMatch = "match";

/// baseline_present = true requires vol to hold a value.
ScoreResult score_case(const std::optional<VolumetricChange>& vol, const ClinicalVariables& vars,
                       const RadiationWindow& window, bool baseline_present,
                       const ScorerPolicy& policy = {});

}  // namespace btrads
