#pragma once

// Orchestration: per-case extraction, volumetrics, cross-checks and scoring,
// and batch runs with eligibility accounting.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btrads/core.hpp"
#include "btrads/extractor.hpp"
#include "btrads/scorer.hpp"
#include "btrads/volumetrics.hpp"

namespace btrads {

struct EligibilityRules {
  bool exclude_no_baseline = true;
  /// Baselines older than this are treated as unsuitable (about six months).
  int max_baseline_interval_days = 183;
};

struct PipelineConfig {
  BackendConfig backend;
  EligibilityRules eligibility;
  TrendThresholds thresholds;
  int radiation_window_days = 90;
  ScorerPolicy policy;
  /// Optional delimited volumetrics table joined onto the case records.
  std::optional<std::string> volumetrics_table;
};

/// Reads a JSON configuration file, then applies environment overrides
/// (BTRADS_LLM_ENDPOINT, BTRADS_LLM_MODEL, BTRADS_LLM_API_KEY). Relative
/// volumetrics_table paths resolve against the config file's directory.
/// Throws Error(ConfigError).
PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
void apply_environment(PipelineConfig& config);

enum class ConflictKind { RadiationAfterFollowup, MedicationTextConflict, ZeroBaselineCompartment, QcExcluded };

std::string_view to_string(ConflictKind k) noexcept;
std::optional<ConflictKind> conflict_kind_from_string(std::string_view s) noexcept;

struct ConflictFlag {
  ConflictKind kind;
  std::string detail;

  bool operator==(const ConflictFlag&) const = default;
};

enum class CaseStatus { Scored, Failed, Excluded };
enum class ExclusionReason { NoBaseline, BaselineIntervalExceeded, QcFailed };

std::string_view to_string(CaseStatus s) noexcept;
std::string_view to_string(ExclusionReason r) noexcept;
std::optional<CaseStatus> case_status_from_string(std::string_view s) noexcept;
std::optional<ExclusionReason> exclusion_reason_from_string(std::string_view s) noexcept;

struct CaseReport {
  std::string case_id;
  CaseStatus status = CaseStatus::Scored;
  std::optional<ExclusionReason> exclusion;
  std::optional<std::string> failure_reason;
  ClinicalVariables variables;
  std::optional<VolumetricChange> volumetrics;
  RadiationWindow radiation_window;
  std::optional<ScoreResult> score;
  std::vector<ConflictFlag> conflicts;
  std::optional<ObservedLabel> reference_label;
  std::optional<ObservedLabel> initial_clinical_label;
  /// Present iff reference_label is present.
  std::optional<bool> correct_vs_reference;
  /// Present iff both labels are present.
  std::optional<bool> initial_correct;
  std::optional<Adjudication> adjudication;

  bool evaluable() const noexcept { return status != CaseStatus::Excluded; }
  bool operator==(const CaseReport&) const = default;
};

std::vector<ConflictFlag> cross_check(const ClinicalVariables& vars, const CaseRecord& c);

/// Scores one eligible case. Extraction failures produce a Failed report with
/// the reason; they are never thrown. Invalid volumes throw Error(InvalidVolume).
CaseReport run_case(const CaseRecord& c, const PipelineConfig& config, const Extractor& extractor);

/// Eligibility check; nullopt when the case should be scored.
std::optional<ExclusionReason> eligibility(const CaseRecord& c, const EligibilityRules& rules);

struct BatchCounts {
  std::size_t input = 0;
  std::size_t evaluable = 0;
  std::size_t excluded = 0;
  std::size_t failed = 0;
};

struct BatchRun {
  std::vector<CaseReport> reports;  // input order, excluded cases included
  BatchCounts counts;
};

/// Joins the configured volumetrics table onto the cases and checks their
/// invariants. Throws Error(IoError, ParseError, InvalidVolume, ValidationError).
std::vector<CaseRecord> prepare_cases(std::span<const CaseRecord> dataset, const PipelineConfig& config);

/// Throws Error(EmptyCohort) when the dataset is empty or nothing is
/// evaluable. Per-case failures are recorded, never thrown.
BatchRun run_batch(std::span<const CaseRecord> dataset, const PipelineConfig& config,
                   const Extractor& extractor);

/// Re-applies the same checks run_case uses, for a reviewer's edited
/// variables against a stored case.
ScoreResult rescore_case(const CaseRecord& c, const CaseReport& system_report,
                         const ClinicalVariables& edited, const PipelineConfig& config);

}  // namespace btrads
