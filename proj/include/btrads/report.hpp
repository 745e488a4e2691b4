#pragma once

// Batch evaluation: every statistic is recomputed from per-case reports, so
// a report file on disk yields the same numbers as the run that wrote it.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btrads/evalstats.hpp"
#include "btrads/pipeline.hpp"
#include "json.hpp"

namespace btrads {

struct EvaluationOptions {
  double level = 0.95;
  std::size_t bootstrap_resamples = 2000;
  std::uint64_t bootstrap_seed = 20250101;
};

struct LabelCount {
  std::string label;
  std::uint64_t n = 0;
  double percent = 0.0;
};

struct AccuracySummary {
  std::uint64_t correct = 0;
  std::uint64_t n = 0;
  double accuracy = 0.0;
  stats::Interval ci;
};

struct KappaSummary {
  double estimate = 0.0;
  stats::BootstrapInterval ci;
  std::uint64_t n = 0;
};

struct OneVsAllRow {
  std::string label;
  stats::DiagnosticMetrics metrics;
};

struct VariableAccuracy {
  Variable variable;
  std::uint64_t correct = 0;
  std::uint64_t n = 0;
  double accuracy = 0.0;
  stats::Interval ci;
};

struct BatchEvaluationReport {
  BatchCounts counts;
  std::map<std::string, std::uint64_t> exclusions;  // reason -> count

  /// Evaluable cases that carry a reference label (accuracy denominator).
  std::uint64_t n_labeled = 0;
  std::uint64_t n_standard = 0;
  std::uint64_t n_nonstandard = 0;
  std::vector<LabelCount> reference_distribution;

  AccuracySummary system;
  std::optional<AccuracySummary> initial;
  std::optional<stats::Quadrants> concordance;
  std::optional<stats::McNemarResult> mcnemar;

  /// Rows = reference, columns = predicted; standard categories then "Other".
  stats::ConfusionMatrix system_matrix;
  std::optional<stats::ConfusionMatrix> initial_matrix;

  std::optional<KappaSummary> kappa;
  std::optional<KappaSummary> weighted_kappa;
  std::vector<stats::CategorySensitivity> sensitivity;
  std::vector<OneVsAllRow> one_vs_all;

  std::vector<VariableAccuracy> extraction;
  std::optional<stats::AttributionSummary> attribution;
  std::optional<stats::CeilingScenarios> ceiling;
  std::vector<stats::StratumAccuracy> subgroups;
  std::vector<stats::StratumAccuracy> extraction_strata;
};

/// Throws Error(EmptyCohort) when no evaluable report carries a reference label.
BatchEvaluationReport evaluate_reports(std::span<const CaseReport> reports,
                                       const EvaluationOptions& options = {});

nlohmann::json evaluation_to_json(const BatchEvaluationReport& r);

/// Human-readable tables: distribution, accuracy, sensitivity, one-vs-all,
/// ceiling, subgroups, attribution, extraction strata and confusion matrices.
std::string render_tables(const BatchEvaluationReport& r);

}  // namespace btrads
