#pragma once

// Evaluation statistics: binomial intervals, paired tests, agreement
// coefficients, one-vs-all diagnostics, concordance, error attribution, and
// counterfactual ceiling analysis.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btrads/core.hpp"

namespace btrads::stats {

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Inverse standard normal CDF. Throws Error(DomainError) outside (0, 1).
double normal_quantile(double p);

/// Wilson score interval for successes/n. Throws Error(DomainError) for n = 0,
/// successes > n, or a level outside (0, 1).
Interval wilson_ci(std::uint64_t successes, std::uint64_t n, double level = 0.95);

/// Upper tail P(X > x) for a chi-square variable with one degree of freedom.
double chi_square_1df_upper_tail(double x);

struct McNemarResult {
  double chi2 = 0.0;
  double p = 1.0;
};

/// Continuity-corrected McNemar test on the discordant counts.
McNemarResult mcnemar_test(std::uint64_t b, std::uint64_t c);

/// Square count grid, rows = reference, columns = predicted.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> labels);
  ConfusionMatrix(std::vector<std::string> labels, const std::vector<std::vector<std::uint64_t>>& rows);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const;

  std::uint64_t at(std::size_t r, std::size_t c) const { return counts_[r * size() + c]; }
  void add(std::size_t r, std::size_t c, std::uint64_t n = 1) { counts_[r * size() + c] += n; }

  std::uint64_t total() const noexcept;
  std::uint64_t row_sum(std::size_t r) const;
  std::uint64_t col_sum(std::size_t c) const;
  std::uint64_t diagonal() const;

  /// Keeps only the listed rows/columns (by index, in the given order).
  ConfusionMatrix submatrix(std::span<const std::size_t> keep) const;

  std::vector<std::vector<std::uint64_t>> rows() const;
  /// Delimited export: header row of labels, then one row per reference label.
  std::string to_delimited(char delim = '\t') const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::uint64_t> counts_;
};

/// Throws Error(DomainError) when total = 0 or expected agreement is 1.
double cohen_kappa(const ConfusionMatrix& m);

/// Quadratic disagreement weights ((r_i - r_j) / (r_max - r_min))^2.
/// Throws Error(DomainError) for fewer than two categories, repeated ranks,
/// a rank count that differs from the matrix size, or zero expected disagreement.
double weighted_kappa_quadratic(const ConfusionMatrix& m, std::span<const double> ranks);

struct BootstrapInterval {
  Interval ci;
  std::size_t resamples = 0;
  std::size_t skipped = 0;  // degenerate resamples with undefined kappa
};

/// Percentile bootstrap over cases. Resample i draws from its own generator
/// seeded from (seed, i), so the result does not depend on how resamples are
/// scheduled.
BootstrapInterval kappa_ci(const ConfusionMatrix& m, bool weighted, std::span<const double> ranks,
                           double level = 0.95, std::size_t resamples = 2000,
                           std::uint64_t seed = 20250101);

struct DiagnosticMetrics {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;
  double npv = 0.0;
  double lr_pos = 0.0;  // full precision; +inf when specificity = 1
  double lr_neg = 0.0;
  /// Ratios computed from sensitivity and specificity rounded to 0.1 %.
  double lr_pos_rounded = 0.0;
  double lr_neg_rounded = 0.0;
};

DiagnosticMetrics diagnostic_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                     std::uint64_t tn);

/// Treats `category` (row/column index) as positive, all else negative.
DiagnosticMetrics one_vs_all(const ConfusionMatrix& m, std::size_t category);

struct CategorySensitivity {
  std::string label;
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  std::optional<double> proportion;  // absent for an empty row
  std::optional<Interval> ci;
};

std::vector<CategorySensitivity> per_category_sensitivity(const ConfusionMatrix& m,
                                                          double level = 0.95);

struct Quadrants {
  std::uint64_t both = 0;
  std::uint64_t system_only = 0;
  std::uint64_t initial_only = 0;
  std::uint64_t neither = 0;

  std::uint64_t total() const noexcept { return both + system_only + initial_only + neither; }
  bool operator==(const Quadrants&) const = default;
};

/// Throws Error(DomainError) on length mismatch.
Quadrants concordance_quadrants(std::span<const bool> system_correct,
                                std::span<const bool> initial_correct);

struct CauseCount {
  ErrorCause cause;
  std::uint64_t count = 0;
  double percent = 0.0;  // of misclassified total
};

struct AttributionSummary {
  std::vector<CauseCount> causes;  // in kAllErrorCauses order
  std::uint64_t total = 0;
  std::uint64_t remediable = 0;  // extraction + algorithm
  double remediable_percent = 0.0;
  std::uint64_t irreducible = 0;  // threshold + ground truth
  double irreducible_percent = 0.0;
};

AttributionSummary error_attribution_summary(std::span<const ErrorCause> causes);

struct CaseOutcome {
  bool correct = false;
  bool fixed_by_extraction = false;
  bool fixed_by_algorithm = false;
  bool fixed_by_both = false;
};

struct CeilingScenarios {
  double current = 0.0;
  double perfect_extraction = 0.0;
  double perfect_algorithm = 0.0;
  double perfect_both = 0.0;
  double theoretical_max = 0.0;
  std::uint64_t n = 0;
};

/// Throws Error(DomainError) for an empty cohort or n_nonstandard > N.
CeilingScenarios ceiling_analysis(std::span<const CaseOutcome> outcomes, std::uint64_t n_nonstandard);

struct StratumAccuracy {
  std::string group;
  std::string stratum;
  std::uint64_t correct = 0;
  std::uint64_t n = 0;
  std::optional<double> accuracy;
  std::optional<Interval> ci;
};

/// Generic stratified accuracy: `classify` returns the stratum labels a case
/// belongs to (zero, one, or several). Strata are reported in `order`, with
/// any unlisted labels appended in first-seen order.
template <typename Case>
std::vector<StratumAccuracy> stratified_accuracy(
    std::span<const Case> cases, const std::string& group,
    const std::vector<std::string>& order,
    const std::function<std::vector<std::string>(const Case&)>& classify,
    const std::function<bool(const Case&)>& is_correct, double level = 0.95) {
  std::vector<StratumAccuracy> out;
  for (const auto& s : order) out.push_back({group, s, 0, 0, std::nullopt, std::nullopt});
  auto slot = [&](const std::string& s) -> StratumAccuracy& {
    for (auto& a : out) {
      if (a.stratum == s) return a;
    }
    out.push_back({group, s, 0, 0, std::nullopt, std::nullopt});
    return out.back();
  };
  for (const auto& c : cases) {
    for (const auto& s : classify(c)) {
      auto& a = slot(s);
      ++a.n;
      if (is_correct(c)) ++a.correct;
    }
  }
  for (auto& a : out) {
    if (a.n > 0) {
      a.accuracy = static_cast<double>(a.correct) / static_cast<double>(a.n);
      a.ci = wilson_ci(a.correct, a.n, level);
    }
  }
  return out;
}

}  // namespace btrads::stats
