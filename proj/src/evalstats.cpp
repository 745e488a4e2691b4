#include "btrads/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace btrads::stats {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void domain_error(const std::string& what) {
  throw Error(ErrorCode::DomainError, what);
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? kNaN : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) domain_error("normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

Interval wilson_ci(std::uint64_t successes, std::uint64_t n, double level) {
  if (n == 0) domain_error("wilson_ci: n must be >= 1");
  if (successes > n) domain_error("wilson_ci: successes exceed n");
  if (!(level > 0.0 && level < 1.0)) domain_error("wilson_ci: level must lie in (0, 1)");
  const double z = normal_quantile(0.5 + level / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (successes == 0) ci.low = 0.0;
  if (successes == n) ci.high = 1.0;
  return ci;
}

double chi_square_1df_upper_tail(double x) {
  if (x <= 0.0) return 1.0;
  // X = Z^2, so P(X > x) = P(|Z| > sqrt(x)) = erfc(sqrt(x / 2)).
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar_test(std::uint64_t b, std::uint64_t c) {
  if (b + c == 0) domain_error("mcnemar_test: no discordant pairs");
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c));
  const double corrected = std::max(diff - 1.0, 0.0);
  const double chi2 = corrected * corrected / static_cast<double>(b + c);
  return {chi2, chi_square_1df_upper_tail(chi2)};
}

// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels,
                                 const std::vector<std::vector<std::uint64_t>>& rows)
    : ConfusionMatrix(std::move(labels)) {
  if (rows.size() != size()) domain_error("ConfusionMatrix: row count does not match labels");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != size()) domain_error("ConfusionMatrix: matrix must be square");
    for (std::size_t c = 0; c < rows[r].size(); ++c) counts_[r * size() + c] = rows[r][c];
  }
}

std::optional<std::size_t> ConfusionMatrix::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (auto v : counts_) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t r) const {
  std::uint64_t t = 0;
  for (std::size_t c = 0; c < size(); ++c) t += at(r, c);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::uint64_t t = 0;
  for (std::size_t r = 0; r < size(); ++r) t += at(r, c);
  return t;
}

std::uint64_t ConfusionMatrix::diagonal() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < size(); ++i) t += at(i, i);
  return t;
}

ConfusionMatrix ConfusionMatrix::submatrix(std::span<const std::size_t> keep) const {
  std::vector<std::string> labels;
  for (auto k : keep) labels.push_back(labels_.at(k));
  ConfusionMatrix out(std::move(labels));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    for (std::size_t c = 0; c < keep.size(); ++c) out.add(r, c, at(keep[r], keep[c]));
  }
  return out;
}

std::vector<std::vector<std::uint64_t>> ConfusionMatrix::rows() const {
  std::vector<std::vector<std::uint64_t>> out(size(), std::vector<std::uint64_t>(size()));
  for (std::size_t r = 0; r < size(); ++r) {
    for (std::size_t c = 0; c < size(); ++c) out[r][c] = at(r, c);
  }
  return out;
}

std::string ConfusionMatrix::to_delimited(char delim) const {
  std::ostringstream out;
  out << "reference\\predicted";
  for (const auto& l : labels_) out << delim << l;
  out << '\n';
  for (std::size_t r = 0; r < size(); ++r) {
    out << labels_[r];
    for (std::size_t c = 0; c < size(); ++c) out << delim << at(r, c);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

double cohen_kappa(const ConfusionMatrix& m) {
  const double n = static_cast<double>(m.total());
  if (n == 0.0) domain_error("cohen_kappa: empty matrix");
  double po = 0.0;
  double pe = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    po += static_cast<double>(m.at(i, i));
    pe += static_cast<double>(m.row_sum(i)) * static_cast<double>(m.col_sum(i));
  }
  po /= n;
  pe /= n * n;
  if (std::abs(1.0 - pe) < 1e-15) domain_error("cohen_kappa: expected agreement is 1");
  return (po - pe) / (1.0 - pe);
}

double weighted_kappa_quadratic(const ConfusionMatrix& m, std::span<const double> ranks) {
  const std::size_t k = m.size();
  if (k < 2) domain_error("weighted_kappa_quadratic: needs at least two categories");
  if (ranks.size() != k) domain_error("weighted_kappa_quadratic: one rank per category required");
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (ranks[i] == ranks[j]) domain_error("weighted_kappa_quadratic: ranks must be distinct");
    }
  }
  const double n = static_cast<double>(m.total());
  if (n == 0.0) domain_error("weighted_kappa_quadratic: empty matrix");
  const auto [lo, hi] = std::minmax_element(ranks.begin(), ranks.end());
  const double span = *hi - *lo;
  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double ri = static_cast<double>(m.row_sum(i));
    for (std::size_t j = 0; j < k; ++j) {
      const double d = (ranks[i] - ranks[j]) / span;
      const double w = d * d;
      observed += w * static_cast<double>(m.at(i, j));
      expected += w * ri * static_cast<double>(m.col_sum(j)) / n;
    }
  }
  if (expected <= 0.0) domain_error("weighted_kappa_quadratic: zero expected disagreement");
  return 1.0 - observed / expected;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Unbiased draw in [0, bound) from a xorshift-style stream seeded by splitmix.
class ResampleRng {
 public:
  explicit ResampleRng(std::uint64_t seed) : state_(splitmix64(seed)) {}
  std::uint64_t next() {
    state_ = splitmix64(state_);
    return state_;
  }
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % bound;
  }

 private:
  std::uint64_t state_;
};

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapInterval kappa_ci(const ConfusionMatrix& m, bool weighted, std::span<const double> ranks,
                           double level, std::size_t resamples, std::uint64_t seed) {
  const std::uint64_t n = m.total();
  if (n < 2) domain_error("kappa_ci: needs at least two cases");
  if (!(level > 0.0 && level < 1.0)) domain_error("kappa_ci: level must lie in (0, 1)");
  if (resamples == 0) domain_error("kappa_ci: resamples must be >= 1");

  std::vector<std::pair<std::size_t, std::size_t>> cases;
  cases.reserve(n);
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (std::size_t c = 0; c < m.size(); ++c) {
      for (std::uint64_t i = 0; i < m.at(r, c); ++i) cases.emplace_back(r, c);
    }
  }

  BootstrapInterval out;
  out.resamples = resamples;
  std::vector<double> values;
  values.reserve(resamples);
  for (std::size_t i = 0; i < resamples; ++i) {
    ResampleRng rng(seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1));
    ConfusionMatrix sample(m.labels());
    for (std::uint64_t j = 0; j < n; ++j) {
      const auto& [r, c] = cases[rng.below(n)];
      sample.add(r, c);
    }
    try {
      values.push_back(weighted ? weighted_kappa_quadratic(sample, ranks) : cohen_kappa(sample));
    } catch (const Error&) {
      ++out.skipped;
    }
  }
  if (values.empty()) domain_error("kappa_ci: every resample was degenerate");
  std::sort(values.begin(), values.end());
  const double alpha = 1.0 - level;
  out.ci = {percentile(values, alpha / 2.0), percentile(values, 1.0 - alpha / 2.0)};
  return out;
}

// ---------------------------------------------------------------------------

DiagnosticMetrics diagnostic_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                     std::uint64_t tn) {
  DiagnosticMetrics d;
  d.tp = tp;
  d.fp = fp;
  d.fn = fn;
  d.tn = tn;
  d.sensitivity = ratio(tp, tp + fn);
  d.specificity = ratio(tn, tn + fp);
  d.ppv = ratio(tp, tp + fp);
  d.npv = ratio(tn, tn + fn);
  d.lr_pos = d.specificity == 1.0 ? kInf : d.sensitivity / (1.0 - d.specificity);
  d.lr_neg = d.specificity == 0.0 ? kInf : (1.0 - d.sensitivity) / d.specificity;
  // Per-mille integers keep the rounded ratios exact in binary.
  const double sens_pm = std::round(d.sensitivity * 1000.0);
  const double spec_pm = std::round(d.specificity * 1000.0);
  d.lr_pos_rounded = spec_pm == 1000.0 ? kInf : sens_pm / (1000.0 - spec_pm);
  d.lr_neg_rounded = spec_pm == 0.0 ? kInf : (1000.0 - sens_pm) / spec_pm;
  return d;
}

DiagnosticMetrics one_vs_all(const ConfusionMatrix& m, std::size_t category) {
  if (category >= m.size()) domain_error("one_vs_all: category not in matrix");
  const std::uint64_t tp = m.at(category, category);
  const std::uint64_t fn = m.row_sum(category) - tp;
  const std::uint64_t fp = m.col_sum(category) - tp;
  const std::uint64_t tn = m.total() - tp - fn - fp;
  return diagnostic_metrics(tp, fp, fn, tn);
}

std::vector<CategorySensitivity> per_category_sensitivity(const ConfusionMatrix& m, double level) {
  std::vector<CategorySensitivity> out;
  for (std::size_t r = 0; r < m.size(); ++r) {
    CategorySensitivity s;
    s.label = m.labels()[r];
    s.correct = m.at(r, r);
    s.total = m.row_sum(r);
    if (s.total > 0) {
      s.proportion = static_cast<double>(s.correct) / static_cast<double>(s.total);
      s.ci = wilson_ci(s.correct, s.total, level);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Quadrants concordance_quadrants(std::span<const bool> system_correct,
                                std::span<const bool> initial_correct) {
  if (system_correct.size() != initial_correct.size()) {
    domain_error("concordance_quadrants: inputs differ in length");
  }
  Quadrants q;
  for (std::size_t i = 0; i < system_correct.size(); ++i) {
    const bool s = system_correct[i];
    const bool c = initial_correct[i];
    if (s && c) {
      ++q.both;
    } else if (s) {
      ++q.system_only;
    } else if (c) {
      ++q.initial_only;
    } else {
      ++q.neither;
    }
  }
  return q;
}

AttributionSummary error_attribution_summary(std::span<const ErrorCause> causes) {
  AttributionSummary s;
  s.total = causes.size();
  for (ErrorCause cause : kAllErrorCauses) {
    const auto n = static_cast<std::uint64_t>(std::count(causes.begin(), causes.end(), cause));
    s.causes.push_back({cause, n, s.total ? 100.0 * static_cast<double>(n) / static_cast<double>(s.total) : 0.0});
    if (cause == ErrorCause::ExtractionError || cause == ErrorCause::AlgorithmLimitation) {
      s.remediable += n;
    } else {
      s.irreducible += n;
    }
  }
  if (s.total) {
    s.remediable_percent = 100.0 * static_cast<double>(s.remediable) / static_cast<double>(s.total);
    s.irreducible_percent = 100.0 * static_cast<double>(s.irreducible) / static_cast<double>(s.total);
  }
  return s;
}

CeilingScenarios ceiling_analysis(std::span<const CaseOutcome> outcomes, std::uint64_t n_nonstandard) {
  const std::uint64_t n = outcomes.size();
  if (n == 0) domain_error("ceiling_analysis: empty cohort");
  if (n_nonstandard > n) domain_error("ceiling_analysis: more non-standard cases than cases");
  std::uint64_t correct = 0, ext = 0, alg = 0, both = 0;
  for (const auto& o : outcomes) {
    if (o.correct) {
      ++correct;
      continue;
    }
    if (o.fixed_by_extraction) ++ext;
    if (o.fixed_by_algorithm) ++alg;
    if (o.fixed_by_extraction || o.fixed_by_algorithm || o.fixed_by_both) ++both;
  }
  const double nn = static_cast<double>(n);
  CeilingScenarios c;
  c.n = n;
  c.current = static_cast<double>(correct) / nn;
  c.perfect_extraction = static_cast<double>(correct + ext) / nn;
  c.perfect_algorithm = static_cast<double>(correct + alg) / nn;
  c.perfect_both = static_cast<double>(correct + both) / nn;
  c.theoretical_max = static_cast<double>(n - n_nonstandard) / nn;
  return c;
}

}  // namespace btrads::stats
