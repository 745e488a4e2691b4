#include "btrads/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <memory>

namespace btrads {

using nlohmann::json;
using stats::ConfusionMatrix;

namespace {

constexpr std::string_view kOther = "Other";

struct Labeled {
  const CaseReport* report;
  std::optional<Category> reference;  // absent for non-standard references
};

std::vector<std::string> matrix_labels(bool with_bt0) {
  std::vector<std::string> labels;
  if (with_bt0) labels.emplace_back(to_string(Category::BT0));
  for (Category c : kFollowupCategories) labels.emplace_back(to_string(c));
  labels.emplace_back(kOther);
  return labels;
}

std::size_t column_for(const ConfusionMatrix& m, std::optional<Category> c) {
  if (!c) return *m.index_of(kOther);
  return *m.index_of(to_string(*c));
}

bool variables_match(const ClinicalVariables& a, const ClinicalVariables& b, Variable v) {
  switch (v) {
    case Variable::Steroid: return a.steroid_status == b.steroid_status;
    case Variable::Bevacizumab: return a.bevacizumab_status == b.bevacizumab_status;
    case Variable::RadiationDate: return a.radiation_completion_date == b.radiation_completion_date;
  }
  return false;
}

/// Extraction correctness for one variable; failed extractions count as wrong.
std::optional<bool> extraction_correct(const CaseReport& r, Variable v) {
  if (!r.adjudication || !r.adjudication->expert_variables) return std::nullopt;
  if (r.status == CaseStatus::Failed) return false;
  return variables_match(r.variables, *r.adjudication->expert_variables, v);
}

std::optional<KappaSummary> kappa_summary(const ConfusionMatrix& m, bool weighted,
                                          const std::vector<double>& ranks,
                                          const EvaluationOptions& o) {
  try {
    KappaSummary k;
    k.n = m.total();
    k.estimate = weighted ? stats::weighted_kappa_quadratic(m, ranks) : stats::cohen_kappa(m);
    k.ci = stats::kappa_ci(m, weighted, ranks, o.level, o.bootstrap_resamples, o.bootstrap_seed);
    return k;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DomainError) throw;
    return std::nullopt;
  }
}

AccuracySummary accuracy(std::uint64_t correct, std::uint64_t n, double level) {
  AccuracySummary a{correct, n, static_cast<double>(correct) / static_cast<double>(n), {}};
  a.ci = stats::wilson_ci(correct, n, level);
  return a;
}

std::string post_rt_stratum(const CaseReport& r) {
  const auto& w = r.radiation_window;
  if (w.status == WindowStatus::Unknown || !w.days_since) return "Unknown";
  if (*w.days_since < 90) return "<90 days";
  if (*w.days_since <= 180) return "90-180 days";
  return ">180 days";
}

std::string medication_stratum(const CaseReport& r) {
  if (r.variables.bevacizumab_status != MedicationStatus::None) return "Bevacizumab active";
  if (r.variables.steroid_status != MedicationStatus::None) return "Steroids only";
  return "No medication effect";
}

}  // namespace

BatchEvaluationReport evaluate_reports(std::span<const CaseReport> reports, const EvaluationOptions& o) {
  BatchEvaluationReport out;
  out.counts.input = reports.size();

  std::vector<Labeled> labeled;
  bool with_bt0 = false;
  for (const auto& r : reports) {
    if (!r.evaluable()) {
      ++out.counts.excluded;
      ++out.exclusions[r.exclusion ? std::string(to_string(*r.exclusion)) : "unspecified"];
      continue;
    }
    ++out.counts.evaluable;
    if (r.status == CaseStatus::Failed) ++out.counts.failed;
    if (!r.reference_label) continue;
    labeled.push_back({&r, r.reference_label->category()});
    if (labeled.back().reference == Category::BT0 || (r.score && r.score->category == Category::BT0) ||
        (r.initial_clinical_label && r.initial_clinical_label->category() == Category::BT0)) {
      with_bt0 = true;
    }
  }
  if (labeled.empty()) throw Error(ErrorCode::EmptyCohort, "no evaluable cases carry a reference label");

  out.n_labeled = labeled.size();
  const auto labels = matrix_labels(with_bt0);
  out.system_matrix = ConfusionMatrix(labels);
  ConfusionMatrix initial_matrix(labels);
  std::vector<std::string> standard_labels(labels.begin(), labels.end() - 1);
  ConfusionMatrix standard_matrix(standard_labels);

  std::vector<bool> sys_flags, init_flags;
  std::uint64_t system_correct = 0;
  std::vector<ErrorCause> causes;
  bool attribution_complete = true;
  std::vector<stats::CaseOutcome> outcomes;

  for (const auto& l : labeled) {
    const CaseReport& r = *l.report;
    const std::optional<Category> predicted =
        r.score ? std::optional<Category>(r.score->category) : std::nullopt;
    const bool correct = r.correct_vs_reference.value_or(false);
    if (correct) ++system_correct;
    const std::size_t row = column_for(out.system_matrix, l.reference);
    out.system_matrix.add(row, column_for(out.system_matrix, predicted));
    if (l.reference) {
      ++out.n_standard;
      if (predicted) standard_matrix.add(row, column_for(standard_matrix, predicted));
    } else {
      ++out.n_nonstandard;
    }
    if (r.initial_clinical_label) {
      initial_matrix.add(row, column_for(initial_matrix, r.initial_clinical_label->category()));
      sys_flags.push_back(correct);
      init_flags.push_back(r.initial_correct.value_or(false));
    }
    stats::CaseOutcome oc;
    oc.correct = correct;
    if (!correct) {
      if (r.adjudication && r.adjudication->cause) {
        causes.push_back(*r.adjudication->cause);
        oc.fixed_by_extraction = r.adjudication->correct_if_perfect_extraction;
        oc.fixed_by_algorithm = r.adjudication->correct_if_perfect_algorithm;
        oc.fixed_by_both = r.adjudication->correct_if_perfect_both;
      } else {
        attribution_complete = false;
      }
    }
    outcomes.push_back(oc);
  }

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto n = out.system_matrix.row_sum(i);
    if (labels[i] == to_string(Category::BT0) && n == 0) continue;
    out.reference_distribution.push_back(
        {labels[i], n, 100.0 * static_cast<double>(n) / static_cast<double>(out.n_labeled)});
  }

  out.system = accuracy(system_correct, out.n_labeled, o.level);
  if (!init_flags.empty()) {
    out.initial_matrix = initial_matrix;
    const auto init_correct = static_cast<std::uint64_t>(std::count(init_flags.begin(), init_flags.end(), true));
    out.initial = accuracy(init_correct, init_flags.size(), o.level);
    // std::vector<bool> has no contiguous storage to view as a span.
    const std::size_t n = sys_flags.size();
    auto sb = std::make_unique<bool[]>(n), ib = std::make_unique<bool[]>(n);
    std::copy(sys_flags.begin(), sys_flags.end(), sb.get());
    std::copy(init_flags.begin(), init_flags.end(), ib.get());
    out.concordance = stats::concordance_quadrants({sb.get(), n}, {ib.get(), n});
    if (out.concordance->system_only + out.concordance->initial_only > 0) {
      out.mcnemar = stats::mcnemar_test(out.concordance->system_only, out.concordance->initial_only);
    }
  }

  // Agreement and one-vs-all over cases with a standard reference and a standard prediction.
  std::vector<double> ranks;
  for (const auto& label : standard_labels) ranks.push_back(rank(*parse_btrads_label(label).category()));
  if (standard_matrix.total() >= 2) {
    out.kappa = kappa_summary(standard_matrix, false, ranks, o);
    out.weighted_kappa = kappa_summary(standard_matrix, true, ranks, o);
  }
  for (std::size_t i = 0; i < standard_labels.size(); ++i) {
    if (standard_labels[i] == to_string(Category::BT0) && standard_matrix.row_sum(i) == 0) continue;
    out.one_vs_all.push_back({standard_labels[i], stats::one_vs_all(standard_matrix, i)});
  }
  for (auto& s : stats::per_category_sensitivity(out.system_matrix, o.level)) {
    if (s.label == kOther || (s.label == to_string(Category::BT0) && s.total == 0)) continue;
    out.sensitivity.push_back(std::move(s));
  }

  // Per-variable extraction accuracy over every labeled case with expert variables.
  for (Variable v : kAllVariables) {
    VariableAccuracy a{v, 0, 0, 0.0, {}};
    for (const auto& l : labeled) {
      if (auto ok = extraction_correct(*l.report, v)) {
        ++a.n;
        if (*ok) ++a.correct;
      }
    }
    if (a.n > 0) {
      a.accuracy = static_cast<double>(a.correct) / static_cast<double>(a.n);
      a.ci = stats::wilson_ci(a.correct, a.n, o.level);
      out.extraction.push_back(a);
    }
  }

  if (attribution_complete) {
    out.attribution = stats::error_attribution_summary(causes);
    out.ceiling = stats::ceiling_analysis(outcomes, out.n_nonstandard);
  }

  // Subgroups over standard-reference cases.
  std::vector<const CaseReport*> standard_cases;
  for (const auto& l : labeled) {
    if (l.reference) standard_cases.push_back(l.report);
  }
  using Ptr = const CaseReport*;
  const std::span<const Ptr> sc(standard_cases);
  auto is_correct = [](const Ptr& r) { return r->correct_vs_reference.value_or(false); };
  auto append = [](std::vector<stats::StratumAccuracy>& dst, std::vector<stats::StratumAccuracy> src) {
    for (auto& s : src) dst.push_back(std::move(s));
  };
  append(out.subgroups, stats::stratified_accuracy<Ptr>(
                            sc, "Temporal (post-RT)", {"<90 days", "90-180 days", ">180 days", "Unknown"},
                            [](const Ptr& r) { return std::vector<std::string>{post_rt_stratum(*r)}; },
                            is_correct, o.level));
  append(out.subgroups, stats::stratified_accuracy<Ptr>(
                            sc, "Medication", {"Bevacizumab active", "Steroids only", "No medication effect"},
                            [](const Ptr& r) { return std::vector<std::string>{medication_stratum(*r)}; },
                            is_correct, o.level));
  append(out.subgroups,
         stats::stratified_accuracy<Ptr>(
             sc, "Enhancement", {"Improved (<-20%)", "Stable (+-20%)", "Worse (>20%)"},
             [](const Ptr& r) -> std::vector<std::string> {
               if (!r->volumetrics) return {};
               switch (r->volumetrics->enh_trend) {
                 case Trend::Improved: return {"Improved (<-20%)"};
                 case Trend::Stable: return {"Stable (+-20%)"};
                 default: return {"Worse (>20%)"};
               }
             },
             is_correct, o.level));
  out.extraction_strata = stats::stratified_accuracy<Ptr>(
      sc, "Extraction", {"All 3 extractions correct", "Any extraction incorrect", "Radiation date incorrect",
                         "Steroid status incorrect", "Bevacizumab incorrect"},
      [](const Ptr& r) -> std::vector<std::string> {
        auto rad = extraction_correct(*r, Variable::RadiationDate);
        auto ste = extraction_correct(*r, Variable::Steroid);
        auto bev = extraction_correct(*r, Variable::Bevacizumab);
        if (!rad || !ste || !bev) return {};
        if (*rad && *ste && *bev) return {"All 3 extractions correct"};
        std::vector<std::string> s{"Any extraction incorrect"};
        if (!*rad) s.emplace_back("Radiation date incorrect");
        if (!*ste) s.emplace_back("Steroid status incorrect");
        if (!*bev) s.emplace_back("Bevacizumab incorrect");
        return s;
      },
      is_correct, o.level);
  if (std::all_of(out.extraction_strata.begin(), out.extraction_strata.end(),
                  [](const auto& s) { return s.n == 0; })) {
    out.extraction_strata.clear();
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json number(double d) {
  if (std::isnan(d)) return nullptr;
  if (std::isinf(d)) return d > 0 ? "Infinity" : "-Infinity";
  return d;
}

json interval(const stats::Interval& i) { return {{"low", number(i.low)}, {"high", number(i.high)}}; }

json accuracy_json(const AccuracySummary& a) {
  return {{"correct", a.correct}, {"n", a.n}, {"accuracy", number(a.accuracy)}, {"ci", interval(a.ci)}};
}

json kappa_json(const std::optional<KappaSummary>& k) {
  if (!k) return nullptr;
  return {{"estimate", number(k->estimate)},
          {"n", k->n},
          {"ci", interval(k->ci.ci)},
          {"resamples", k->ci.resamples},
          {"skipped_resamples", k->ci.skipped}};
}

json matrix_json(const ConfusionMatrix& m) { return {{"categories", m.labels()}, {"counts", m.rows()}}; }

json strata_json(const std::vector<stats::StratumAccuracy>& strata) {
  json arr = json::array();
  for (const auto& s : strata) {
    arr.push_back({{"group", s.group},
                   {"stratum", s.stratum},
                   {"correct", s.correct},
                   {"n", s.n},
                   {"accuracy", s.accuracy ? number(*s.accuracy) : json(nullptr)},
                   {"ci", s.ci ? interval(*s.ci) : json(nullptr)}});
  }
  return arr;
}

}  // namespace

json evaluation_to_json(const BatchEvaluationReport& r) {
  json j;
  j["counts"] = {{"input", r.counts.input},
                 {"evaluable", r.counts.evaluable},
                 {"excluded", r.counts.excluded},
                 {"failed", r.counts.failed}};
  j["exclusions"] = r.exclusions;
  j["n_labeled"] = r.n_labeled;
  j["n_standard"] = r.n_standard;
  j["n_nonstandard"] = r.n_nonstandard;
  json dist = json::array();
  for (const auto& d : r.reference_distribution) {
    dist.push_back({{"category", d.label}, {"n", d.n}, {"percent", number(d.percent)}});
  }
  j["reference_distribution"] = dist;
  j["system_accuracy"] = accuracy_json(r.system);
  j["initial_accuracy"] = r.initial ? accuracy_json(*r.initial) : json(nullptr);
  j["concordance"] = r.concordance ? json{{"both", r.concordance->both},
                                          {"system_only", r.concordance->system_only},
                                          {"initial_only", r.concordance->initial_only},
                                          {"neither", r.concordance->neither}}
                                   : json(nullptr);
  j["mcnemar"] = r.mcnemar ? json{{"chi2", number(r.mcnemar->chi2)}, {"p", number(r.mcnemar->p)}} : json(nullptr);
  j["system_confusion"] = matrix_json(r.system_matrix);
  j["initial_confusion"] = r.initial_matrix ? matrix_json(*r.initial_matrix) : json(nullptr);
  j["kappa"] = kappa_json(r.kappa);
  j["weighted_kappa_quadratic"] = kappa_json(r.weighted_kappa);
  json sens = json::array();
  for (const auto& s : r.sensitivity) {
    sens.push_back({{"category", s.label},
                    {"correct", s.correct},
                    {"total", s.total},
                    {"sensitivity", s.proportion ? number(*s.proportion) : json(nullptr)},
                    {"ci", s.ci ? interval(*s.ci) : json(nullptr)}});
  }
  j["sensitivity"] = sens;
  json ova = json::array();
  for (const auto& row : r.one_vs_all) {
    const auto& m = row.metrics;
    ova.push_back({{"category", row.label},
                   {"tp", m.tp},
                   {"fp", m.fp},
                   {"fn", m.fn},
                   {"tn", m.tn},
                   {"sensitivity", number(m.sensitivity)},
                   {"specificity", number(m.specificity)},
                   {"ppv", number(m.ppv)},
                   {"npv", number(m.npv)},
                   {"lr_pos", number(m.lr_pos)},
                   {"lr_neg", number(m.lr_neg)},
                   {"lr_pos_rounded", number(m.lr_pos_rounded)},
                   {"lr_neg_rounded", number(m.lr_neg_rounded)}});
  }
  j["one_vs_all"] = ova;
  json ext = json::array();
  for (const auto& a : r.extraction) {
    ext.push_back({{"variable", to_string(a.variable)},
                   {"correct", a.correct},
                   {"n", a.n},
                   {"accuracy", number(a.accuracy)},
                   {"ci", interval(a.ci)}});
  }
  j["extraction_accuracy"] = ext;
  if (r.attribution) {
    json causes = json::array();
    for (const auto& c : r.attribution->causes) {
      causes.push_back({{"cause", to_string(c.cause)}, {"n", c.count}, {"percent", number(c.percent)}});
    }
    j["error_attribution"] = {{"total", r.attribution->total},
                              {"causes", causes},
                              {"remediable", r.attribution->remediable},
                              {"remediable_percent", number(r.attribution->remediable_percent)},
                              {"irreducible", r.attribution->irreducible},
                              {"irreducible_percent", number(r.attribution->irreducible_percent)}};
  } else {
    j["error_attribution"] = nullptr;
  }
  if (r.ceiling) {
    j["ceiling"] = {{"n", r.ceiling->n},
                    {"current", number(r.ceiling->current)},
                    {"perfect_extraction", number(r.ceiling->perfect_extraction)},
                    {"perfect_algorithm", number(r.ceiling->perfect_algorithm)},
                    {"perfect_both", number(r.ceiling->perfect_both)},
                    {"theoretical_max", number(r.ceiling->theoretical_max)}};
  } else {
    j["ceiling"] = nullptr;
  }
  j["subgroups"] = strata_json(r.subgroups);
  j["extraction_strata"] = strata_json(r.extraction_strata);
  return j;
}

// ---------------------------------------------------------------------------

namespace {

std::string pct(double p) { return fmt::format("{:.1f}%", 100.0 * p); }
std::string ci_text(const stats::Interval& i) { return fmt::format("{:.1f}%-{:.1f}%", 100.0 * i.low, 100.0 * i.high); }

std::string ratio_text(double v, int decimals) {
  if (std::isinf(v)) return "inf";
  if (std::isnan(v)) return "n/a";
  return fmt::format("{:.{}f}", v, decimals);
}

std::string category_kind(std::string_view label) {
  if (label == "BT-1a" || label == "BT-1b" || label == "BT-3a") return "Context-dependent";
  if (label == "BT-0") return "No baseline";
  return "Threshold-dependent";
}

void matrix_text(std::string& out, const std::string& title, const ConfusionMatrix& m) {
  out += title + " (rows = reference, columns = predicted)\n";
  out += fmt::format("{:<8}", "");
  for (const auto& l : m.labels()) out += fmt::format("{:>7}", l);
  out += "\n";
  for (std::size_t r = 0; r < m.size(); ++r) {
    out += fmt::format("{:<8}", m.labels()[r]);
    for (std::size_t c = 0; c < m.size(); ++c) out += fmt::format("{:>7}", m.at(r, c));
    out += "\n";
  }
  out += "\n";
}

void strata_text(std::string& out, const std::vector<stats::StratumAccuracy>& strata) {
  std::string last;
  for (const auto& s : strata) {
    const std::string group = s.group == last ? "" : s.group;
    last = s.group;
    if (s.accuracy) {
      out += fmt::format("{:<22}{:<28}{:>5}{:>8}{:>10}  {}\n", group, s.stratum, s.n, s.correct, pct(*s.accuracy),
                         ci_text(*s.ci));
    } else {
      out += fmt::format("{:<22}{:<28}{:>5}{:>8}{:>10}  {}\n", group, s.stratum, 0, 0, "-", "-");
    }
  }
  out += "\n";
}

}  // namespace

std::string render_tables(const BatchEvaluationReport& r) {
  std::string out;
  out += fmt::format("Cohort: {} input, {} evaluable, {} excluded", r.counts.input, r.counts.evaluable,
                     r.counts.excluded);
  if (!r.exclusions.empty()) {
    out += " (";
    bool first = true;
    for (const auto& [reason, n] : r.exclusions) {
      out += fmt::format("{}{} {}", first ? "" : ", ", reason, n);
      first = false;
    }
    out += ")";
  }
  out += fmt::format(", {} failed\n\n", r.counts.failed);

  out += "Reference standard distribution\n";
  out += fmt::format("{:<10}{:>6}{:>12}\n", "Category", "N", "Percentage");
  for (const auto& d : r.reference_distribution) {
    out += fmt::format("{:<10}{:>6}{:>12}\n", d.label, d.n, fmt::format("{:.1f}%", d.percent));
  }
  out += fmt::format("{:<10}{:>6}{:>12}\n\n", "Total", r.n_labeled, "100%");

  out += "Overall accuracy\n";
  out += fmt::format("{:<22}{:>9}{:>10}  {}\n", "System", fmt::format("{}/{}", r.system.correct, r.system.n),
                     pct(r.system.accuracy), ci_text(r.system.ci));
  if (r.initial) {
    out += fmt::format("{:<22}{:>9}{:>10}  {}\n", "Initial clinical",
                       fmt::format("{}/{}", r.initial->correct, r.initial->n), pct(r.initial->accuracy),
                       ci_text(r.initial->ci));
    out += fmt::format("Difference: {:.1f} pp\n", 100.0 * (r.system.accuracy - r.initial->accuracy));
  }
  if (r.mcnemar) {
    out += fmt::format("McNemar (continuity corrected): chi2 = {:.2f}, p = {}\n", r.mcnemar->chi2,
                       r.mcnemar->p < 0.001 ? std::string("<.001") : fmt::format("{:.3f}", r.mcnemar->p));
  }
  if (r.concordance) {
    const auto& q = *r.concordance;
    const double n = static_cast<double>(q.total());
    out += fmt::format("Concordance: both {} ({:.1f}%), system only {} ({:.1f}%), initial only {} ({:.1f}%), "
                       "neither {} ({:.1f}%)\n",
                       q.both, 100.0 * q.both / n, q.system_only, 100.0 * q.system_only / n, q.initial_only,
                       100.0 * q.initial_only / n, q.neither, 100.0 * q.neither / n);
  }
  auto kappa_line = [&](const char* name, const std::optional<KappaSummary>& k) {
    if (!k) return;
    out += fmt::format("{}: {:.3f} (95% bootstrap CI, {:.3f}-{:.3f}; n = {})\n", name, k->estimate, k->ci.ci.low,
                       k->ci.ci.high, k->n);
  };
  kappa_line("Cohen's kappa", r.kappa);
  kappa_line("Quadratic weighted kappa", r.weighted_kappa);
  out += "\n";

  out += "Per-category sensitivity\n";
  out += fmt::format("{:<9}{:<21}{:>8}{:>9}{:>13}  {}\n", "Category", "Type", "N (RS)", "Correct", "Sensitivity",
                     "95% CI");
  for (const auto& s : r.sensitivity) {
    out += fmt::format("{:<9}{:<21}{:>8}{:>9}{:>13}  {}\n", s.label, category_kind(s.label), s.total, s.correct,
                       s.proportion ? pct(*s.proportion) : "-", s.ci ? ci_text(*s.ci) : "-");
  }
  out += "\n";

  out += "One-vs-all diagnostic performance\n";
  out += fmt::format("{:<8}{:>8}{:>13}{:>13}{:>9}{:>9}{:>9}{:>7}\n", "Category", "N (RS)", "Sensitivity",
                     "Specificity", "PPV", "NPV", "LR+", "LR-");
  for (const auto& row : r.one_vs_all) {
    const auto& m = row.metrics;
    out += fmt::format("{:<8}{:>8}{:>13}{:>13}{:>9}{:>9}{:>9}{:>7}\n", row.label, m.tp + m.fn, pct(m.sensitivity),
                       pct(m.specificity), pct(m.ppv), pct(m.npv), ratio_text(m.lr_pos_rounded, 1),
                       ratio_text(m.lr_neg_rounded, 2));
  }
  out += "\n";

  if (!r.extraction.empty()) {
    out += "Clinical variable extraction accuracy\n";
    for (const auto& a : r.extraction) {
      out += fmt::format("{:<28}{:>9}{:>10}  {}\n", to_string(a.variable), fmt::format("{}/{}", a.correct, a.n),
                         pct(a.accuracy), ci_text(a.ci));
    }
    out += "\n";
  }

  if (r.ceiling) {
    const auto& c = *r.ceiling;
    out += "Performance ceiling\n";
    out += fmt::format("{:<32}{:>10}{:>13}\n", "Scenario", "Accuracy", "Improvement");
    auto line = [&](const char* name, double v, bool baseline) {
      out += fmt::format("{:<32}{:>10}{:>13}\n", name, pct(v),
                         baseline ? std::string("Baseline") : fmt::format("+{:.1f} pp", 100.0 * (v - c.current)));
    };
    line("Current system", c.current, true);
    line("Perfect extraction", c.perfect_extraction, false);
    line("Perfect algorithm", c.perfect_algorithm, false);
    line("Perfect extraction + algorithm", c.perfect_both, false);
    line("Theoretical maximum", c.theoretical_max, false);
    out += "\n";
  }

  if (!r.subgroups.empty()) {
    out += "Subgroup accuracy (standard reference labels)\n";
    out += fmt::format("{:<22}{:<28}{:>5}{:>8}{:>10}  {}\n", "Subgroup", "Stratum", "N", "Correct", "Accuracy",
                       "95% CI");
    strata_text(out, r.subgroups);
  }

  if (r.attribution) {
    const auto& a = *r.attribution;
    out += fmt::format("Error attribution (n = {} misclassifications)\n", a.total);
    out += fmt::format("{:<32}{:>6}{:>9}  {}\n", "Error category", "N", "%", "Remediability");
    for (const auto& c : a.causes) {
      const bool remediable = c.cause == ErrorCause::ExtractionError || c.cause == ErrorCause::AlgorithmLimitation;
      out += fmt::format("{:<32}{:>6}{:>9}  {}\n", to_string(c.cause), c.count, fmt::format("{:.1f}%", c.percent),
                         remediable ? "Remediable" : "Irreducible");
    }
    out += fmt::format("Remediable {} ({:.1f}%), irreducible {} ({:.1f}%)\n\n", a.remediable, a.remediable_percent,
                       a.irreducible, a.irreducible_percent);
  }

  if (!r.extraction_strata.empty()) {
    out += "Accuracy by extraction success (standard reference labels)\n";
    out += fmt::format("{:<22}{:<28}{:>5}{:>8}{:>10}  {}\n", "", "Extraction status", "N", "Correct", "Accuracy",
                       "95% CI");
    strata_text(out, r.extraction_strata);
  }

  matrix_text(out, "System confusion matrix", r.system_matrix);
  if (r.initial_matrix) matrix_text(out, "Initial clinical confusion matrix", *r.initial_matrix);
  return out;
}

}  // namespace btrads
