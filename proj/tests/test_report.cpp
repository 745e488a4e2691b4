#include "btrads/report.hpp"

#include <cmath>
#include <sstream>

#include "btrads/fixtures.hpp"
#include "btrads/json_io.hpp"
#include "doctest.h"

using namespace btrads;

namespace {

double pct1(double p) { return std::round(p * 1000.0) / 10.0; }

const std::vector<CaseReport>& cohort_reports() {
  static const std::vector<CaseReport> reports = [] {
    auto set = generate_reference_cohort();
    apply_volumetrics_table(set.cases, set.volumetrics);
    const PipelineConfig config;
    return run_batch(set.cases, config, Extractor(config.backend)).reports;
  }();
  return reports;
}

const BatchEvaluationReport& cohort_evaluation() {
  static const BatchEvaluationReport r = evaluate_reports(cohort_reports());
  return r;
}

}  // namespace

TEST_CASE("cohort accounting") {
  const auto& r = cohort_evaluation();
  CHECK(r.counts.input == 509);
  CHECK(r.counts.evaluable == 492);
  CHECK(r.counts.excluded == 17);
  CHECK(r.exclusions.at("no_baseline") == 9);
  CHECK(r.exclusions.at("qc_failed") == 8);
  CHECK(r.n_labeled == 492);
  CHECK(r.n_standard == 489);
  CHECK(r.n_nonstandard == 3);
}

TEST_CASE("reference distribution") {
  const auto& r = cohort_evaluation();
  const std::pair<const char*, std::uint64_t> expected[] = {{"BT-1a", 55}, {"BT-1b", 51}, {"BT-2", 156},
                                                             {"BT-3a", 16}, {"BT-3b", 21}, {"BT-3c", 115},
                                                             {"BT-4", 75},  {"Other", 3}};
  REQUIRE(r.reference_distribution.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(r.reference_distribution[i].label == expected[i].first);
    CHECK(r.reference_distribution[i].n == expected[i].second);
  }
}

TEST_CASE("overall accuracy and paired comparison") {
  const auto& r = cohort_evaluation();
  CHECK(r.system.correct == 374);
  CHECK(r.system.n == 492);
  CHECK(pct1(r.system.accuracy) == doctest::Approx(76.0));
  CHECK(pct1(r.system.ci.low) == doctest::Approx(72.1));
  CHECK(pct1(r.system.ci.high) == doctest::Approx(79.6));
  REQUIRE(r.initial);
  CHECK(r.initial->correct == 283);
  CHECK(pct1(r.initial->accuracy) == doctest::Approx(57.5));
  REQUIRE(r.concordance);
  CHECK(*r.concordance == stats::Quadrants{187, 187, 96, 22});
  REQUIRE(r.mcnemar);
  CHECK(r.mcnemar->chi2 == doctest::Approx(28.62).epsilon(1e-3));
  CHECK(r.mcnemar->p < 0.001);
}

TEST_CASE("agreement") {
  const auto& r = cohort_evaluation();
  REQUIRE(r.kappa);
  CHECK(r.kappa->n == 489);
  CHECK(std::round(r.kappa->estimate * 1000) / 1000 == doctest::Approx(0.708));
  CHECK(r.kappa->ci.ci.low < r.kappa->estimate);
  CHECK(r.kappa->ci.ci.high > r.kappa->estimate);
  REQUIRE(r.weighted_kappa);
  CHECK(std::round(r.weighted_kappa->estimate * 1000) / 1000 == doctest::Approx(0.803));
}

TEST_CASE("sensitivity and one-vs-all") {
  const auto& r = cohort_evaluation();
  REQUIRE(r.sensitivity.size() == 7);
  CHECK(r.sensitivity[1].label == "BT-1b");
  CHECK(r.sensitivity[1].correct == 51);
  CHECK(r.sensitivity[1].total == 51);
  CHECK(pct1(r.sensitivity[1].ci->low) == doctest::Approx(93.0));
  CHECK(r.sensitivity[3].correct == 14);
  CHECK(r.sensitivity[3].total == 16);

  const auto& bt4 = r.one_vs_all.back();
  CHECK(bt4.label == "BT-4");
  CHECK(pct1(bt4.metrics.sensitivity) == doctest::Approx(69.3));
  CHECK(pct1(bt4.metrics.specificity) == doctest::Approx(99.0));
  CHECK(pct1(bt4.metrics.ppv) == doctest::Approx(92.9));
  CHECK(pct1(bt4.metrics.npv) == doctest::Approx(94.7));
  CHECK(bt4.metrics.lr_pos_rounded == doctest::Approx(69.3));
  CHECK(std::round(bt4.metrics.lr_neg * 100) / 100 == doctest::Approx(0.31));
}

TEST_CASE("extraction, attribution and ceiling") {
  const auto& r = cohort_evaluation();
  REQUIRE(r.extraction.size() == 3);
  CHECK(r.extraction[0].correct == 432);
  CHECK(r.extraction[1].correct == 478);
  CHECK(r.extraction[2].correct == 448);

  REQUIRE(r.attribution);
  CHECK(r.attribution->total == 118);
  CHECK(r.attribution->causes[0].count == 52);
  CHECK(r.attribution->causes[1].count == 34);
  CHECK(r.attribution->causes[2].count == 18);
  CHECK(r.attribution->causes[3].count == 14);

  REQUIRE(r.ceiling);
  CHECK(pct1(r.ceiling->perfect_extraction) == doctest::Approx(78.5));
  CHECK(pct1(r.ceiling->perfect_algorithm) == doctest::Approx(82.7));
  CHECK(pct1(r.ceiling->perfect_both) == doctest::Approx(88.0));
  CHECK(pct1(r.ceiling->theoretical_max) == doctest::Approx(99.4));
}

TEST_CASE("evaluation recomputes identically from a report file") {
  std::stringstream ss;
  write_reports(ss, cohort_reports());
  const auto back = read_reports(ss);
  const auto again = evaluate_reports(back);
  CHECK(evaluation_to_json(again) == evaluation_to_json(cohort_evaluation()));
  CHECK(render_tables(again) == render_tables(cohort_evaluation()));
}

TEST_CASE("rendered tables") {
  const auto text = render_tables(cohort_evaluation());
  CHECK(text.find("System                  374/492     76.0%  72.1%-79.6%") != std::string::npos);
  CHECK(text.find("Initial clinical        283/492     57.5%  53.1%-61.8%") != std::string::npos);
  CHECK(text.find("chi2 = 28.62") != std::string::npos);
  CHECK(text.find("Perfect extraction + algorithm       88.0%") != std::string::npos);
  CHECK(text.find("threshold_boundary                  52    44.1%") != std::string::npos);
  CHECK(text.find("Table") == std::string::npos);
}

TEST_CASE("empty evaluation") {
  CHECK_THROWS_AS(evaluate_reports({}), Error);
  CaseReport excluded;
  excluded.case_id = "x";
  excluded.status = CaseStatus::Excluded;
  excluded.exclusion = ExclusionReason::QcFailed;
  excluded.reference_label = ObservedLabel(Category::BT2);
  const std::vector<CaseReport> only = {excluded};
  try {
    evaluate_reports(only);
    FAIL("expected EmptyCohort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCohort);
  }
}
