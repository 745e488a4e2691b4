#include "btrads/volumetrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"

using namespace btrads;

TEST_CASE("percent change") {
  CHECK(percent_change(10.0, 12.0) == PercentChange::value(20.0));
  CHECK(percent_change(2.0, 0.0) == PercentChange::value(-100.0));
  CHECK(percent_change(0.0, 0.0) == PercentChange::both_zero());
  CHECK(percent_change(0.0, 1.5) == PercentChange::new_from_zero());
  CHECK(percent_change(1.0, 29.82).percent == doctest::Approx(2882.0));
}

TEST_CASE("percent change rejects invalid volumes") {
  CHECK_THROWS_AS(percent_change(-1.0, 2.0), Error);
  CHECK_THROWS_AS(percent_change(1.0, std::numeric_limits<double>::infinity()), Error);
  CHECK_THROWS_AS(percent_change(std::nan(""), 2.0), Error);
  try {
    percent_change(1.0, -0.5);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidVolume);
  }
}

TEST_CASE("trend thresholds") {
  CHECK(classify_trend(PercentChange::value(-20.0)) == Trend::Stable);
  CHECK(classify_trend(PercentChange::value(20.0)) == Trend::Stable);
  CHECK(classify_trend(PercentChange::value(-20.001)) == Trend::Improved);
  CHECK(classify_trend(PercentChange::value(20.001)) == Trend::Worse);
  CHECK(classify_trend(PercentChange::value(40.0)) == Trend::Worse);
  CHECK(classify_trend(PercentChange::value(41.0)) == Trend::MajorWorse);
  CHECK(classify_trend(PercentChange::value(231.0)) == Trend::MajorWorse);
  CHECK(classify_trend(PercentChange::new_from_zero()) == Trend::MajorWorse);
  CHECK(classify_trend(PercentChange::both_zero()) == Trend::Stable);
}

TEST_CASE("custom thresholds") {
  const TrendThresholds t{10.0, 30.0};
  CHECK(classify_trend(PercentChange::value(15.0), t) == Trend::Worse);
  CHECK(classify_trend(PercentChange::value(35.0), t) == Trend::MajorWorse);
  CHECK(classify_trend(PercentChange::value(-15.0), t) == Trend::Improved);
}

TEST_CASE("trend is monotone in follow-up volume") {
  for (double base : {0.5, 3.0, 20.0, 75.0}) {
    int last = -1;
    for (int step = 0; step <= 400; ++step) {
      const double follow = base * step / 100.0;
      const int t = static_cast<int>(classify_trend(percent_change(base, follow)));
      CHECK(t >= last);
      last = t;
    }
  }
}

namespace {

CaseRecord volumes(double bf, double ff, double be, double fe) {
  CaseRecord c;
  c.case_id = "v";
  c.baseline_exam_id = "v-b";
  c.baseline_date = Date::parse_iso("2023-01-01");
  c.followup_date = *Date::parse_iso("2023-03-01");
  c.baseline_flair_ml = bf;
  c.followup_flair_ml = ff;
  c.baseline_enh_ml = be;
  c.followup_enh_ml = fe;
  return c;
}

}  // namespace

TEST_CASE("case volumetrics") {
  const auto stable = compute_case_volumetrics(volumes(10, 10, 5, 5));
  CHECK(stable.flair_trend == Trend::Stable);
  CHECK(stable.enh_trend == Trend::Stable);

  const auto major = compute_case_volumetrics(volumes(10.0, 33.1, 4.0, 11.48));
  CHECK(major.flair_change.percent == doctest::Approx(231.0));
  CHECK(major.enh_change.percent == doctest::Approx(187.0));
  CHECK(major.flair_trend == Trend::MajorWorse);
  CHECK(major.enh_trend == Trend::MajorWorse);

  const auto extreme = compute_case_volumetrics(volumes(10, 10, 1.0, 29.82));
  CHECK(extreme.enh_change.percent == doctest::Approx(2882.0));
  CHECK(extreme.enh_trend == Trend::MajorWorse);

  auto no_baseline = volumes(10, 10, 5, 5);
  no_baseline.baseline_exam_id.reset();
  CHECK_THROWS_AS(compute_case_volumetrics(no_baseline), Error);
}

TEST_CASE("volumetrics table round trip and join") {
  const std::vector<VolumetricsRow> rows = {
      {"c1-b", 10.0, 2.0, true}, {"c1", 12.5, 2.5, true}, {"c2-b", 8.0, 1.0, true}, {"c2", 9.0, 1.0, false}};
  std::stringstream ss;
  write_volumetrics_table(ss, rows);
  const auto back = read_volumetrics_table(ss);
  REQUIRE(back.size() == rows.size());
  CHECK(back[1].exam_id == "c1");
  CHECK(back[1].flair_ml == doctest::Approx(12.5));
  CHECK_FALSE(back[3].qc_pass);

  std::vector<CaseRecord> cases = {volumes(0, 0, 0, 0), volumes(0, 0, 0, 0)};
  cases[0].case_id = "c1";
  cases[0].baseline_exam_id = "c1-b";
  cases[1].case_id = "c2";
  cases[1].baseline_exam_id = "c2-b";
  CHECK(apply_volumetrics_table(cases, back) == 2);
  CHECK(cases[0].baseline_flair_ml == doctest::Approx(10.0));
  CHECK(cases[0].followup_enh_ml == doctest::Approx(2.5));
  CHECK(cases[0].qc_pass);
  CHECK_FALSE(cases[1].qc_pass);
}

TEST_CASE("volumetrics table accepts commas and rejects garbage") {
  std::stringstream csv("exam_id,flair_ml,enh_ml,qc_pass\ne1,1.5,0.5,true\n");
  const auto rows = read_volumetrics_table(csv);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].enh_ml == doctest::Approx(0.5));

  std::stringstream bad("exam_id\tflair_ml\tenh_ml\tqc_pass\ne1\tabc\t0.5\ttrue\n");
  CHECK_THROWS_AS(read_volumetrics_table(bad), Error);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_volumetrics_table(empty), Error);
}
