#include "btrads/scorer.hpp"

#include <chrono>

#include "doctest.h"

using namespace btrads;
using M = MedicationStatus;

namespace {

VolumetricChange change(double flair_pct, double enh_pct) {
  VolumetricChange v;
  v.flair_change = PercentChange::value(flair_pct);
  v.enh_change = PercentChange::value(enh_pct);
  v.flair_trend = classify_trend(v.flair_change);
  v.enh_trend = classify_trend(v.enh_change);
  return v;
}

ClinicalVariables meds(M steroid, M bev) {
  ClinicalVariables v;
  v.steroid_status = steroid;
  v.bevacizumab_status = bev;
  return v;
}

const RadiationWindow kWithin{WindowStatus::Within90Days, 45};
const RadiationWindow kBeyond{WindowStatus::Beyond90Days, 200};
const RadiationWindow kUnknown{WindowStatus::Unknown, std::nullopt};

Category score(double flair, double enh, const ClinicalVariables& v, const RadiationWindow& w,
               const ScorerPolicy& p = {}) {
  return score_case(change(flair, enh), v, w, true, p).category;
}

}  // namespace

TEST_CASE("radiation window") {
  const auto within = radiation_window_status(Date::parse_iso("2023-05-10"), *Date::parse_iso("2023-06-24"));
  CHECK(within.status == WindowStatus::Within90Days);
  CHECK(within.days_since == 45);
  const auto beyond = radiation_window_status(Date::parse_iso("2023-01-01"), *Date::parse_iso("2023-07-01"));
  CHECK(beyond.status == WindowStatus::Beyond90Days);
  CHECK(beyond.days_since == 181);
  CHECK(radiation_window_status(std::nullopt, *Date::parse_iso("2023-07-01")).status == WindowStatus::Unknown);
  const auto after = radiation_window_status(Date::parse_iso("2024-09-01"), *Date::parse_iso("2024-03-01"));
  CHECK(after.status == WindowStatus::Unknown);
  CHECK_FALSE(after.days_since);
  CHECK(radiation_window_status(Date::parse_iso("2023-01-01"), *Date::parse_iso("2023-03-31")).status ==
        WindowStatus::Within90Days);
  CHECK(radiation_window_status(Date::parse_iso("2023-01-01"), *Date::parse_iso("2023-04-01")).status ==
        WindowStatus::Beyond90Days);
  CHECK(radiation_window_status(Date::parse_iso("2023-01-01"), *Date::parse_iso("2023-01-01")).status ==
        WindowStatus::Within90Days);
}

TEST_CASE("medication explains") {
  CHECK(medication_explains(Direction::Improvement, meds(M::None, M::Active)));
  CHECK(medication_explains(Direction::Improvement, meds(M::Recent, M::None)));
  CHECK_FALSE(medication_explains(Direction::Improvement, meds(M::None, M::None)));
  CHECK(medication_explains(Direction::Worsening, meds(M::Recent, M::None)));
  CHECK(medication_explains(Direction::Worsening, meds(M::None, M::Recent)));
  CHECK_FALSE(medication_explains(Direction::Worsening, meds(M::Active, M::Active)));
}

TEST_CASE("reference examples") {
  // Improvement under bevacizumab, stability, and marked progression.
  CHECK(score(-35.0, -60.0, meds(M::None, M::Active), kBeyond) == Category::BT1b);
  CHECK(score(5.0, -8.0, meds(M::None, M::None), kBeyond) == Category::BT2);
  CHECK(score_case(compute_case_volumetrics([] {
                     CaseRecord c;
                     c.baseline_exam_id = "b";
                     c.baseline_flair_ml = 10.0;
                     c.followup_flair_ml = 33.1;
                     c.baseline_enh_ml = 4.0;
                     c.followup_enh_ml = 11.48;
                     return c;
                   }()),
                   meds(M::None, M::None), kBeyond, true)
            .category == Category::BT4);
}

TEST_CASE("decision table terminals") {
  const auto none = meds(M::None, M::None);
  CHECK(score_case(std::nullopt, none, kBeyond, false).category == Category::BT0);
  CHECK(score(25.0, 30.0, none, kWithin) == Category::BT3a);
  CHECK(score(35.0, -5.0, none, kBeyond) == Category::BT3b);
  CHECK(score(25.0, 30.0, none, kBeyond) == Category::BT3c);
  CHECK(score(-30.0, 10.0, none, kBeyond) == Category::BT1a);
  CHECK(score(25.0, 30.0, meds(M::Recent, M::None), kBeyond) == Category::BT3a);
  CHECK(score(25.0, 30.0, meds(M::None, M::Recent), kBeyond) == Category::BT3a);
  CHECK(score(25.0, 30.0, meds(M::Active, M::Active), kBeyond) == Category::BT3c);
  CHECK(score(50.0, 25.0, none, kBeyond) == Category::BT4);
  CHECK(score(25.0, 50.0, none, kBeyond) == Category::BT4);
  CHECK(score(0.0, 50.0, none, kBeyond) == Category::BT3c);
  CHECK(score(-50.0, 30.0, none, kBeyond) == Category::BT3c);
}

TEST_CASE("enhancement priority policy") {
  const auto none = meds(M::None, M::None);
  const ScorerPolicy off{false};
  const auto r = score_case(change(-50.0, 30.0), none, kBeyond, true, off);
  CHECK(r.category == Category::BT3b);
  CHECK(r.trace.back().rule_id == "R3f");
  // FLAIR stable with enhancement worse is still 3c without priority.
  CHECK(score(0.0, 30.0, none, kBeyond, off) == Category::BT3c);
}

TEST_CASE("trace records every evaluated rule in order") {
  const auto r = score_case(change(25.0, 30.0), meds(M::None, M::None), kBeyond, true);
  std::vector<std::string> ids;
  for (const auto& s : r.trace) ids.push_back(s.rule_id);
  CHECK(ids == std::vector<std::string>{"R0", "R1", "R2", "R3", "R3a", "R3b", "R3c", "R3d"});
  CHECK(r.trace.back().outcome == "BT-3c");
  CHECK(r.trace.front().outcome == kNoMatch);
}

TEST_CASE("flags") {
  auto r = score_case(change(25.0, 30.0), meds(M::None, M::None), kUnknown, true);
  CHECK(r.has_flag(ScoreFlag::UnknownRadiationDate));
  CHECK(r.category == Category::BT3c);

  VolumetricChange zero;
  zero.flair_change = PercentChange::value(5.0);
  zero.enh_change = PercentChange::new_from_zero();
  zero.flair_trend = Trend::Stable;
  zero.enh_trend = Trend::MajorWorse;
  r = score_case(zero, meds(M::None, M::None), kBeyond, true);
  CHECK(r.has_flag(ScoreFlag::ZeroBaselineCompartment));
  CHECK(r.category == Category::BT3c);

  auto conflicted = meds(M::Recent, M::None);
  conflicted.conflicting_cues.push_back(Variable::Steroid);
  CHECK(score_case(change(0, 0), conflicted, kBeyond, true).has_flag(ScoreFlag::MedicationConflict));
}

namespace {

// Independent statement of the decision table used as a grid oracle.
Category oracle(double f, double e, const ClinicalVariables& v, WindowStatus w) {
  auto trend = [](double p) {
    if (p < -20) return 0;  // improved
    if (p <= 20) return 1;  // stable
    if (p <= 40) return 2;  // worse
    return 3;               // major
  };
  const int tf = trend(f), te = trend(e);
  const bool on_any = v.steroid_status != M::None || v.bevacizumab_status != M::None;
  const bool recent = v.steroid_status == M::Recent || v.bevacizumab_status == M::Recent;
  if (tf == 1 && te == 1) return Category::BT2;
  if (tf < 2 && te < 2) return on_any ? Category::BT1b : Category::BT1a;
  if (w == WindowStatus::Within90Days || recent) return Category::BT3a;
  if (tf >= 2 && te >= 2 && (tf == 3 || te == 3)) return Category::BT4;
  if (te >= 2) return Category::BT3c;
  return Category::BT3b;
}

}  // namespace

TEST_CASE("lattice grid matches the decision table exhaustively") {
  const double deltas[] = {-50, -21, -20, 0, 20, 21, 40, 41, 200};
  const WindowStatus windows[] = {WindowStatus::Within90Days, WindowStatus::Beyond90Days, WindowStatus::Unknown};
  const M statuses[] = {M::None, M::Active, M::Recent};
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t n = 0;
  std::array<std::size_t, 8> seen{};
  for (double f : deltas) {
    for (double e : deltas) {
      for (auto w : windows) {
        for (auto s : statuses) {
          for (auto b : statuses) {
            const auto v = meds(s, b);
            const RadiationWindow rw{w, w == WindowStatus::Unknown ? std::nullopt : std::optional<int>(60)};
            const auto got = score_case(change(f, e), v, rw, true).category;
            CHECK_MESSAGE(got == oracle(f, e, v, w), "flair ", f, " enh ", e);
            ++seen[static_cast<std::size_t>(got)];
            ++n;
          }
        }
      }
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(n == 9 * 9 * 3 * 3 * 3);
  CHECK(seconds < 1.0);
  for (Category c : kFollowupCategories) CHECK(seen[static_cast<std::size_t>(c)] > 0);
}

TEST_CASE("region mapping without medications beyond the window") {
  const auto none = meds(M::None, M::None);
  for (double f : {-19.0, 0.0, 19.0}) {
    for (double e : {-19.0, 0.0, 19.0}) CHECK(score(f, e, none, kBeyond) == Category::BT2);
  }
  for (double f : {41.0, 100.0}) {
    for (double e : {41.0, 300.0}) CHECK(score(f, e, none, kBeyond) == Category::BT4);
  }
  for (double e : {21.0, 30.0, 40.0}) CHECK(score(0.0, e, none, kBeyond) == Category::BT3c);
  for (double f : {21.0, 60.0}) CHECK(score(f, 0.0, none, kBeyond) == Category::BT3b);
}
