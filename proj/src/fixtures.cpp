#include "btrads/fixtures.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "btrads/extractor.hpp"
#include "btrads/json_io.hpp"
#include "btrads/scorer.hpp"

namespace btrads {

namespace {

using C = Category;
using M = MedicationStatus;

// Raw 64-bit engine output only, so sequences do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    std::uint64_t x;
    do {
      x = g_();
    } while (x < threshold);
    return x % n;
  }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  double unit() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  bool chance(double p) { return unit() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 g_;
};

enum Mismatch : unsigned { kNone = 0, kSteroid = 1, kBev = 2, kRad = 4 };

enum class Window { Within, Mid, Late, Unknown };

struct Design {
  ObservedLabel reference = C::BT2;
  C predicted = C::BT2;
  std::optional<ErrorCause> cause;
  bool fix_ext = false;
  bool fix_alg = false;
  bool fix_both = false;
  unsigned mismatch = kNone;
  bool initial_correct = true;
  std::string initial_text;
  std::string special;
};

struct Range {
  double lo;
  double hi;
};

constexpr Range kImproved{-70.0, -21.0};
constexpr Range kStable{-18.0, 18.0};
constexpr Range kWorse{21.0, 39.0};
constexpr Range kMajor{41.0, 180.0};

struct Plan {
  Range flair;
  Range enh;
};

bool is_label(const ObservedLabel& l, C c) { return l.matches(c); }

Plan pick_trends(const Design& d, Rng& rng) {
  const auto ref = d.reference.category();
  const C p = d.predicted;
  if (d.cause == ErrorCause::ThresholdBoundary && ref) {
    if (*ref == C::BT2 && p == C::BT3c) return {kStable, {20.6, 24.0}};
    if (*ref == C::BT3c && p == C::BT2) return {{-12.0, 12.0}, {14.0, 19.4}};
    if (*ref == C::BT4 && p == C::BT3c) {
      return rng.chance(0.5) ? Plan{{15.0, 19.4}, {45.0, 120.0}} : Plan{{30.0, 39.4}, {34.0, 39.4}};
    }
    if (*ref == C::BT4 && p == C::BT2) return {{15.0, 19.4}, {15.0, 19.4}};
    if (*ref == C::BT1a && p == C::BT2) return {{-19.4, -12.0}, {-19.4, -14.0}};
  }
  if (d.cause == ErrorCause::AlgorithmLimitation && ref) {
    if (*ref == C::BT3c && p == C::BT3b) return {kWorse, {3.0, 15.0}};
    if (*ref == C::BT3b && p == C::BT3c) return {kStable, {21.0, 30.0}};
    if (*ref == C::BT4 && p == C::BT3b) return {kMajor, {5.0, 17.0}};
    if (*ref == C::BT3c && p == C::BT4) return {{41.0, 70.0}, kWorse};
    if (*ref == C::BT2 && p == C::BT3b) return {{20.6, 27.0}, kStable};
    if (*ref == C::BT4 && p == C::BT1a) return {kImproved, {0.0, 15.0}};
  }
  switch (p) {
    case C::BT2:
      return {kStable, kStable};
    case C::BT1a:
    case C::BT1b: {
      const int k = rng.between(0, 2);
      if (k == 0) return {kImproved, kImproved};
      if (k == 1) return {kImproved, kStable};
      return {kStable, kImproved};
    }
    case C::BT3a: {
      const std::vector<Plan> opts = {{kWorse, kStable}, {kStable, kWorse}, {kWorse, kWorse}, {kMajor, kWorse},
                                      {kStable, kMajor}};
      return rng.pick(opts);
    }
    case C::BT3b:
      return {rng.chance(0.6) ? kWorse : kMajor, rng.chance(0.7) ? kStable : kImproved};
    case C::BT3c: {
      const std::vector<Plan> opts = {{kStable, kWorse}, {kStable, kMajor}, {kImproved, kWorse},
                                      {kImproved, kMajor}, {kWorse, kWorse}};
      return rng.pick(opts);
    }
    case C::BT4:
      return rng.chance(0.5) ? Plan{kMajor, kMajor} : (rng.chance(0.5) ? Plan{kWorse, kMajor} : Plan{kMajor, kWorse});
    case C::BT0:
      break;
  }
  throw std::logic_error("fixture: no trend plan");
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

bool clear_of_thresholds(const PercentChange& pc) {
  if (!pc.is_value()) return true;
  for (double t : {-20.0, 20.0, 40.0}) {
    if (std::fabs(pc.percent - t) < 0.5) return false;
  }
  return true;
}

std::pair<double, double> compartment(Range r, double base_lo, double base_hi, Rng& rng) {
  const Trend want = classify_trend(PercentChange::value((r.lo + r.hi) / 2.0));
  for (int attempt = 0; attempt < 200; ++attempt) {
    const double base = round3(rng.uniform(base_lo, base_hi));
    const double follow = round3(base * (1.0 + rng.uniform(r.lo, r.hi) / 100.0));
    const PercentChange pc = percent_change(base, follow);
    if (classify_trend(pc) == want && clear_of_thresholds(pc)) return {base, follow};
  }
  throw std::logic_error("fixture: cannot place volume");
}

std::string iso(Date d) { return d.iso(); }

std::string long_date(Date d) {
  static constexpr std::array<std::string_view, 12> kMonths = {
      "January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
      "November", "December"};
  const std::chrono::year_month_day ymd{d.days()};
  return fmt::format("{} {}, {}", kMonths[static_cast<unsigned>(ymd.month()) - 1], static_cast<unsigned>(ymd.day()),
                     static_cast<int>(ymd.year()));
}

std::string slash_date(Date d) {
  const std::chrono::year_month_day ymd{d.days()};
  return fmt::format("{:02}/{:02}/{}", static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     static_cast<int>(ymd.year()));
}

int days_for(Window w, Rng& rng) {
  switch (w) {
    case Window::Within: return rng.between(14, 85);
    case Window::Mid: return rng.between(95, 175);
    case Window::Late: return rng.between(190, 1500);
    case Window::Unknown: break;
  }
  return 0;
}

Window beyond_window(Rng& rng) {
  const double u = rng.unit();
  if (u < 0.2) return Window::Mid;
  if (u < 0.8) return Window::Late;
  return Window::Unknown;
}

Window any_window(Rng& rng) {
  const double u = rng.unit();
  if (u < 0.08) return Window::Within;
  if (u < 0.25) return Window::Mid;
  if (u < 0.82) return Window::Late;
  return Window::Unknown;
}

// How the note expresses a variable; some styles read differently to the
// pattern extractor than to an expert.
enum class MedStyle { Plain, NegatedChange, BareMention, ConflictToRecent, ConflictToActive };
enum class RadStyle { Plain, Vague, StartAndCompletion, VisitThenCompletion, AfterFollowup };

struct Realized {
  M steroid = M::None;
  M bev = M::None;
  MedStyle steroid_style = MedStyle::Plain;
  MedStyle bev_style = MedStyle::Plain;
  std::optional<Date> extracted_rad;
  std::optional<Date> expert_rad;
  RadStyle rad_style = RadStyle::Plain;
  M expert_steroid = M::None;
  M expert_bev = M::None;
};

std::string steroid_sentence(M status, MedStyle style, Rng& rng) {
  if (style == MedStyle::NegatedChange) return "No change to dexamethasone dosing.";
  if (style == MedStyle::BareMention) return "Dexamethasone was considered but deferred.";
  if (style == MedStyle::ConflictToRecent) {
    return "Remains on dexamethasone 2 mg daily. Dexamethasone was tapered off this week.";
  }
  if (style == MedStyle::ConflictToActive) {
    return "Dexamethasone was stopped in the spring. Dexamethasone restarted for headaches.";
  }
  const int mg = rng.pick(std::vector<int>{1, 2, 4, 6});
  switch (status) {
    case M::Active:
      return rng.pick(std::vector<std::string>{
          fmt::format("Continues dexamethasone {} mg daily.", mg),
          fmt::format("Currently taking dexamethasone {} mg twice daily.", mg),
          fmt::format("Remains on Decadron {} mg.", mg),
          fmt::format("Prednisone {} mg daily was started for edema.", mg * 5)});
    case M::Recent:
      return rng.pick(std::vector<std::string>{
          fmt::format("Dexamethasone was tapered off {} weeks ago.", rng.between(2, 6)),
          "Steroids were discontinued last month.", "Decadron taper completed two weeks ago."});
    case M::None:
      if (rng.chance(0.6)) return "";
      return rng.pick(std::vector<std::string>{"Not on steroids.", "Denies steroid use."});
  }
  return "";
}

std::string bev_sentence(M status, MedStyle style, Rng& rng) {
  if (style == MedStyle::NegatedChange) return "No change to bevacizumab schedule.";
  if (style == MedStyle::BareMention) return "Bevacizumab was discussed at tumor board.";
  switch (status) {
    case M::Active:
      return rng.pick(std::vector<std::string>{
          "Receiving bevacizumab every two weeks.",
          fmt::format("Continues Avastin {} mg/kg every 2 weeks.", rng.pick(std::vector<int>{5, 10})),
          fmt::format("Bevacizumab was started {} months ago.", rng.between(2, 9))});
    case M::Recent:
      return rng.pick(std::vector<std::string>{
          fmt::format("Bevacizumab was discontinued after cycle {}.", rng.between(4, 12)),
          "Avastin held since last month."});
    case M::None:
      if (rng.chance(0.7)) return "";
      return rng.pick(std::vector<std::string>{"No bevacizumab.", "Has never received bevacizumab."});
  }
  return "";
}

std::string radiation_sentence(const Realized& r, Rng& rng) {
  switch (r.rad_style) {
    case RadStyle::Plain: {
      if (!r.extracted_rad) {
        if (rng.chance(0.4)) return "";
        return "Prior radiation was given at an outside institution, dates not available.";
      }
      const Date d = *r.extracted_rad;
      switch (rng.between(0, 3)) {
        case 0: return "Completed chemoradiation on " + iso(d) + ".";
        case 1: return "Radiation therapy was completed " + long_date(d) + ".";
        case 2: return "Finished RT on " + slash_date(d) + ".";
        default: return "XRT course ended " + iso(d) + ".";
      }
    }
    case RadStyle::Vague: {
      const std::chrono::year_month_day ymd{r.expert_rad->days()};
      const unsigned m = static_cast<unsigned>(ymd.month());
      const char* season = m <= 2 || m == 12 ? "winter" : m <= 5 ? "spring" : m <= 8 ? "summer" : "autumn";
      return fmt::format("Radiation was completed at an outside hospital in {} {}.", season,
                         static_cast<int>(ymd.year()));
    }
    case RadStyle::StartAndCompletion:
      return "Radiation started " + iso(*r.extracted_rad) + " and was completed " + iso(*r.expert_rad) + ".";
    case RadStyle::VisitThenCompletion:
      return "Radiation oncology follow-up on " + iso(*r.extracted_rad) + "; course completed " +
             iso(*r.expert_rad) + ".";
    case RadStyle::AfterFollowup:
      return "Completed radiation on " + iso(*r.extracted_rad) + ".";
  }
  return "";
}

const std::vector<std::string>& fillers() {
  static const std::vector<std::string> k = {
      "Patient reports mild intermittent headaches.",
      "No new focal neurological deficits.",
      "KPS 80.",
      "Seizures remain well controlled on levetiracetam.",
      "Temozolomide cycle 4 completed without complications.",
      "MGMT promoter methylated, IDH wild-type.",
      "Family present for the visit.",
      "Plan to continue current management and repeat MRI in 8 weeks.",
      "Gait is steady and strength is full.",
      "Reports fatigue in the afternoons.",
  };
  return k;
}

std::string compose_note(const Realized& r, Rng& rng) {
  std::vector<std::string> blocks;
  blocks.push_back(radiation_sentence(r, rng));
  blocks.push_back(steroid_sentence(r.steroid, r.steroid_style, rng));
  blocks.push_back(bev_sentence(r.bev, r.bev_style, rng));
  const int n_fill = rng.between(1, 3);
  std::vector<std::string> pool = fillers();
  rng.shuffle(pool);
  for (int i = 0; i < n_fill; ++i) blocks.push_back(pool[static_cast<std::size_t>(i)]);
  blocks.erase(std::remove(blocks.begin(), blocks.end(), std::string()), blocks.end());
  rng.shuffle(blocks);
  const std::string header = rng.pick(std::vector<std::string>{
      "Follow-up visit for glioblastoma.", "Neuro-oncology follow-up, left frontal glioma.",
      "Interval visit for astrocytoma, IDH-mutant.", "Follow-up for recurrent high-grade glioma."});
  const std::string sep = rng.chance(0.3) ? "\n" : " ";
  std::string note = header;
  for (const auto& b : blocks) note += sep + b;
  return note;
}

// Chooses the statuses the note will show (what the extractor reads) for a
// designed prediction, before any mismatch overrides.
void choose_system_variables(const Design& d, Realized& r, Window& w, Rng& rng) {
  const C p = d.predicted;
  switch (p) {
    case C::BT1a:
      w = any_window(rng);
      break;
    case C::BT1b:
      if (rng.chance(0.6)) {
        r.bev = rng.chance(0.85) ? M::Active : M::Recent;
        if (rng.chance(0.3)) r.steroid = M::Active;
      } else {
        r.steroid = rng.chance(0.8) ? M::Active : M::Recent;
      }
      w = any_window(rng);
      break;
    case C::BT2:
      if (rng.chance(0.35)) r.bev = M::Active;
      if (rng.chance(0.15)) r.steroid = rng.chance(0.8) ? M::Active : M::Recent;
      w = any_window(rng);
      break;
    case C::BT3a:
      if (rng.chance(0.5)) {
        w = Window::Within;
        if (rng.chance(0.3)) r.steroid = M::Active;
      } else {
        w = beyond_window(rng);
        if (rng.chance(0.7)) {
          r.steroid = M::Recent;
        } else {
          r.bev = M::Recent;
        }
      }
      break;
    case C::BT3b:
    case C::BT3c:
    case C::BT4:
      w = beyond_window(rng);
      if (rng.chance(0.35)) r.bev = M::Active;
      if (rng.chance(0.2)) r.steroid = M::Active;
      break;
    case C::BT0:
      break;
  }
}

struct Built {
  CaseRecord record;
  ClinicalVariables expected;  // what the pattern extractor must return
};

Built realize(const Design& d, Rng& rng) {
  Built b;
  CaseRecord& c = b.record;
  const Date followup = *Date::from_ymd(2021, 3, 1);
  c.followup_date = followup.plus_days(rng.between(0, 1340));
  const double u = rng.unit();
  const int interval = u < 0.7 ? rng.between(50, 90) : u < 0.9 ? rng.between(9, 49) : rng.between(91, 183);
  c.baseline_date = c.followup_date.plus_days(-interval);
  c.baseline_exam_id = "";  // filled once the case id is known

  // Volumes.
  if (d.special == "fig4c") {
    c.baseline_flair_ml = 10.0, c.followup_flair_ml = 33.1, c.baseline_enh_ml = 4.0, c.followup_enh_ml = 11.48;
  } else if (d.special == "enh_2882") {
    c.baseline_flair_ml = 22.5, c.followup_flair_ml = 28.35, c.baseline_enh_ml = 1.0, c.followup_enh_ml = 29.82;
  } else if (d.special == "flair_854") {
    c.baseline_flair_ml = 5.0, c.followup_flair_ml = 47.7, c.baseline_enh_ml = 3.2, c.followup_enh_ml = 5.44;
  } else if (d.special == "flair_m87") {
    c.baseline_flair_ml = 40.0, c.followup_flair_ml = 5.2, c.baseline_enh_ml = 6.4, c.followup_enh_ml = 5.952;
  } else if (d.special == "enh_m100") {
    c.baseline_flair_ml = 18.0, c.followup_flair_ml = 12.42, c.baseline_enh_ml = 2.5, c.followup_enh_ml = 0.0;
  } else if (d.special == "zero_both") {
    auto [bf, ff] = compartment(kStable, 8.0, 60.0, rng);
    c.baseline_flair_ml = bf, c.followup_flair_ml = ff, c.baseline_enh_ml = 0.0, c.followup_enh_ml = 0.0;
  } else if (d.special == "zero_new") {
    auto [bf, ff] = compartment(kStable, 8.0, 60.0, rng);
    c.baseline_flair_ml = bf, c.followup_flair_ml = ff, c.baseline_enh_ml = 0.0, c.followup_enh_ml = 0.6;
  } else {
    const Plan plan = pick_trends(d, rng);
    std::tie(c.baseline_flair_ml, c.followup_flair_ml) = compartment(plan.flair, 8.0, 80.0, rng);
    std::tie(c.baseline_enh_ml, c.followup_enh_ml) = compartment(plan.enh, 0.8, 15.0, rng);
  }

  // Variables shown in the note.
  Realized r;
  Window w = Window::Unknown;
  choose_system_variables(d, r, w, rng);
  if (d.special == "fig4a" || d.special == "flair_m87") {
    r.bev = M::Active, r.steroid = M::None;
  } else if (d.special == "fig4c") {
    r.bev = M::None, r.steroid = M::None, w = Window::Late;
  } else if (d.special == "conflict_recent") {
    r.steroid = M::Recent, r.bev = M::None, r.steroid_style = MedStyle::ConflictToRecent;
  } else if (d.special == "conflict_active") {
    r.steroid = M::Active, r.steroid_style = MedStyle::ConflictToActive;
  }

  const bool pred_1b = d.predicted == C::BT1b;
  if (d.mismatch & kSteroid) {
    if (d.predicted == C::BT1a || (!pred_1b && rng.chance(0.5) && r.steroid == M::None)) {
      r.steroid = M::None, r.steroid_style = MedStyle::NegatedChange, r.expert_steroid = M::Active;
    } else if (pred_1b) {
      r.steroid = M::Active, r.bev = M::None, r.steroid_style = MedStyle::BareMention;
      r.expert_steroid = M::None;
    } else {
      r.steroid = M::Active, r.steroid_style = MedStyle::BareMention, r.expert_steroid = M::None;
    }
  }
  if (d.mismatch & kBev) {
    if (pred_1b) {
      r.bev = M::Active, r.steroid = M::None, r.steroid_style = MedStyle::Plain, r.bev_style = MedStyle::BareMention;
      r.expert_bev = M::None;
    } else if (rng.chance(0.5)) {
      r.bev = M::Active, r.bev_style = MedStyle::BareMention, r.expert_bev = M::None;
    } else {
      r.bev = M::None, r.bev_style = MedStyle::NegatedChange, r.expert_bev = M::Active;
    }
  }
  if (!(d.mismatch & kSteroid)) r.expert_steroid = r.steroid;
  if (!(d.mismatch & kBev)) r.expert_bev = r.bev;

  // Radiation dates.
  const auto before = [&](int days) { return c.followup_date.plus_days(-days); };
  if (d.mismatch & kRad) {
    const auto ref = d.reference.category();
    if (d.predicted == C::BT3a && ref == C::BT2) {
      r.rad_style = RadStyle::VisitThenCompletion;
      r.extracted_rad = before(rng.between(20, 80));
      r.expert_rad = before(rng.between(200, 900));
    } else if (ref == C::BT3a && d.predicted == C::BT2) {
      r.rad_style = RadStyle::Vague;
      r.expert_rad = before(rng.between(20, 80));
    } else if (ref == C::BT3a && d.predicted == C::BT3b) {
      r.rad_style = RadStyle::StartAndCompletion;
      r.expert_rad = before(rng.between(55, 80));
      r.extracted_rad = r.expert_rad->plus_days(-42);
    } else if (d.predicted == C::BT3b || d.predicted == C::BT3c || d.predicted == C::BT4) {
      r.rad_style = RadStyle::StartAndCompletion;
      r.expert_rad = before(rng.between(190, 900));
      r.extracted_rad = r.expert_rad->plus_days(-42);
    } else if (rng.chance(0.5)) {
      r.rad_style = RadStyle::Vague;
      r.expert_rad = before(rng.between(30, 900));
    } else {
      r.rad_style = RadStyle::StartAndCompletion;
      r.expert_rad = before(rng.between(30, 900));
      r.extracted_rad = r.expert_rad->plus_days(-rng.between(35, 45));
    }
  } else if (d.special == "rad_after") {
    r.rad_style = RadStyle::AfterFollowup;
    r.extracted_rad = c.followup_date.plus_days(rng.between(20, 200));
    r.expert_rad = r.extracted_rad;
  } else if (w != Window::Unknown) {
    r.extracted_rad = before(days_for(w, rng));
    r.expert_rad = r.extracted_rad;
  }

  c.note_text = compose_note(r, rng);

  ClinicalVariables& e = b.expected;
  e.steroid_status = r.steroid;
  e.bevacizumab_status = r.bev;
  e.radiation_completion_date = r.extracted_rad;
  if (r.steroid_style == MedStyle::ConflictToRecent || r.steroid_style == MedStyle::ConflictToActive) {
    e.conflicting_cues.push_back(Variable::Steroid);
  }

  Adjudication adj;
  adj.cause = d.cause;
  adj.correct_if_perfect_extraction = d.fix_ext;
  adj.correct_if_perfect_algorithm = d.fix_alg;
  adj.correct_if_perfect_both = d.fix_both;
  ClinicalVariables expert;
  expert.steroid_status = r.expert_steroid;
  expert.bevacizumab_status = r.expert_bev;
  expert.radiation_completion_date = r.expert_rad;
  adj.expert_variables = expert;
  c.adjudication = adj;

  c.reference_label = d.reference;
  c.initial_clinical_label = parse_btrads_label(d.initial_text);
  return b;
}

void check_built(const Built& b, std::optional<C> predicted) {
  const CaseRecord& c = b.record;
  const ClinicalVariables got = pattern_rules(c.note_text);
  const ClinicalVariables& want = b.expected;
  if (got.steroid_status != want.steroid_status || got.bevacizumab_status != want.bevacizumab_status ||
      got.radiation_completion_date != want.radiation_completion_date ||
      got.conflicting_cues != want.conflicting_cues) {
    throw std::logic_error("fixture: extraction differs from design for note: " + c.note_text);
  }
  if (!validate_clinical_variables(got, c.note_text).empty()) {
    throw std::logic_error("fixture: extracted spans invalid for note: " + c.note_text);
  }
  if (!predicted) return;
  const auto vol = compute_case_volumetrics(c);
  const auto score = score_case(vol, got, radiation_window_status(got.radiation_completion_date, c.followup_date),
                                true);
  if (score.category != *predicted) {
    throw std::logic_error(fmt::format("fixture: designed {} but scored {} for note: {}", to_string(*predicted),
                                       to_string(score.category), c.note_text));
  }
}

std::string canonical(C c) { return std::string(to_string(c)); }

std::string initial_variant(C c, Rng& rng) {
  std::string s = canonical(c);
  if (rng.chance(0.1)) s = "BT " + s.substr(3);
  return s;
}

std::string adjacent_label(C ref, Rng& rng) {
  switch (ref) {
    case C::BT1a: return canonical(rng.chance(0.6) ? C::BT1b : C::BT2);
    case C::BT1b: return canonical(rng.chance(0.6) ? C::BT1a : C::BT2);
    case C::BT2: return canonical(rng.pick(std::vector<C>{C::BT1a, C::BT3c, C::BT1b, C::BT3b}));
    case C::BT3a: return canonical(rng.chance(0.5) ? C::BT3b : C::BT3c);
    case C::BT3b: return canonical(rng.pick(std::vector<C>{C::BT3c, C::BT3a, C::BT2}));
    case C::BT3c: return canonical(rng.pick(std::vector<C>{C::BT3b, C::BT4, C::BT2}));
    case C::BT4: return canonical(rng.chance(0.8) ? C::BT3c : C::BT3b);
    case C::BT0: break;
  }
  return canonical(C::BT2);
}

std::vector<Design> design_evaluable(Rng& rng) {
  std::vector<Design> ds;
  auto add = [&](ObservedLabel ref, C pred, std::optional<ErrorCause> cause, int n, unsigned mismatch = kNone) {
    for (int i = 0; i < n; ++i) {
      Design d;
      d.reference = ref;
      d.predicted = pred;
      d.cause = cause;
      d.mismatch = mismatch;
      ds.push_back(d);
    }
  };
  constexpr auto T = ErrorCause::ThresholdBoundary;
  constexpr auto E = ErrorCause::ExtractionError;
  constexpr auto A = ErrorCause::AlgorithmLimitation;
  constexpr auto G = ErrorCause::GroundTruthAmbiguity;

  // Correct classifications (confusion diagonal).
  add(C::BT1a, C::BT1a, std::nullopt, 51);
  add(C::BT1b, C::BT1b, std::nullopt, 51);
  add(C::BT2, C::BT2, std::nullopt, 108);
  add(C::BT3a, C::BT3a, std::nullopt, 14);
  add(C::BT3b, C::BT3b, std::nullopt, 12);
  add(C::BT3c, C::BT3c, std::nullopt, 86);
  add(C::BT4, C::BT4, std::nullopt, 52);

  // Threshold boundary.
  add(C::BT2, C::BT3c, T, 20);
  add(C::BT3c, C::BT2, T, 13);
  add(C::BT4, C::BT3c, T, 13);
  add(C::BT4, C::BT2, T, 4);
  add(C::BT1a, C::BT2, T, 2);
  // Ground-truth ambiguity, including the three non-standard references.
  add(C::BT1a, C::BT2, G, 1);
  add(C::BT2, C::BT1a, G, 8);
  add(C::BT3c, C::BT1a, G, 2);
  add(parse_btrads_label("BT-3"), C::BT3c, G, 1, kRad);
  add(parse_btrads_label("BT-1"), C::BT1a, G, 1, kSteroid);
  add(parse_btrads_label("BT-3"), C::BT3b, G, 1);
  // Extraction error propagation.
  add(C::BT1a, C::BT1b, E, 1, kSteroid);
  add(C::BT2, C::BT1b, E, 4, kSteroid);
  add(C::BT2, C::BT1b, E, 3, kBev);
  add(C::BT3b, C::BT1b, E, 2, kBev);
  add(C::BT3c, C::BT1b, E, 2, kSteroid);
  add(C::BT3c, C::BT1b, E, 2, kBev);
  add(C::BT4, C::BT1b, E, 2, kBev);
  add(C::BT2, C::BT3a, E, 2, kRad);
  add(C::BT3a, C::BT2, E, 1, kRad);
  add(C::BT3a, C::BT3b, E, 1, kRad);
  add(C::BT2, C::BT1a, E, 8, kSteroid);
  add(C::BT3b, C::BT1a, E, 6, kSteroid);
  // Algorithm limitation.
  add(C::BT3c, C::BT3b, A, 6);
  add(C::BT3b, C::BT3c, A, 1);
  add(C::BT4, C::BT3b, A, 3);
  add(C::BT3c, C::BT4, A, 4);
  add(C::BT2, C::BT3b, A, 3);
  add(C::BT4, C::BT1a, A, 1);

  auto cell = [&](C ref, C pred, std::optional<ErrorCause> cause) {
    std::vector<Design*> out;
    for (auto& d : ds) {
      if (is_label(d.reference, ref) && d.predicted == pred && d.cause == cause) out.push_back(&d);
    }
    return out;
  };

  // Counterfactual ceiling flags: 12 fixed by extraction, 33 by algorithm,
  // 14 only when both are perfected.
  for (auto cells : {cell(C::BT1a, C::BT1b, E), cell(C::BT3a, C::BT3b, E), cell(C::BT3b, C::BT1a, E),
                     cell(C::BT3c, C::BT1b, E)}) {
    for (auto* d : cells) d->fix_ext = true;
  }
  for (auto cells : {cell(C::BT2, C::BT1a, E), cell(C::BT4, C::BT1b, E), cell(C::BT3b, C::BT1b, E),
                     cell(C::BT2, C::BT3a, E)}) {
    for (auto* d : cells) d->fix_both = true;
  }
  for (auto& d : ds) {
    if (d.cause == A) d.fix_alg = true;
  }
  for (auto* d : cell(C::BT4, C::BT3c, T)) d->fix_alg = true;
  {
    auto c = cell(C::BT4, C::BT2, T);
    c[0]->fix_alg = c[1]->fix_alg = true;
  }

  // Special cases among correct classifications.
  auto claim = [&](C c, const char* tag) {
    for (auto& d : ds) {
      if (!d.cause && d.predicted == c && d.special.empty() && d.mismatch == kNone) {
        d.special = tag;
        return;
      }
    }
    throw std::logic_error("fixture: no slot for special case");
  };
  claim(C::BT1b, "fig4a");
  claim(C::BT2, "fig4b");
  claim(C::BT4, "fig4c");
  claim(C::BT1a, "enh_m100");
  claim(C::BT4, "enh_2882");
  claim(C::BT4, "flair_854");
  claim(C::BT1b, "flair_m87");
  claim(C::BT2, "zero_both");
  claim(C::BT3c, "zero_new");
  claim(C::BT3a, "conflict_recent");
  claim(C::BT1b, "conflict_active");
  claim(C::BT3c, "rad_after");
  claim(C::BT2, "rad_after");

  // Extraction mismatches on correctly classified cases, where the differing
  // variable does not change the category: 38 steroid, 5 bevacizumab and 39
  // radiation-date mismatches spread over 75 cases.
  std::vector<Design*> stable_pool, other_pool;
  for (auto& d : ds) {
    if (d.cause || !d.special.empty()) continue;
    if (d.predicted == C::BT2) stable_pool.push_back(&d);
    if (d.predicted == C::BT1a || d.predicted == C::BT1b) other_pool.push_back(&d);
  }
  rng.shuffle(stable_pool);
  rng.shuffle(other_pool);
  std::size_t si = 0;
  std::vector<Design*> steroid_cases;
  for (int i = 0; i < 38; ++i) {
    stable_pool[si]->mismatch |= kSteroid;
    steroid_cases.push_back(stable_pool[si++]);
  }
  for (int i = 0; i < 5; ++i) stable_pool[si++]->mismatch |= kBev;
  for (int i = 0; i < 7; ++i) steroid_cases[static_cast<std::size_t>(i)]->mismatch |= kRad;
  int rad_left = 39 - 7;
  while (rad_left > 0 && si < stable_pool.size() && rad_left > 20) {
    stable_pool[si++]->mismatch |= kRad;
    --rad_left;
  }
  for (std::size_t i = 0; rad_left > 0; ++i, --rad_left) other_pool[i]->mismatch |= kRad;

  // Concordance with the initial clinical reads.
  std::vector<Design*> correct, wrong_standard, others;
  for (auto& d : ds) {
    if (!d.reference.is_standard()) {
      others.push_back(&d);
    } else if (!d.cause) {
      correct.push_back(&d);
    } else {
      wrong_standard.push_back(&d);
    }
  }
  rng.shuffle(correct);
  rng.shuffle(wrong_standard);
  std::vector<Design*> initial_wrong;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    correct[i]->initial_correct = i < 187;
    if (i >= 187) initial_wrong.push_back(correct[i]);
  }
  for (std::size_t i = 0; i < wrong_standard.size(); ++i) {
    wrong_standard[i]->initial_correct = i < 96;
    if (i >= 96) initial_wrong.push_back(wrong_standard[i]);
  }
  rng.shuffle(initial_wrong);
  static const std::vector<std::string> kInvalid = {"BT-2b", "BT-3d", "BT-1c", "BT-4a", "BT-2a"};
  static const std::vector<std::string> kMissing = {"BT-3", "BT-1", "BT 3", "bt-1"};
  for (std::size_t i = 0; i < initial_wrong.size(); ++i) {
    Design& d = *initial_wrong[i];
    if (i < 13) {
      d.initial_text = rng.pick(kInvalid);
    } else if (i < 33) {
      d.initial_text = rng.pick(kMissing);
    } else {
      d.initial_text = adjacent_label(*d.reference.category(), rng);
    }
  }
  for (auto* d : others) {
    d->initial_correct = false;
    d->initial_text = canonical(d->predicted == C::BT3b ? C::BT3c : C::BT3b);
  }
  for (auto& d : ds) {
    if (d.initial_correct) d.initial_text = initial_variant(*d.reference.category(), rng);
  }
  return ds;
}

}  // namespace

FixtureSet generate_reference_cohort(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Design> designs = design_evaluable(rng);
  if (designs.size() != 492) throw std::logic_error("fixture: evaluable design count");

  struct Item {
    CaseRecord record;
    std::optional<C> predicted;
  };
  std::vector<Item> items;
  for (const auto& d : designs) {
    Built b = realize(d, rng);
    check_built(b, d.predicted);
    items.push_back({std::move(b.record), d.predicted});
  }

  // Excluded cases: 9 without a baseline, 8 QC failures.
  const std::vector<C> refs(kFollowupCategories.begin(), kFollowupCategories.end());
  for (int i = 0; i < 17; ++i) {
    Design d;
    d.predicted = rng.pick(refs);
    d.reference = d.predicted;
    d.initial_text = canonical(d.predicted);
    Built b = realize(d, rng);
    check_built(b, std::nullopt);
    CaseRecord& c = b.record;
    c.adjudication.reset();
    if (i < 9) {
      c.baseline_exam_id.reset();
      c.baseline_date.reset();
      c.baseline_flair_ml = c.baseline_enh_ml = 0.0;
    } else {
      c.qc_pass = false;
    }
    items.push_back({std::move(c), std::nullopt});
  }

  rng.shuffle(items);
  FixtureSet set;
  for (std::size_t i = 0; i < items.size(); ++i) {
    CaseRecord& c = items[i].record;
    c.case_id = fmt::format("case-{:04}", i + 1);
    if (c.baseline_exam_id) {
      c.baseline_exam_id = c.case_id + "-baseline";
      set.volumetrics.push_back({*c.baseline_exam_id, c.baseline_flair_ml, c.baseline_enh_ml, true});
    }
    set.volumetrics.push_back({c.case_id, c.followup_flair_ml, c.followup_enh_ml, c.qc_pass});
    check_case_invariants(c);
    set.cases.push_back(std::move(c));
    set.designed_prediction.push_back(items[i].predicted);
  }
  set.config = {{"backend", "patterns"},
                {"eligibility", {{"exclude_no_baseline", true}, {"max_baseline_interval_days", 183}}},
                {"thresholds", {{"stable_pct", 20.0}, {"major_pct", 40.0}, {"radiation_window_days", 90}}},
                {"scorer", {{"enhancement_priority", true}}},
                {"volumetrics_table", "volumetrics.tsv"}};
  return set;
}

void write_fixture_set(const FixtureSet& set, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("cases.jsonl");
    write_cases(out, set.cases);
  }
  {
    auto out = open("volumetrics.tsv");
    write_volumetrics_table(out, set.volumetrics);
  }
  {
    auto out = open("config.json");
    out << set.config.dump(2) << '\n';
  }
}

}  // namespace btrads
