#include "btrads/scorer.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace btrads {

std::string_view to_string(WindowStatus s) noexcept {
  switch (s) {
    case WindowStatus::Within90Days: return "within_90_days";
    case WindowStatus::Beyond90Days: return "beyond_90_days";
    case WindowStatus::Unknown: return "unknown";
  }
  return "unknown";
}

std::optional<WindowStatus> window_status_from_string(std::string_view s) noexcept {
  for (auto w : {WindowStatus::Within90Days, WindowStatus::Beyond90Days, WindowStatus::Unknown}) {
    if (to_string(w) == s) return w;
  }
  return std::nullopt;
}

std::string_view to_string(ScoreFlag f) noexcept {
  switch (f) {
    case ScoreFlag::UnknownRadiationDate: return "UnknownRadiationDate";
    case ScoreFlag::ZeroBaselineCompartment: return "ZeroBaselineCompartment";
    case ScoreFlag::MedicationConflict: return "MedicationConflict";
  }
  return "";
}

std::optional<ScoreFlag> score_flag_from_string(std::string_view s) noexcept {
  for (auto f : {ScoreFlag::UnknownRadiationDate, ScoreFlag::ZeroBaselineCompartment,
                 ScoreFlag::MedicationConflict}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

bool ScoreResult::has_flag(ScoreFlag f) const noexcept {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

RadiationWindow radiation_window_status(const std::optional<Date>& completion, Date followup,
                                        int window_days) {
  if (!completion) return {};
  const int days = completion->days_until(followup);
  if (days < 0) return {};
  return {days < window_days ? WindowStatus::Within90Days : WindowStatus::Beyond90Days, days};
}

bool medication_explains(Direction direction, const ClinicalVariables& vars) noexcept {
  using S = MedicationStatus;
  if (direction == Direction::Improvement) {
    return vars.bevacizumab_status != S::None || vars.steroid_status != S::None;
  }
  // Taper or withdrawal can unmask edema/enhancement.
  return vars.steroid_status == S::Recent || vars.bevacizumab_status == S::Recent;
}

namespace {

std::string describe(const PercentChange& c) {
  switch (c.kind) {
    case PercentChange::Kind::BothZero: return "0 -> 0";
    case PercentChange::Kind::NewFromZero: return "new from 0";
    case PercentChange::Kind::Value: break;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", c.percent);
  return buf;
}

std::string volumes_summary(const VolumetricChange& v) {
  return "flair " + describe(v.flair_change) + " (" + std::string(to_string(v.flair_trend)) +
         "), enh " + describe(v.enh_change) + " (" + std::string(to_string(v.enh_trend)) + ")";
}

std::string meds_summary(const ClinicalVariables& vars) {
  return "steroid " + std::string(to_string(vars.steroid_status)) + ", bevacizumab " +
         std::string(to_string(vars.bevacizumab_status));
}

std::string window_summary(const RadiationWindow& w) {
  std::string s = "radiation window " + std::string(to_string(w.status));
  if (w.days_since) s += " (" + std::to_string(*w.days_since) + " d)";
  return s;
}

class TraceBuilder {
 public:
  void miss(std::string rule, std::string inputs) {
    steps_.push_back({std::move(rule), std::move(inputs), std::string(kNoMatch)});
  }
  void pass(std::string rule, std::string inputs) {
    steps_.push_back({std::move(rule), std::move(inputs), std::string(kMatch)});
  }
  Category terminal(std::string rule, std::string inputs, Category c) {
    steps_.push_back({std::move(rule), std::move(inputs), std::string(to_string(c))});
    return c;
  }
  std::vector<TraceStep> take() { return std::move(steps_); }

 private:
  std::vector<TraceStep> steps_;
};

}  // namespace

ScoreResult score_case(const std::optional<VolumetricChange>& vol, const ClinicalVariables& vars,
                       const RadiationWindow& window, bool baseline_present,
                       const ScorerPolicy& policy) {
  ScoreResult result;
  TraceBuilder trace;

  if (!vars.conflicting_cues.empty()) result.flags.push_back(ScoreFlag::MedicationConflict);

  auto finish = [&](Category c) {
    result.category = c;
    result.trace = trace.take();
    std::sort(result.flags.begin(), result.flags.end());
    result.flags.erase(std::unique(result.flags.begin(), result.flags.end()), result.flags.end());
    return result;
  };

  if (!baseline_present) {
    return finish(trace.terminal("R0", "no baseline examination", Category::BT0));
  }
  trace.miss("R0", "baseline present");
  if (!vol) throw std::logic_error("score_case: baseline present but no volumetrics");

  const VolumetricChange& v = *vol;
  if (!v.flair_change.is_value() || !v.enh_change.is_value()) {
    result.flags.push_back(ScoreFlag::ZeroBaselineCompartment);
  }
  RadiationWindow effective = window;
  if (window.status == WindowStatus::Unknown) {
    result.flags.push_back(ScoreFlag::UnknownRadiationDate);
    effective.status = WindowStatus::Beyond90Days;
  }

  const std::string vs = volumes_summary(v);
  if (v.flair_trend == Trend::Stable && v.enh_trend == Trend::Stable) {
    return finish(trace.terminal("R1", vs, Category::BT2));
  }
  trace.miss("R1", vs);

  const bool any_improved = v.flair_trend == Trend::Improved || v.enh_trend == Trend::Improved;
  const bool any_worse = is_worsening(v.flair_trend) || is_worsening(v.enh_trend);

  if (any_improved && !any_worse) {
    const bool explained = medication_explains(Direction::Improvement, vars);
    return finish(trace.terminal(
        "R2", vs + "; " + meds_summary(vars) + "; medication explains improvement: " +
                  (explained ? "yes" : "no"),
        explained ? Category::BT1b : Category::BT1a));
  }
  trace.miss("R2", vs);

  if (!any_worse) throw std::logic_error("score_case: no rule matched");
  trace.pass("R3", vs);

  std::string ws = window_summary(window);
  if (window.status == WindowStatus::Unknown) ws += ", treated as beyond";
  if (effective.status == WindowStatus::Within90Days) {
    return finish(trace.terminal("R3a", ws, Category::BT3a));
  }
  trace.miss("R3a", ws);

  const std::string ms = meds_summary(vars);
  if (medication_explains(Direction::Worsening, vars)) {
    return finish(trace.terminal("R3b", ms + "; medication explains worsening: yes", Category::BT3a));
  }
  trace.miss("R3b", ms + "; medication explains worsening: no");

  const bool flair_worse = is_worsening(v.flair_trend);
  const bool enh_worse = is_worsening(v.enh_trend);
  const bool any_major = v.flair_trend == Trend::MajorWorse || v.enh_trend == Trend::MajorWorse;

  if (flair_worse && enh_worse && any_major) {
    return finish(trace.terminal("R3c", vs, Category::BT4));
  }
  trace.miss("R3c", vs);

  const bool priority_applies =
      enh_worse && (policy.enhancement_priority || v.flair_trend != Trend::Improved);
  if (priority_applies) {
    return finish(trace.terminal(
        "R3d", vs + (policy.enhancement_priority ? "; enhancement priority" : ""), Category::BT3c));
  }
  trace.miss("R3d", vs);

  if (flair_worse && !enh_worse) {
    return finish(trace.terminal("R3e", vs, Category::BT3b));
  }
  trace.miss("R3e", vs);

  if (!policy.enhancement_priority && enh_worse && v.flair_trend == Trend::Improved) {
    return finish(trace.terminal("R3f", vs + "; discordant trends", Category::BT3b));
  }
  throw std::logic_error("score_case: worsening input reached no terminal rule");
}

}  // namespace btrads
