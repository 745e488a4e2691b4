// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failing criteria. Optional argv[1] is the path of the btrads CLI, used
// for the end-to-end run; without it the same steps run in-process.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "btrads/evalstats.hpp"
#include "btrads/extractor.hpp"
#include "btrads/fixtures.hpp"
#include "btrads/json_io.hpp"
#include "btrads/pipeline.hpp"
#include "btrads/report.hpp"
#include "btrads/scorer.hpp"

using namespace btrads;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr double kIntervalTol = 0.0005;  // Wilson bounds, as proportions
constexpr double kChi2Tol = 0.01;
constexpr double kPercentTol = 0.05;     // percentage points, after rounding to 0.1
constexpr double kCeilingTol = 0.2;      // percentage points
constexpr double kWilsonBudgetMs = 1.0;
constexpr double kLatticeBudgetS = 1.0;
constexpr double kPipelineBudgetS = 30.0;

struct Check {
  bool ok = true;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes.push_back(what);
    }
  }
  void near(double got, double want, double tol, const std::string& what) {
    expect(std::fabs(got - want) <= tol, fmt::format("{} = {:.6f}, expected {} +- {}", what, got, want, tol));
  }
};

int failures = 0;

void report(const std::string& id, const std::string& title, const std::function<void(Check&)>& body) {
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.notes.push_back(std::string("exception: ") + e.what());
  }
  std::printf("%s  %-4s %s\n", c.ok ? "PASS" : "FAIL", id.c_str(), title.c_str());
  for (const auto& n : c.notes) std::printf("          %s\n", n.c_str());
  if (!c.ok) ++failures;
}

double pct1(double p) { return std::round(p * 1000.0) / 10.0; }

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void wilson(Check& c, std::uint64_t k, std::uint64_t n, double lo, double hi) {
  const auto ci = stats::wilson_ci(k, n, 0.95);
  c.near(ci.low, lo, kIntervalTol, fmt::format("wilson({},{}).low", k, n));
  c.near(ci.high, hi, kIntervalTol, fmt::format("wilson({},{}).high", k, n));
}

// Reference cohort with the volumetrics table joined, shared by several criteria.
const std::vector<CaseRecord>& cohort_cases() {
  static const std::vector<CaseRecord> cases = [] {
    auto set = generate_reference_cohort();
    apply_volumetrics_table(set.cases, set.volumetrics);
    return set.cases;
  }();
  return cases;
}

const std::vector<CaseReport>& cohort_reports() {
  static const std::vector<CaseReport> reports = [] {
    const PipelineConfig config;
    return run_batch(cohort_cases(), config, Extractor(config.backend)).reports;
  }();
  return reports;
}

ClinicalVariables meds(MedicationStatus steroid, MedicationStatus bev) {
  ClinicalVariables v;
  v.steroid_status = steroid;
  v.bevacizumab_status = bev;
  return v;
}

VolumetricChange change_of(double flair_pct, double enh_pct) {
  VolumetricChange v;
  v.flair_change = PercentChange::value(flair_pct);
  v.enh_change = PercentChange::value(enh_pct);
  v.flair_trend = classify_trend(v.flair_change);
  v.enh_trend = classify_trend(v.enh_change);
  return v;
}

// Decision table stated independently of the scorer.
Category table_oracle(double f, double e, const ClinicalVariables& v, WindowStatus w) {
  auto trend = [](double p) { return p < -20 ? 0 : p <= 20 ? 1 : p <= 40 ? 2 : 3; };
  const int tf = trend(f), te = trend(e);
  const bool on_any = v.steroid_status != MedicationStatus::None || v.bevacizumab_status != MedicationStatus::None;
  const bool recent = v.steroid_status == MedicationStatus::Recent || v.bevacizumab_status == MedicationStatus::Recent;
  if (tf == 1 && te == 1) return Category::BT2;
  if (tf < 2 && te < 2) return on_any ? Category::BT1b : Category::BT1a;
  if (w == WindowStatus::Within90Days || recent) return Category::BT3a;
  if (tf >= 2 && te >= 2 && (tf == 3 || te == 3)) return Category::BT4;
  if (te >= 2) return Category::BT3c;
  return Category::BT3b;
}

std::string run_command(const std::string& cmd, int& status) {
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) {
    status = -1;
    return out;
  }
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) out += buf.data();
  status = pclose(p);
  return out;
}

std::string tables_in_process(const std::filesystem::path& dir) {
  const auto config = load_pipeline_config((dir / "config.json").string());
  const auto cases = read_cases_file((dir / "cases.jsonl").string());
  const auto run = run_batch(cases, config, Extractor(config.backend));
  {
    std::ofstream out(dir / "reports.jsonl");
    write_reports(out, run.reports);
  }
  const auto reports = read_reports_file((dir / "reports.jsonl").string());
  return render_tables(evaluate_reports(reports));
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  report("A1", "Wilson intervals for overall accuracy", [](Check& c) {
    wilson(c, 374, 492, 0.721, 0.796);
    wilson(c, 283, 492, 0.531, 0.618);
    const auto t0 = Clock::now();
    for (int i = 0; i < 1000; ++i) (void)stats::wilson_ci(374, 492, 0.95);
    const double per_call = ms_since(t0) / 1000.0;
    c.expect(per_call < kWilsonBudgetMs, fmt::format("wilson_ci took {:.4f} ms", per_call));
  });

  report("A2", "Wilson intervals for per-category sensitivity", [](Check& c) {
    wilson(c, 51, 55, 0.827, 0.971);
    wilson(c, 51, 51, 0.930, 1.000);
  });

  report("A3", "McNemar test on discordant pairs", [](Check& c) {
    const auto r = stats::mcnemar_test(187, 96);
    c.near(r.chi2, 28.62, kChi2Tol, "chi2");
    c.expect(r.p < 0.001, fmt::format("p = {}", r.p));
  });

  report("A4", "One-vs-all diagnostics for BT-4", [](Check& c) {
    const auto d = stats::diagnostic_metrics(52, 4, 23, 413);
    c.near(pct1(d.sensitivity), 69.3, kPercentTol, "sensitivity %");
    c.near(pct1(d.specificity), 99.0, kPercentTol, "specificity %");
    c.near(pct1(d.ppv), 92.9, kPercentTol, "PPV %");
    c.near(pct1(d.npv), 94.7, kPercentTol, "NPV %");
    c.near(std::round(d.lr_neg * 100.0) / 100.0, 0.31, 0.005, "LR-");
  });

  report("A5", "Error attribution percentages", [](Check& c) {
    std::vector<ErrorCause> causes;
    causes.insert(causes.end(), 52, ErrorCause::ThresholdBoundary);
    causes.insert(causes.end(), 34, ErrorCause::ExtractionError);
    causes.insert(causes.end(), 18, ErrorCause::AlgorithmLimitation);
    causes.insert(causes.end(), 14, ErrorCause::GroundTruthAmbiguity);
    const auto a = stats::error_attribution_summary(causes);
    const double want[] = {44.1, 28.8, 15.3, 11.9};
    for (std::size_t i = 0; i < 4; ++i) {
      c.near(std::round(a.causes[i].percent * 10.0) / 10.0, want[i], kPercentTol,
             std::string(to_string(a.causes[i].cause)) + " %");
    }
  });

  report("A6", "Performance ceiling", [](Check& c) {
    std::vector<stats::CaseOutcome> outcomes(492);
    const auto t = stats::ceiling_analysis(outcomes, 3);
    c.near(pct1(t.theoretical_max), 99.4, kPercentTol, "theoretical max %");

    std::vector<stats::CaseOutcome> fixture;
    for (const auto& r : cohort_reports()) {
      if (!r.evaluable()) continue;
      stats::CaseOutcome o;
      o.correct = r.correct_vs_reference.value_or(false);
      if (r.adjudication) {
        o.fixed_by_extraction = r.adjudication->correct_if_perfect_extraction;
        o.fixed_by_algorithm = r.adjudication->correct_if_perfect_algorithm;
        o.fixed_by_both = r.adjudication->correct_if_perfect_both;
      }
      fixture.push_back(o);
    }
    std::uint64_t nonstandard = 0;
    for (const auto& r : cohort_reports()) {
      if (r.evaluable() && r.reference_label && !r.reference_label->is_standard()) ++nonstandard;
    }
    const auto f = stats::ceiling_analysis(fixture, nonstandard);
    c.expect(f.n == 492, fmt::format("fixture N = {}", f.n));
    c.near(f.perfect_extraction * 100.0, 78.5, kCeilingTol, "perfect extraction %");
    c.near(f.perfect_algorithm * 100.0, 82.8, kCeilingTol, "perfect algorithm %");
    c.near(f.perfect_both * 100.0, 88.1, kCeilingTol, "perfect both %");
  });

  report("A7", "Concordance quadrants on the fixture cohort", [](Check& c) {
    std::vector<char> sys, ini;
    for (const auto& r : cohort_reports()) {
      if (!r.evaluable()) continue;
      sys.push_back(r.correct_vs_reference.value_or(false));
      ini.push_back(r.initial_correct.value_or(false));
    }
    std::unique_ptr<bool[]> s(new bool[sys.size()]), i(new bool[ini.size()]);
    for (std::size_t k = 0; k < sys.size(); ++k) {
      s[k] = sys[k];
      i[k] = ini[k];
    }
    const auto q = stats::concordance_quadrants({s.get(), sys.size()}, {i.get(), ini.size()});
    c.expect(q == stats::Quadrants{187, 187, 96, 22},
             fmt::format("quadrants = ({}, {}, {}, {})", q.both, q.system_only, q.initial_only, q.neither));
    const double n = static_cast<double>(q.total());
    c.near(pct1((q.both + q.system_only) / n), 76.0, kPercentTol, "system accuracy %");
    c.near(pct1((q.both + q.initial_only) / n), 57.5, kPercentTol, "initial accuracy %");
  });

  report("A8", "Scorer reference cases and exhaustive decision-table lattice", [](Check& c) {
    const RadiationWindow beyond{WindowStatus::Beyond90Days, 200};
    const auto none = meds(MedicationStatus::None, MedicationStatus::None);
    c.expect(score_case(change_of(-35, -60), meds(MedicationStatus::None, MedicationStatus::Active), beyond, true)
                     .category == Category::BT1b,
             "improvement under bevacizumab is not BT-1b");
    c.expect(score_case(change_of(5, -8), none, beyond, true).category == Category::BT2, "stable case is not BT-2");
    c.expect(score_case(change_of(231, 187), none, beyond, true).category == Category::BT4,
             "marked progression is not BT-4");

    const double deltas[] = {-50, -21, -20, 0, 20, 21, 40, 41, 200};
    const WindowStatus windows[] = {WindowStatus::Within90Days, WindowStatus::Beyond90Days, WindowStatus::Unknown};
    const MedicationStatus statuses[] = {MedicationStatus::None, MedicationStatus::Active, MedicationStatus::Recent};
    std::size_t mismatches = 0, n = 0;
    std::array<bool, 8> seen{};
    const auto t0 = Clock::now();
    for (double f : deltas) {
      for (double e : deltas) {
        for (auto w : windows) {
          for (auto s : statuses) {
            for (auto b : statuses) {
              const auto v = meds(s, b);
              const RadiationWindow rw{w, w == WindowStatus::Unknown ? std::nullopt : std::optional<int>(60)};
              const auto got = score_case(change_of(f, e), v, rw, true).category;
              if (got != table_oracle(f, e, v, w)) ++mismatches;
              seen[static_cast<std::size_t>(got)] = true;
              ++n;
            }
          }
        }
      }
    }
    const double seconds = ms_since(t0) / 1000.0;
    c.expect(mismatches == 0, fmt::format("{} of {} lattice points disagree", mismatches, n));
    for (Category cat : kFollowupCategories) {
      c.expect(seen[static_cast<std::size_t>(cat)], std::string("terminal never reached: ") + std::string(to_string(cat)));
    }
    c.expect(seconds < kLatticeBudgetS, fmt::format("lattice took {:.3f} s", seconds));
  });

  report("A9", "Property suites", [](Check& c) {
    std::mt19937_64 rng(20240509);
    // Span fuzzing.
    const std::string pool =
        "Continues dexamethasone 4 mg daily. Completed chemoradiation on 2023-05-10. Bevacizumab held. "
        "No new deficits. Avastin restarted. Steroids tapered off.";
    std::size_t false_accepts = 0;
    for (int i = 0; i < 10000; ++i) {
      const std::size_t a = rng() % (pool.size() - 20);
      const std::size_t len = 5 + rng() % 15;
      const std::string note = pool.substr(0, a + len + rng() % 10);
      std::string text = note.substr(a, len);
      std::size_t start = a, end = a + len;
      switch (rng() % 4) {
        case 0: break;
        case 1: text[rng() % text.size()] ^= 0x01; break;
        case 2: ++start; break;
        case 3: end = note.size() + 1; break;
      }
      const bool exact = end <= note.size() && start < end && note.compare(start, end - start, text) == 0 &&
                         end - start == text.size();
      const json reply = {
          {"steroid_status", {{"value", "active"}, {"evidence", {{"start", start}, {"end", end}, {"text", text}}}}},
          {"bevacizumab_status", {{"value", "none"}, {"evidence", nullptr}}},
          {"radiation_completion_date", {{"value", nullptr}, {"evidence", nullptr}}}};
      if (!exact && validate_llm_reply(reply.dump(), note).ok()) ++false_accepts;
    }
    c.expect(false_accepts == 0, fmt::format("{} corrupted spans accepted", false_accepts));

    // Kappa bounds and two-category equivalence.
    std::size_t kappa_bad = 0;
    for (int i = 0; i < 1000; ++i) {
      const std::size_t k = 2 + rng() % 7;
      std::vector<std::vector<std::uint64_t>> rows(k, std::vector<std::uint64_t>(k));
      for (auto& r : rows) {
        for (auto& x : r) x = rng() % 30;
      }
      std::vector<std::string> labels;
      std::vector<double> ranks;
      for (std::size_t j = 0; j < k; ++j) {
        labels.push_back(std::to_string(j));
        ranks.push_back(static_cast<double>(j));
      }
      const stats::ConfusionMatrix m(labels, rows);
      try {
        const double u = stats::cohen_kappa(m);
        const double w = stats::weighted_kappa_quadratic(m, ranks);
        if (u < -1 - 1e-12 || u > 1 + 1e-12 || w < -1 - 1e-12 || w > 1 + 1e-12) ++kappa_bad;
        if (k == 2 && std::fabs(u - w) > 1e-12) ++kappa_bad;
      } catch (const Error&) {
      }
    }
    c.expect(kappa_bad == 0, fmt::format("{} kappa property violations", kappa_bad));

    // Scorer determinism and totality.
    std::uniform_real_distribution<double> vol(0.0, 60.0);
    std::size_t scorer_bad = 0;
    for (int i = 0; i < 10000; ++i) {
      CaseRecord r;
      r.baseline_exam_id = "b";
      r.baseline_flair_ml = rng() % 10 == 0 ? 0.0 : vol(rng);
      r.followup_flair_ml = vol(rng);
      r.baseline_enh_ml = rng() % 10 == 0 ? 0.0 : vol(rng);
      r.followup_enh_ml = vol(rng);
      const auto ch = compute_case_volumetrics(r);
      const MedicationStatus st[] = {MedicationStatus::None, MedicationStatus::Active, MedicationStatus::Recent};
      const auto v = meds(st[rng() % 3], st[rng() % 3]);
      const RadiationWindow w{rng() % 2 ? WindowStatus::Within90Days : WindowStatus::Beyond90Days, 30};
      const auto a = score_case(ch, v, w, true);
      if (!(a == score_case(ch, v, w, true)) || a.trace.empty() || a.category == Category::BT0) ++scorer_bad;
    }
    c.expect(scorer_bad == 0, fmt::format("{} scorer determinism or totality violations", scorer_bad));

    // Batch idempotence.
    const PipelineConfig config;
    const Extractor extractor(config.backend);
    std::stringstream first, second;
    write_reports(first, run_batch(cohort_cases(), config, extractor).reports);
    write_reports(second, run_batch(cohort_cases(), config, extractor).reports);
    c.expect(first.str() == second.str(), "two batch runs differ");
  });

  report("A10", "End-to-end pipeline on the fixture cohort", [&cli](Check& c) {
    const auto dir = std::filesystem::temp_directory_path() / "btrads_acceptance";
    std::filesystem::remove_all(dir);
    const auto t0 = Clock::now();
    std::string tables;
    if (!cli.empty()) {
      int status = 0;
      const std::string q = "'" + dir.string() + "'";
      run_command("'" + cli + "' fixtures generate --profile reference --out " + q, status);
      c.expect(status == 0, "fixtures generate failed");
      run_command("'" + cli + "' score --cases " + q + "/cases.jsonl --config " + q + "/config.json --out " + q +
                      "/reports.jsonl",
                  status);
      c.expect(status == 0, "score failed");
      tables = run_command("'" + cli + "' evaluate --reports " + q + "/reports.jsonl", status);
      c.expect(status == 0, "evaluate failed");
    } else {
      write_fixture_set(generate_reference_cohort(), dir);
      tables = tables_in_process(dir);
    }
    const double seconds = ms_since(t0) / 1000.0;
    c.expect(seconds < kPipelineBudgetS, fmt::format("pipeline took {:.2f} s", seconds));

    const char* const expected[] = {
        "System                  374/492     76.0%  72.1%-79.6%",
        "Initial clinical        283/492     57.5%  53.1%-61.8%",
        "chi2 = 28.62, p = <.001",
        "both 187 (38.0%), system only 187 (38.0%), initial only 96 (19.5%), neither 22 (4.5%)",
        "BT-1a    Context-dependent          55       51        92.7%  82.7%-97.1%",
        "BT-1b    Context-dependent          51       51       100.0%  93.0%-100.0%",
        "BT-4          75        69.3%        99.0%    92.9%    94.7%     69.3   0.31",
        "Perfect extraction                   78.5%",
        "Perfect algorithm                    82.7%",
        "Perfect extraction + algorithm       88.0%",
        "Theoretical maximum                  99.4%",
        "threshold_boundary                  52    44.1%",
        "extraction_error                    34    28.8%",
        "algorithm_limitation                18    15.3%",
        "ground_truth_ambiguity              14    11.9%",
    };
    for (const char* line : expected) {
      c.expect(tables.find(line) != std::string::npos, std::string("missing table line: ") + line);
    }
    std::printf("          %.2f s end to end (%s)\n", seconds, cli.empty() ? "in-process" : "CLI");
  });

  std::printf("%d criteria failed\n", failures);
  return failures;
}
