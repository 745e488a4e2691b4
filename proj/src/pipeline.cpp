#include "btrads/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace btrads {

std::string_view to_string(ConflictKind k) noexcept {
  switch (k) {
    case ConflictKind::RadiationAfterFollowup: return "RadiationAfterFollowup";
    case ConflictKind::MedicationTextConflict: return "MedicationTextConflict";
    case ConflictKind::ZeroBaselineCompartment: return "ZeroBaselineCompartment";
    case ConflictKind::QcExcluded: return "QcExcluded";
  }
  return "";
}

std::optional<ConflictKind> conflict_kind_from_string(std::string_view s) noexcept {
  for (auto k : {ConflictKind::RadiationAfterFollowup, ConflictKind::MedicationTextConflict,
                 ConflictKind::ZeroBaselineCompartment, ConflictKind::QcExcluded}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string_view to_string(CaseStatus s) noexcept {
  switch (s) {
    case CaseStatus::Scored: return "scored";
    case CaseStatus::Failed: return "failed";
    case CaseStatus::Excluded: return "excluded";
  }
  return "";
}

std::string_view to_string(ExclusionReason r) noexcept {
  switch (r) {
    case ExclusionReason::NoBaseline: return "no_baseline";
    case ExclusionReason::BaselineIntervalExceeded: return "baseline_interval_exceeded";
    case ExclusionReason::QcFailed: return "qc_failed";
  }
  return "";
}

std::optional<CaseStatus> case_status_from_string(std::string_view s) noexcept {
  for (auto v : {CaseStatus::Scored, CaseStatus::Failed, CaseStatus::Excluded}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<ExclusionReason> exclusion_reason_from_string(std::string_view s) noexcept {
  for (auto v : {ExclusionReason::NoBaseline, ExclusionReason::BaselineIntervalExceeded,
                 ExclusionReason::QcFailed}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> known,
                         const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::ConfigError, "unknown configuration key '" + where + key + "'");
    }
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, "configuration key '" + where + key + "' has the wrong type");
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "configuration must be a JSON object");
  reject_unknown_keys(j, {"backend", "llm", "eligibility", "thresholds", "scorer", "volumetrics_table"}, "");
  PipelineConfig c;
  if (j.contains("backend")) {
    const auto b = j["backend"].is_string() ? j["backend"].get<std::string>() : std::string();
    if (b == "patterns") {
      c.backend.kind = BackendKind::PatternRules;
    } else if (b == "llm") {
      c.backend.kind = BackendKind::RemoteLlm;
    } else {
      throw Error(ErrorCode::ConfigError, "backend must be \"patterns\" or \"llm\"");
    }
  }
  if (j.contains("llm")) {
    const json& l = j["llm"];
    reject_unknown_keys(l, {"endpoint_url", "model_name", "api_key_env", "temperature", "max_retries", "timeout_seconds"}, "llm.");
    read_opt(l, "endpoint_url", c.backend.endpoint_url, "llm.");
    read_opt(l, "model_name", c.backend.model_name, "llm.");
    read_opt(l, "temperature", c.backend.temperature, "llm.");
    read_opt(l, "max_retries", c.backend.max_retries, "llm.");
    int timeout = static_cast<int>(c.backend.timeout.count());
    read_opt(l, "timeout_seconds", timeout, "llm.");
    c.backend.timeout = std::chrono::seconds(timeout);
    std::string key_env;
    read_opt(l, "api_key_env", key_env, "llm.");
    if (!key_env.empty()) {
      if (const char* v = std::getenv(key_env.c_str())) c.backend.api_key = v;
    }
  }
  if (j.contains("eligibility")) {
    const json& e = j["eligibility"];
    reject_unknown_keys(e, {"exclude_no_baseline", "max_baseline_interval_days"}, "eligibility.");
    read_opt(e, "exclude_no_baseline", c.eligibility.exclude_no_baseline, "eligibility.");
    read_opt(e, "max_baseline_interval_days", c.eligibility.max_baseline_interval_days, "eligibility.");
  }
  if (j.contains("thresholds")) {
    const json& t = j["thresholds"];
    reject_unknown_keys(t, {"stable_pct", "major_pct", "radiation_window_days"}, "thresholds.");
    read_opt(t, "stable_pct", c.thresholds.stable_pct, "thresholds.");
    read_opt(t, "major_pct", c.thresholds.major_pct, "thresholds.");
    read_opt(t, "radiation_window_days", c.radiation_window_days, "thresholds.");
    if (!(c.thresholds.stable_pct > 0.0 && c.thresholds.major_pct > c.thresholds.stable_pct) ||
        c.radiation_window_days <= 0) {
      throw Error(ErrorCode::ConfigError, "thresholds must satisfy 0 < stable_pct < major_pct and window > 0");
    }
  }
  if (j.contains("scorer")) {
    const json& s = j["scorer"];
    reject_unknown_keys(s, {"enhancement_priority"}, "scorer.");
    read_opt(s, "enhancement_priority", c.policy.enhancement_priority, "scorer.");
  }
  if (j.contains("volumetrics_table")) {
    std::string path;
    read_opt(j, "volumetrics_table", path, "");
    if (!path.empty()) c.volumetrics_table = path;
  }
  return c;
}

void apply_environment(PipelineConfig& config) {
  if (const char* v = std::getenv("BTRADS_LLM_ENDPOINT")) config.backend.endpoint_url = v;
  if (const char* v = std::getenv("BTRADS_LLM_MODEL")) config.backend.model_name = v;
  if (const char* v = std::getenv("BTRADS_LLM_API_KEY")) config.backend.api_key = v;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open configuration file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, "configuration file " + path + ": " + e.what());
  }
  PipelineConfig c = pipeline_config_from_json(j);
  if (c.volumetrics_table && std::filesystem::path(*c.volumetrics_table).is_relative()) {
    c.volumetrics_table =
        (std::filesystem::path(path).parent_path() / *c.volumetrics_table).string();
  }
  apply_environment(c);
  return c;
}

// ---------------------------------------------------------------------------

std::vector<ConflictFlag> cross_check(const ClinicalVariables& vars, const CaseRecord& c) {
  std::vector<ConflictFlag> out;
  if (vars.radiation_completion_date && *vars.radiation_completion_date > c.followup_date) {
    out.push_back({ConflictKind::RadiationAfterFollowup,
                   "extracted radiation completion " + vars.radiation_completion_date->iso() +
                       " is after follow-up " + c.followup_date.iso()});
  }
  for (Variable v : vars.conflicting_cues) {
    out.push_back({ConflictKind::MedicationTextConflict,
                   std::string(to_string(v)) + ": note carries contradictory status cues"});
  }
  if (c.has_baseline() && (c.baseline_flair_ml == 0.0 || c.baseline_enh_ml == 0.0)) {
    std::string which = c.baseline_flair_ml == 0.0 ? "flair" : "";
    if (c.baseline_enh_ml == 0.0) which += which.empty() ? "enhancement" : " and enhancement";
    out.push_back({ConflictKind::ZeroBaselineCompartment, "baseline " + which + " volume is 0"});
  }
  return out;
}

namespace {

void fill_label_outcomes(const CaseRecord& c, CaseReport& r) {
  r.reference_label = c.reference_label;
  r.initial_clinical_label = c.initial_clinical_label;
  r.adjudication = c.adjudication;
}

void fill_correctness(CaseReport& r) {
  if (!r.reference_label) return;
  r.correct_vs_reference = r.score.has_value() && r.reference_label->matches(r.score->category);
  if (r.initial_clinical_label) {
    auto initial = r.initial_clinical_label->category();
    r.initial_correct = initial.has_value() && r.reference_label->matches(*initial);
  }
}

}  // namespace

CaseReport run_case(const CaseRecord& c, const PipelineConfig& config, const Extractor& extractor) {
  CaseReport r;
  r.case_id = c.case_id;
  fill_label_outcomes(c, r);

  if (c.has_baseline()) r.volumetrics = compute_case_volumetrics(c, config.thresholds);

  try {
    r.variables = extractor.extract(c.note_text);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::TransportError:
      case ErrorCode::SchemaViolation:
      case ErrorCode::SpanVerificationFailure:
      case ErrorCode::ValidationError:
        r.status = CaseStatus::Failed;
        r.failure_reason = std::string(to_string(e.code())) + ": " + e.what();
        fill_correctness(r);
        return r;
      default:
        throw;
    }
  }

  r.conflicts = cross_check(r.variables, c);
  r.radiation_window = radiation_window_status(r.variables.radiation_completion_date,
                                               c.followup_date, config.radiation_window_days);
  r.score = score_case(r.volumetrics, r.variables, r.radiation_window, c.has_baseline(), config.policy);
  fill_correctness(r);
  return r;
}

std::optional<ExclusionReason> eligibility(const CaseRecord& c, const EligibilityRules& rules) {
  if (!c.has_baseline()) {
    if (rules.exclude_no_baseline) return ExclusionReason::NoBaseline;
  } else if (c.baseline_date &&
             c.baseline_date->days_until(c.followup_date) > rules.max_baseline_interval_days) {
    return ExclusionReason::BaselineIntervalExceeded;
  }
  if (!c.qc_pass) return ExclusionReason::QcFailed;
  return std::nullopt;
}

std::vector<CaseRecord> prepare_cases(std::span<const CaseRecord> dataset, const PipelineConfig& config) {
  std::vector<CaseRecord> cases(dataset.begin(), dataset.end());
  if (config.volumetrics_table) {
    std::ifstream in(*config.volumetrics_table);
    if (!in) throw Error(ErrorCode::IoError, "cannot open volumetrics table " + *config.volumetrics_table);
    apply_volumetrics_table(cases, read_volumetrics_table(in));
  }
  for (const auto& c : cases) check_case_invariants(c);
  return cases;
}

BatchRun run_batch(std::span<const CaseRecord> dataset, const PipelineConfig& config,
                   const Extractor& extractor) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyCohort, "dataset is empty");
  const std::vector<CaseRecord> cases = prepare_cases(dataset, config);

  BatchRun run;
  run.reports.resize(cases.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        const CaseRecord& c = cases[i];
        if (auto why = eligibility(c, config.eligibility)) {
          CaseReport r;
          r.case_id = c.case_id;
          r.status = CaseStatus::Excluded;
          r.exclusion = *why;
          fill_label_outcomes(c, r);
          if (*why == ExclusionReason::QcFailed) {
            r.conflicts.push_back({ConflictKind::QcExcluded, "segmentation quality review failed"});
          }
          run.reports[i] = std::move(r);
        } else {
          run.reports[i] = run_case(c, config, extractor);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_workers =
      config.backend.kind == BackendKind::RemoteLlm ? std::min(hw * 2, 16u) : std::min(hw, 8u);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  run.counts.input = run.reports.size();
  for (const auto& r : run.reports) {
    if (r.status == CaseStatus::Excluded) {
      ++run.counts.excluded;
    } else {
      ++run.counts.evaluable;
      if (r.status == CaseStatus::Failed) ++run.counts.failed;
    }
  }
  if (run.counts.evaluable == 0) throw Error(ErrorCode::EmptyCohort, "no evaluable cases after exclusions");
  return run;
}

ScoreResult rescore_case(const CaseRecord& c, const CaseReport& system_report,
                         const ClinicalVariables& edited, const PipelineConfig& config) {
  std::optional<VolumetricChange> vol = system_report.volumetrics;
  if (c.has_baseline() && !vol) vol = compute_case_volumetrics(c, config.thresholds);
  const auto window = radiation_window_status(edited.radiation_completion_date, c.followup_date,
                                              config.radiation_window_days);
  return score_case(vol, edited, window, c.has_baseline(), config.policy);
}

}  // namespace btrads
