#include "btrads/btrads.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "btrads/evalstats.hpp"
#include "btrads/fixtures.hpp"
#include "btrads/json_io.hpp"
#include "btrads/pipeline.hpp"
#include "btrads/report.hpp"
#include "btrads/service.hpp"
#include "btrads/store.hpp"

struct btrads_config {
  btrads::PipelineConfig config;
};

struct btrads_store {
  std::shared_ptr<btrads::CaseStore> store;
};

struct btrads_service {
  std::unique_ptr<btrads::ReviewService> service;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

btrads_status status_for(btrads::ErrorCode code) {
  using btrads::ErrorCode;
  switch (code) {
    case ErrorCode::ConfigError: return BTRADS_E_USAGE;
    case ErrorCode::TransportError:
    case ErrorCode::SchemaViolation:
    case ErrorCode::SpanVerificationFailure: return BTRADS_E_TRANSPORT;
    case ErrorCode::NotFound: return BTRADS_E_NOT_FOUND;
    case ErrorCode::IoError: return BTRADS_E_IO;
    case ErrorCode::InvalidVolume:
    case ErrorCode::InvalidDate:
    case ErrorCode::DomainError:
    case ErrorCode::ValidationError:
    case ErrorCode::EmptyCohort:
    case ErrorCode::ParseError: return BTRADS_E_VALIDATION;
  }
  return BTRADS_E_INTERNAL;
}

btrads_status fail(btrads_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

template <typename F>
btrads_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const btrads::Error& e) {
    return fail(status_for(e.code()), std::string(btrads::to_string(e.code())) + ": " + e.what());
  } catch (const json::exception& e) {
    return fail(BTRADS_E_VALIDATION, std::string("ParseError: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(BTRADS_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BTRADS_E_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

json parse(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw btrads::Error(btrads::ErrorCode::ValidationError, std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw btrads::Error(btrads::ErrorCode::IoError, "cannot write " + path);
  return out;
}

json counts_json(const btrads::BatchCounts& c) {
  return {{"input", c.input}, {"evaluable", c.evaluable}, {"excluded", c.excluded}, {"failed", c.failed}};
}

btrads::CaseReport excluded_report(const btrads::CaseRecord& c, btrads::ExclusionReason reason) {
  btrads::CaseReport r;
  r.case_id = c.case_id;
  r.status = btrads::CaseStatus::Excluded;
  r.exclusion = reason;
  r.reference_label = c.reference_label;
  r.initial_clinical_label = c.initial_clinical_label;
  r.adjudication = c.adjudication;
  return r;
}

}  // namespace

extern "C" {

const char* btrads_version(void) { return "1.0.0"; }

const char* btrads_last_error(void) { return g_last_error.c_str(); }

const char* btrads_status_name(btrads_status status) {
  switch (status) {
    case BTRADS_OK: return "ok";
    case BTRADS_E_USAGE: return "usage";
    case BTRADS_E_VALIDATION: return "validation";
    case BTRADS_E_TRANSPORT: return "transport";
    case BTRADS_E_NOT_FOUND: return "not_found";
    case BTRADS_E_IO: return "io";
    case BTRADS_E_INTERNAL: return "internal";
  }
  return "unknown";
}

void btrads_free_string(char* s) { std::free(s); }

btrads_status btrads_config_default(btrads_config** out) {
  return guarded([&] {
    if (!out) return fail(BTRADS_E_USAGE, "out is null");
    auto c = std::make_unique<btrads_config>();
    btrads::apply_environment(c->config);
    *out = c.release();
    return BTRADS_OK;
  });
}

btrads_status btrads_config_load(const char* path, btrads_config** out) {
  return guarded([&] {
    if (!path || !out) return fail(BTRADS_E_USAGE, "path and out are required");
    auto c = std::make_unique<btrads_config>();
    c->config = btrads::load_pipeline_config(path);
    *out = c.release();
    return BTRADS_OK;
  });
}

btrads_status btrads_config_set_backend(btrads_config* config, const char* backend) {
  return guarded([&] {
    if (!config || !backend) return fail(BTRADS_E_USAGE, "config and backend are required");
    const std::string b = backend;
    if (b == "patterns") {
      config->config.backend.kind = btrads::BackendKind::PatternRules;
    } else if (b == "llm") {
      config->config.backend.kind = btrads::BackendKind::RemoteLlm;
      btrads::check_backend_config(config->config.backend);
    } else {
      return fail(BTRADS_E_USAGE, "backend must be 'patterns' or 'llm'");
    }
    return BTRADS_OK;
  });
}

void btrads_config_free(btrads_config* config) { delete config; }

btrads_status btrads_score_file(const btrads_config* config, const char* cases_path, const char* out_path,
                                const char* store_dir, char** summary_json) {
  return guarded([&] {
    if (!config || !cases_path || !out_path) return fail(BTRADS_E_USAGE, "config, cases and out are required");
    const auto cases = btrads::read_cases_file(cases_path);
    btrads::Extractor extractor(config->config.backend);
    const btrads::BatchRun run = btrads::run_batch(cases, config->config, extractor);
    {
      auto out = open_out(out_path);
      btrads::write_reports(out, run.reports);
      if (!out.flush()) throw btrads::Error(btrads::ErrorCode::IoError, std::string("cannot write ") + out_path);
    }
    if (store_dir) {
      btrads::CaseStore store(store_dir);
      const auto joined = btrads::prepare_cases(cases, config->config);
      for (std::size_t i = 0; i < joined.size(); ++i) store.put_scored(joined[i], run.reports[i]);
    }
    put(summary_json, counts_json(run.counts).dump());
    return BTRADS_OK;
  });
}

btrads_status btrads_evaluate_file(const char* reports_path, const char* out_json_path, char** tables) {
  return guarded([&] {
    if (!reports_path) return fail(BTRADS_E_USAGE, "reports path is required");
    const auto reports = btrads::read_reports_file(reports_path);
    const auto eval = btrads::evaluate_reports(reports);
    if (out_json_path) {
      auto out = open_out(out_json_path);
      out << btrads::evaluation_to_json(eval).dump(2) << '\n';
    }
    put(tables, btrads::render_tables(eval));
    return BTRADS_OK;
  });
}

btrads_status btrads_extract(const btrads_config* config, const char* note, char** variables_json) {
  return guarded([&] {
    if (!config || !note) return fail(BTRADS_E_USAGE, "config and note are required");
    btrads::Extractor extractor(config->config.backend);
    put(variables_json, btrads::variables_to_json(extractor.extract(note)).dump());
    return BTRADS_OK;
  });
}

btrads_status btrads_score_case_json(const btrads_config* config, const char* case_json, char** report_json) {
  return guarded([&] {
    if (!config || !case_json) return fail(BTRADS_E_USAGE, "config and case are required");
    const btrads::CaseRecord c = btrads::case_from_json(parse(case_json, "case"));
    btrads::CaseReport report;
    if (auto reason = btrads::eligibility(c, config->config.eligibility)) {
      report = excluded_report(c, *reason);
    } else {
      btrads::Extractor extractor(config->config.backend);
      report = btrads::run_case(c, config->config, extractor);
    }
    put(report_json, btrads::report_to_json(report).dump());
    return BTRADS_OK;
  });
}

btrads_status btrads_fixtures_generate(const char* profile, uint64_t seed, const char* out_dir) {
  return guarded([&] {
    if (!profile || !out_dir) return fail(BTRADS_E_USAGE, "profile and out_dir are required");
    if (std::string(profile) != "reference") return fail(BTRADS_E_USAGE, "unknown profile (available: reference)");
    btrads::write_fixture_set(btrads::generate_reference_cohort(seed), out_dir);
    return BTRADS_OK;
  });
}

btrads_status btrads_store_open(const char* dir, btrads_store** out) {
  return guarded([&] {
    if (!dir || !out) return fail(BTRADS_E_USAGE, "dir and out are required");
    auto s = std::make_unique<btrads_store>();
    s->store = std::make_shared<btrads::CaseStore>(dir);
    *out = s.release();
    return BTRADS_OK;
  });
}

void btrads_store_close(btrads_store* store) { delete store; }

btrads_status btrads_store_size(const btrads_store* store, size_t* out) {
  return guarded([&] {
    if (!store || !out) return fail(BTRADS_E_USAGE, "store and out are required");
    *out = store->store->ids().size();
    return BTRADS_OK;
  });
}

btrads_status btrads_store_get(const btrads_store* store, const char* case_id, char** case_json) {
  return guarded([&] {
    if (!store || !case_id) return fail(BTRADS_E_USAGE, "store and case_id are required");
    const btrads::StoredCase c = store->store->get(case_id);
    const json j = {{"case", btrads::case_to_json(c.record)},
                    {"report", btrads::report_to_json(c.system)},
                    {"reviewer", btrads::reviewer_state_to_json(c.reviewer)}};
    put(case_json, j.dump());
    return BTRADS_OK;
  });
}

btrads_status btrads_store_rescore(btrads_store* store, const btrads_config* config, const char* case_id,
                                   const char* edited_json, char** outcome_json) {
  return guarded([&] {
    if (!store || !config || !case_id || !edited_json) {
      return fail(BTRADS_E_USAGE, "store, config, case_id and edits are required");
    }
    const auto edited = btrads::variables_from_json(parse(edited_json, "edited variables"), true);
    const btrads::RescoreOutcome r = store->store->rescore_with_edits(case_id, edited, config->config);
    json asserted = json::array();
    for (auto v : r.reviewer_asserted) asserted.push_back(btrads::to_string(v));
    const json j = {{"score", btrads::score_to_json(r.score)},
                    {"system_category", btrads::to_string(r.system_category)},
                    {"category_changed", r.category_changed},
                    {"first_divergent_rule", r.first_divergent_rule ? json(*r.first_divergent_rule) : json(nullptr)},
                    {"reviewer_asserted", asserted},
                    {"audit_event", btrads::audit_event_to_json(r.event)}};
    put(outcome_json, j.dump());
    return BTRADS_OK;
  });
}

btrads_status btrads_store_override(btrads_store* store, const char* case_id, const char* variables_json,
                                    const char* category, const char* reason, char** event_json) {
  return guarded([&] {
    if (!store || !case_id || !reason) return fail(BTRADS_E_USAGE, "store, case_id and reason are required");
    std::optional<btrads::ClinicalVariables> vars;
    if (variables_json) vars = btrads::variables_from_json(parse(variables_json, "variables"), true);
    std::optional<btrads::Category> cat;
    if (category) {
      cat = btrads::parse_btrads_label(category).category();
      if (!cat) return fail(BTRADS_E_VALIDATION, "category is not a standard BT-RADS category");
    }
    const auto e = store->store->record_override(case_id, vars, cat, reason);
    put(event_json, btrads::audit_event_to_json(e).dump());
    return BTRADS_OK;
  });
}

btrads_status btrads_store_audit(const btrads_store* store, char** events_json) {
  return guarded([&] {
    if (!store) return fail(BTRADS_E_USAGE, "store is required");
    json arr = json::array();
    for (const auto& e : store->store->audit_log()) arr.push_back(btrads::audit_event_to_json(e));
    put(events_json, arr.dump());
    return BTRADS_OK;
  });
}

btrads_status btrads_service_start(btrads_store* store, const btrads_config* config, const char* host, int port,
                                   const char* token, btrads_service** out) {
  return guarded([&] {
    if (!store || !config || !out) return fail(BTRADS_E_USAGE, "store, config and out are required");
    if (port < 0 || port > 65535) return fail(BTRADS_E_USAGE, "port out of range");
    btrads::ServiceOptions options;
    if (host) options.host = host;
    options.port = port;
    if (token && *token) options.token = token;
    auto s = std::make_unique<btrads_service>();
    s->service = std::make_unique<btrads::ReviewService>(store->store, config->config, options);
    s->service->start();
    *out = s.release();
    return BTRADS_OK;
  });
}

int btrads_service_port(const btrads_service* service) { return service ? service->service->port() : -1; }

void btrads_service_wait(btrads_service* service) {
  if (service) service->service->wait();
}

void btrads_service_stop(btrads_service* service) {
  if (service) service->service->stop();
}

void btrads_service_free(btrads_service* service) { delete service; }

btrads_status btrads_wilson_ci(uint64_t successes, uint64_t n, double level, double* low, double* high) {
  return guarded([&] {
    if (!low || !high) return fail(BTRADS_E_USAGE, "low and high are required");
    const auto ci = btrads::stats::wilson_ci(successes, n, level);
    *low = ci.low;
    *high = ci.high;
    return BTRADS_OK;
  });
}

btrads_status btrads_mcnemar(uint64_t b, uint64_t c, double* chi2, double* p_value) {
  return guarded([&] {
    if (!chi2 || !p_value) return fail(BTRADS_E_USAGE, "chi2 and p_value are required");
    const auto r = btrads::stats::mcnemar_test(b, c);
    *chi2 = r.chi2;
    *p_value = r.p;
    return BTRADS_OK;
  });
}

}  // extern "C"
