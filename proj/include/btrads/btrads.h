#ifndef BTRADS_H
#define BTRADS_H

/* C interface to the BT-RADS scoring library.
 *
 * Every fallible call returns a btrads_status. On failure the message is
 * available from btrads_last_error() on the same thread until the next call.
 * Strings returned through char** out-parameters are owned by the caller and
 * released with btrads_free_string(). JSON strings use the same layouts as
 * the report files and the HTTP service.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BTRADS_API __declspec(dllexport)
#else
#define BTRADS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum btrads_status {
  BTRADS_OK = 0,
  BTRADS_E_USAGE = 1,      /* bad arguments or configuration */
  BTRADS_E_VALIDATION = 2, /* input data rejected */
  BTRADS_E_TRANSPORT = 3,  /* extraction backend unreachable or misbehaving */
  BTRADS_E_NOT_FOUND = 4,
  BTRADS_E_IO = 5,
  BTRADS_E_INTERNAL = 6
} btrads_status;

typedef struct btrads_config btrads_config;
typedef struct btrads_store btrads_store;
typedef struct btrads_service btrads_service;

BTRADS_API const char* btrads_version(void);
BTRADS_API const char* btrads_last_error(void);
BTRADS_API const char* btrads_status_name(btrads_status status);
BTRADS_API void btrads_free_string(char* s);

/* Configuration. */
BTRADS_API btrads_status btrads_config_default(btrads_config** out);
/* Reads a JSON config file and applies BTRADS_LLM_* environment overrides. */
BTRADS_API btrads_status btrads_config_load(const char* path, btrads_config** out);
/* backend: "patterns" or "llm". */
BTRADS_API btrads_status btrads_config_set_backend(btrads_config* config, const char* backend);
BTRADS_API void btrads_config_free(btrads_config* config);

/* Batch scoring: reads JSON-lines cases, writes one report per line to
 * out_path. store_dir may be NULL; otherwise every report is also put into
 * the case store there. summary_json (may be NULL) receives the batch counts. */
BTRADS_API btrads_status btrads_score_file(const btrads_config* config, const char* cases_path,
                                           const char* out_path, const char* store_dir,
                                           char** summary_json);

/* Evaluation of a report file. out_json_path may be NULL; tables (may be
 * NULL) receives the rendered text tables. */
BTRADS_API btrads_status btrads_evaluate_file(const char* reports_path, const char* out_json_path,
                                              char** tables);

/* Single-note extraction; variables_json receives the variables object. */
BTRADS_API btrads_status btrads_extract(const btrads_config* config, const char* note,
                                        char** variables_json);

/* Scores one case given as a JSON object; report_json receives the report,
 * which for an ineligible case has status "excluded". */
BTRADS_API btrads_status btrads_score_case_json(const btrads_config* config, const char* case_json,
                                                char** report_json);

/* Writes cases.jsonl, volumetrics.tsv and config.json. profile: "reference". */
BTRADS_API btrads_status btrads_fixtures_generate(const char* profile, uint64_t seed, const char* out_dir);

/* Case store. */
BTRADS_API btrads_status btrads_store_open(const char* dir, btrads_store** out);
BTRADS_API void btrads_store_close(btrads_store* store);
BTRADS_API btrads_status btrads_store_size(const btrads_store* store, size_t* out);
/* case_json receives {"case", "report", "reviewer"}. */
BTRADS_API btrads_status btrads_store_get(const btrads_store* store, const char* case_id, char** case_json);
/* edited_json is a (partial) variables object; outcome_json receives
 * {"score", "category_changed", "first_divergent_rule", "reviewer_asserted", "audit_event"}. */
BTRADS_API btrads_status btrads_store_rescore(btrads_store* store, const btrads_config* config,
                                              const char* case_id, const char* edited_json,
                                              char** outcome_json);
/* variables_json and category may be NULL, but not both; reason is required. */
BTRADS_API btrads_status btrads_store_override(btrads_store* store, const char* case_id,
                                               const char* variables_json, const char* category,
                                               const char* reason, char** event_json);
/* events_json receives the full audit log as an array. */
BTRADS_API btrads_status btrads_store_audit(const btrads_store* store, char** events_json);

/* HTTP review service. port 0 picks a free port; token may be NULL. */
BTRADS_API btrads_status btrads_service_start(btrads_store* store, const btrads_config* config,
                                              const char* host, int port, const char* token,
                                              btrads_service** out);
BTRADS_API int btrads_service_port(const btrads_service* service);
/* Blocks until btrads_service_stop is called from another thread. */
BTRADS_API void btrads_service_wait(btrads_service* service);
BTRADS_API void btrads_service_stop(btrads_service* service);
BTRADS_API void btrads_service_free(btrads_service* service);

/* Statistics. */
BTRADS_API btrads_status btrads_wilson_ci(uint64_t successes, uint64_t n, double level, double* low,
                                          double* high);
BTRADS_API btrads_status btrads_mcnemar(uint64_t b, uint64_t c, double* chi2, double* p_value);

#ifdef __cplusplus
}
#endif

#endif /* BTRADS_H */
