#ifndef HALLAUDIT_H
#define HALLAUDIT_H

#include <stdint.h>

#if defined(_WIN32)
#define HA_API __declspec(dllexport)
#else
#define HA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ha_status {
  HA_OK = 0,
  HA_ERR_INVALID_ARGUMENT = 1,
  HA_ERR_IO = 2,
  HA_ERR_PARSE = 3,
  HA_ERR_VALIDATION = 4,
  HA_ERR_NOT_FOUND = 5,
  HA_ERR_NETWORK = 6,
  HA_ERR_NUMERIC = 7,
  HA_ERR_STAGE = 8,
  HA_ERR_INTERNAL = 9
} ha_status;

typedef struct ha_pipeline ha_pipeline;
typedef struct ha_service ha_service;

/* Overrides applied on top of the config file. NULL fields are ignored. */
typedef struct ha_options {
  const char* output_dir;
  int has_seed;
  uint64_t seed;
  int parallelism; /* 0 keeps the configured value */
} ha_options;

HA_API const char* ha_version(void);
HA_API const char* ha_status_name(ha_status status);

/* Message for the last failing call on this thread; "" when none. */
HA_API const char* ha_last_error(void);

/* Logs go to stderr. level: trace, debug, info, warn, error, off. */
HA_API ha_status ha_set_log_level(const char* level);

/* Strings handed out by the library are released with this. */
HA_API void ha_string_free(char* s);

/* A config with a "simulation" block, a "mock_config" and no manifest opens
 * the synthetic corpus that ha_simulate writes. */
HA_API ha_status ha_pipeline_open(const char* config_path, const ha_options* options, ha_pipeline** out);
HA_API void ha_pipeline_free(ha_pipeline* pipeline);

/* outcomes_json (optional) receives a JSON array of {"key","skipped"}. */
HA_API ha_status ha_pipeline_run(ha_pipeline* pipeline, char** outcomes_json);
HA_API ha_status ha_pipeline_run_stage(ha_pipeline* pipeline, const char* stage, char** outcomes_json);
HA_API ha_status ha_pipeline_transcribe(ha_pipeline* pipeline, const char* backend_id, const char* run_tag,
                                        int* skipped);
HA_API ha_status ha_pipeline_vad_frames(ha_pipeline* pipeline, const char* segment_id, char** csv);
HA_API ha_status ha_pipeline_output_dir(const ha_pipeline* pipeline, char** path);

/* Synthesizes a corpus under <output>/simulation and runs every stage
 * against the mock backend described by mock_config_path (NULL falls back to
 * the config's "mock_config"). config_path may be NULL for all defaults. */
HA_API ha_status ha_simulate(const char* config_path, const ha_options* options, const char* mock_config_path,
                             char** outcomes_json);

/* port 0 binds an ephemeral port, a negative port uses the configured one.
 * host NULL uses the configured host. bound_port receives the actual port. */
HA_API ha_status ha_service_start(const ha_pipeline* pipeline, const char* host, int port, ha_service** out,
                                  int* bound_port);
HA_API void ha_service_stop(ha_service* service);
HA_API void ha_service_free(ha_service* service);

#ifdef __cplusplus
}
#endif

#endif
