#ifndef HERMES_H
#define HERMES_H

#include <stddef.h>
#include <stdint.h>

#if defined(HERMES_BUILDING_LIBRARY)
#define HERMES_API __attribute__((visibility("default")))
#else
#define HERMES_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hermes_status {
    HERMES_OK = 0,
    HERMES_INVALID_ARGUMENT = 1,
    HERMES_PARSE = 2,
    HERMES_VALIDATION = 3,
    HERMES_IO = 4,
    HERMES_ORACLE_MISMATCH = 5,
    HERMES_INTERNAL = 6,
    HERMES_BUFFER_TOO_SMALL = 7
} hermes_status;

typedef struct hermes_scenario hermes_scenario;
typedef struct hermes_run hermes_run;
typedef struct hermes_report hermes_report;

typedef struct hermes_envelope {
    uint8_t category;
    uint8_t type;
    uint32_t src;
    uint32_t dst;
    uint32_t final_dst;
    uint32_t id;
    const uint8_t* payload;
    size_t payload_len;
} hermes_envelope;

typedef struct hermes_report_summary {
    int64_t window_start_ms;
    int64_t window_end_ms;
    /* Bytes at the root per bucket: routing, lifecycle, middleware, data, monitoring, malformed. */
    uint64_t bytes[6];
    uint64_t total_bytes;
    uint64_t neuron_output_bytes;
    uint64_t neuron_output_forwarded_bytes;
    size_t inference_cycles;
    double mean_inference_ms;
    uint64_t nacks;
    uint64_t oracle_mismatches;
    uint64_t topology_mismatches;
} hermes_report_summary;

/* Message describing the last failure on the calling thread. Never NULL. */
HERMES_API const char* hermes_last_error(void);
HERMES_API const char* hermes_version(void);
HERMES_API const char* hermes_status_string(hermes_status status);

/* Text outputs use one protocol: `*needed` receives the size including the
 * terminator; HERMES_BUFFER_TOO_SMALL is returned when `cap` is smaller.
 * `buf` may be NULL when `cap` is 0. */

HERMES_API hermes_status hermes_scenario_load(const char* path, hermes_scenario** out);
HERMES_API hermes_status hermes_scenario_parse(const char* yaml, const char* base_dir, hermes_scenario** out);
/* Newline-separated problems; HERMES_VALIDATION when at least one. */
HERMES_API hermes_status hermes_scenario_validate(const hermes_scenario* s, char* buf, size_t cap, size_t* needed);
HERMES_API hermes_status hermes_scenario_set_seed(hermes_scenario* s, uint64_t seed);
HERMES_API hermes_status hermes_scenario_set_duration(hermes_scenario* s, int64_t duration_ms);
HERMES_API void hermes_scenario_free(hermes_scenario* s);

/* Builds a deployment from a copy of the scenario. */
HERMES_API hermes_status hermes_run_create(const hermes_scenario* s, hermes_run** out);
HERMES_API hermes_status hermes_run_execute(hermes_run* r);
HERMES_API hermes_status hermes_run_trace(const hermes_run* r, char* buf, size_t cap, size_t* needed);
HERMES_API void hermes_run_free(hermes_run* r);

/* A window end below 0 means the end of the trace. */
HERMES_API hermes_status hermes_report_from_trace(const char* trace, int64_t start_ms, int64_t end_ms,
                                                  hermes_report** out);
HERMES_API hermes_status hermes_run_report(const hermes_run* r, int64_t start_ms, int64_t end_ms,
                                           hermes_report** out);
HERMES_API hermes_status hermes_report_text(const hermes_report* r, char* buf, size_t cap, size_t* needed);
HERMES_API hermes_status hermes_report_records(const hermes_report* r, char* buf, size_t cap, size_t* needed);
HERMES_API hermes_status hermes_report_summary_get(const hermes_report* r, hermes_report_summary* out);
HERMES_API void hermes_report_free(hermes_report* r);

HERMES_API hermes_status hermes_envelope_encode(const hermes_envelope* env, uint8_t* buf, size_t cap,
                                                size_t* needed);
/* On success `out->payload` points into `frame`. */
HERMES_API hermes_status hermes_envelope_decode(const uint8_t* frame, size_t len, hermes_envelope* out);

HERMES_API uint32_t hermes_derive_ap_ip(const uint8_t mac[6]);

/* Reference forward pass of a model in text form. */
HERMES_API hermes_status hermes_model_forward(const char* model_text, const double* inputs, size_t n_inputs,
                                              double* outputs, size_t cap, size_t* n_outputs);

#ifdef __cplusplus
}
#endif

#endif
