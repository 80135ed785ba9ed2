#ifndef APV_APV_H
#define APV_APV_H

#include <stddef.h>
#include <stdint.h>

#if defined(APV_BUILDING_LIBRARY)
#define APV_API __attribute__((visibility("default")))
#else
#define APV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum apv_status {
  APV_OK = 0,
  APV_ERR_INTERNAL = 1,     /* I/O and unexpected failures */
  APV_ERR_SCHEMA = 2,       /* malformed scenario or invalid argument */
  APV_ERR_PHYSICS = 3,      /* FrequencyMismatch, ZeroShiftGeometry, ... */
  APV_ERR_FIT = 4,          /* FitDegenerate */
  APV_ERR_FIT_FAILURES = 5  /* Monte Carlo fit-failure fraction above threshold */
} apv_status;

enum {
  APV_FORMAT_CSV = 1,
  APV_FORMAT_JSON = 2,
  APV_FORMAT_ALL = 3,
  APV_FORMAT_SCENARIO = 0 /* use the formats listed in the scenario */
};

typedef struct apv_scenario apv_scenario;
typedef struct apv_result apv_result;

APV_API const char* apv_version(void);

/* Message of the last failed call on this thread; "" after a success. */
APV_API const char* apv_last_error(void);
/* Error kind of the last failed call on this thread, e.g. "FrequencyMismatch". */
APV_API const char* apv_last_error_kind(void);

APV_API apv_status apv_scenario_load(const char* path, apv_scenario** out);
APV_API apv_status apv_scenario_parse(const char* json_text, apv_scenario** out);
APV_API apv_status apv_scenario_default(apv_scenario** out);
/* Sets a dotted key path (e.g. "ions.count") to a JSON value and re-validates. */
APV_API apv_status apv_scenario_set_json(apv_scenario* scenario, const char* path, const char* json_value);
APV_API apv_status apv_scenario_set_seed(apv_scenario* scenario, uint64_t seed);
APV_API void apv_scenario_free(apv_scenario* scenario);

/* out_dir may be NULL: then $APV_OUT_DIR, then the scenario's directory. */
APV_API apv_status apv_run_shift(const apv_scenario* scenario, const char* out_dir, int formats, apv_result** out);
APV_API apv_status apv_run_ramsey(const apv_scenario* scenario, const char* out_dir, int formats, apv_result** out);
/* Returns APV_ERR_FIT_FAILURES with a valid *out when too many trials failed. */
APV_API apv_status apv_run_montecarlo(const apv_scenario* scenario, const char* out_dir, int formats,
                                      apv_result** out);
APV_API apv_status apv_run_sweep(const apv_scenario* scenario, const char* path, const double* values, size_t count,
                                 const char* out_dir, int formats, apv_result** out);
APV_API apv_status apv_run_calibrate(const apv_scenario* scenario, const char* out_dir, int formats,
                                     apv_result** out);

/* Owned by the result. */
APV_API const char* apv_result_summary_json(const apv_result* result);
APV_API size_t apv_result_file_count(const apv_result* result);
APV_API const char* apv_result_file(const apv_result* result, size_t index);
APV_API void apv_result_free(apv_result* result);

APV_API double apv_bsm_reach(double fractional_precision);
APV_API apv_status apv_precision_projection(int n_ions, double delta, double contrast, double cycle_time_s,
                                            double total_time_s, double* out);
/* Ratio delta_a / delta_b with its total uncertainty. */
APV_API apv_status apv_isotope_ratio(double delta_a, double sigma_a, double delta_b, double sigma_b,
                                     double theory_fraction, double* ratio, double* sigma_total);

#ifdef __cplusplus
}
#endif

#endif
