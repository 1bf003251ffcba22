/* C interface to the cornerspace library.
 *
 * Handles are opaque and owned by the caller once returned; free them with
 * the matching *_free function. Every function returning cs_status leaves a
 * message for cs_last_error() on failure (per thread). Strings returned by
 * getters stay valid until the owning handle is freed.
 */
#ifndef CORNERSPACE_H
#define CORNERSPACE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CS_API __declspec(dllexport)
#else
#define CS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cs_status {
  CS_OK = 0,
  CS_ERR_INVALID_ARGUMENT = 1,
  CS_ERR_CONFIG = 2,
  CS_ERR_NUMERICAL = 3,
  CS_ERR_IO = 4,
  CS_ERR_RESOURCE = 5,
  CS_ERR_NOT_CONVERGED = 6,
  CS_ERR_INTERNAL = 7
} cs_status;

typedef struct cs_config cs_config;
typedef struct cs_result cs_result;

CS_API const char* cs_version(void);
CS_API const char* cs_last_error(void);
CS_API const char* cs_status_name(cs_status s);

/* ---- configuration ---- */

CS_API cs_status cs_config_from_file(const char* path, cs_config** out);
CS_API cs_status cs_config_from_json(const char* json, cs_config** out);
/* Copies the resolved configuration as JSON into buf (NUL-terminated).
 * *needed receives the full size including the terminator; a NULL or short
 * buffer is not an error, the caller retries with a larger one. */
CS_API cs_status cs_config_to_json(const cs_config* c, char* buf, size_t cap, size_t* needed);
CS_API const char* cs_config_name(const cs_config* c);
CS_API cs_status cs_config_set_output_dir(cs_config* c, const char* dir);
CS_API cs_status cs_config_set_seed(cs_config* c, uint64_t seed);
CS_API cs_status cs_config_set_checkpoint_dir(cs_config* c, const char* dir);
CS_API void cs_config_free(cs_config* c);

/* ---- presets ---- */

CS_API size_t cs_preset_count(void);
CS_API cs_status cs_preset_info(size_t index, const char** name, const char** description,
                                const char** reproduces);
/* One configuration per preset row. m_max <= 0 keeps every M; has_seed = 0
 * keeps the preset's pinned seed. Free with cs_config_array_free. */
CS_API cs_status cs_preset_load(const char* name, int has_seed, uint64_t seed, int m_max,
                                cs_config*** rows, size_t* count);
CS_API void cs_config_array_free(cs_config** rows, size_t count);

/* ---- runs ---- */

/* Runs the experiment; with write_outputs != 0 the CSV files and manifest
 * are written to the configured output directory. */
CS_API cs_status cs_run(const cs_config* c, int write_outputs, cs_result** out);
/* 0 converged, 2 limits reached without convergence. */
CS_API int cs_result_exit_code(const cs_result* r);
CS_API const char* cs_result_run_id(const cs_result* r);
CS_API const char* cs_result_manifest(const cs_result* r);

typedef struct cs_row {
  int lx, ly;
  long long m;
  const char* solver; /* "direct", "mcwf" or "meanfield" */
  double n, re_b, im_b, g2, g2_nn;
  double n_err, re_b_err, im_b_err, g2_err, g2_nn_err;
  int has_g2, has_g2_nn, has_errors;
} cs_row;

CS_API size_t cs_result_row_count(const cs_result* r);
CS_API cs_status cs_result_row(const cs_result* r, size_t index, cs_row* out);
CS_API size_t cs_result_spectrum_size(const cs_result* r);
CS_API cs_status cs_result_spectrum(const cs_result* r, size_t index, int* rank, double* p,
                                    double* n_total);
CS_API size_t cs_result_series_size(const cs_result* r);
CS_API cs_status cs_result_series(const cs_result* r, size_t index, double* t, double* n,
                                  double* g2, int* has_g2);
CS_API size_t cs_result_warning_count(const cs_result* r);
CS_API const char* cs_result_warning(const cs_result* r, size_t index);

typedef enum cs_table { CS_TABLE_RESULTS = 0, CS_TABLE_SPECTRUM = 1, CS_TABLE_SERIES = 2 } cs_table;
/* CSV text exactly as written to disk. */
CS_API const char* cs_result_csv(const cs_result* r, cs_table which);
CS_API void cs_result_free(cs_result* r);

/* ---- direct access to the baselines ---- */

typedef struct cs_model {
  double delta_omega, u, j, f, gamma;
  int hardcore; /* nonzero: U is ignored and n_max must be 1 */
  int n_max;
} cs_model;

CS_API void cs_model_defaults(cs_model* m);

typedef struct cs_meanfield_result {
  double n, re_b, im_b, g2;
  int has_g2;
  int iterations;
  double residual;
  int converged;
} cs_meanfield_result;

CS_API cs_status cs_meanfield(const cs_model* m, cs_meanfield_result* out);

/* Indices of the m largest products pa[i] * pb[j] (ties by (i, j)); ra, rb
 * and p must hold m entries. */
CS_API cs_status cs_select_top_pairs(const double* pa, size_t na, const double* pb, size_t nb,
                                     size_t m, int* ra, int* rb, double* p);

#ifdef __cplusplus
}
#endif

#endif
