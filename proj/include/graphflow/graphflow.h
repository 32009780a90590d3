#ifndef GRAPHFLOW_GRAPHFLOW_H
#define GRAPHFLOW_GRAPHFLOW_H

/* C interface to the graphflow library. All objects are opaque handles owned
 * by the caller and released with the matching *_free function. Strings
 * returned through char** out-parameters are heap copies released with
 * gf_string_free. Every call returns a gf_status; on failure the message of
 * the most recent error on the calling thread is available from
 * gf_last_error(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GF_API __declspec(dllexport)
#else
#define GF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gf_status {
  GF_OK = 0,
  GF_SIZE_MISMATCH = 1,
  GF_NON_SYMMETRIC_WEIGHTS,
  GF_NON_POSITIVE_WEIGHT,
  GF_DUPLICATE_POINT,
  GF_NOT_APPLICABLE,
  GF_NON_CONVERGENT,
  GF_NOT_UPWIND_ADMISSIBLE,
  GF_NOT_CONCAVE,
  GF_NOT_POSITIVE,
  GF_THRESHOLD_EXCEEDED,
  GF_STEP_SIZE_UNDERFLOW,
  GF_NON_ANTISYMMETRIC,
  GF_INFINITE_ACTION,
  GF_NOT_CONVERGED,
  GF_INFEASIBLE_ENDPOINTS,
  GF_MASS_MISMATCH,
  GF_SCHEMA_ERROR,
  GF_SEMANTIC_ERROR,
  GF_EXPRESSION_ERROR,
  GF_IO_ERROR,
  GF_INVALID_ARGUMENT,
  GF_NULL_ARGUMENT = 100,
  GF_INTERNAL_ERROR = 101
} gf_status;

typedef struct gf_model gf_model;
typedef struct gf_trajectory gf_trajectory;
typedef struct gf_transport gf_transport;

GF_API const char* gf_version(void);
GF_API const char* gf_status_name(gf_status status);
/* 1 for failures of a numerical method (convergence, step size, infinite
 * action), 0 otherwise. */
GF_API int gf_status_is_numerical(gf_status status);
GF_API const char* gf_last_error(void);
GF_API void gf_string_free(char* text);

/* A validated run configuration together with the system it describes. */
GF_API gf_status gf_model_from_json(const char* config_json, gf_model** out);
GF_API void gf_model_free(gf_model* model);
GF_API gf_status gf_model_config_json(const gf_model* model, char** out);
GF_API gf_status gf_model_vertex_count(const gf_model* model, size_t* out);
GF_API gf_status gf_model_output_dir(const gf_model* model, char** out);
/* Writes the initial densities (length gf_model_vertex_count each). */
GF_API gf_status gf_model_initial_state(const gf_model* model, double* rho1, double* rho2);
GF_API gf_status gf_model_energy(const gf_model* model, const double* rho1, const double* rho2, double* out);
/* *ok is 0 when the mobility fails its sampled admissibility checks. */
GF_API gf_status gf_model_validation_json(const gf_model* model, char** out, int* ok);

GF_API gf_status gf_simulate(const gf_model* model, gf_trajectory** out);
GF_API void gf_trajectory_free(gf_trajectory* trajectory);
GF_API gf_status gf_trajectory_length(const gf_trajectory* trajectory, size_t* out);
GF_API gf_status gf_trajectory_state(const gf_trajectory* trajectory, size_t index, double* time, double* rho1,
                                     double* rho2);
GF_API gf_status gf_trajectory_csv(const gf_trajectory* trajectory, char** out);
GF_API gf_status gf_trajectory_json(const gf_model* model, const gf_trajectory* trajectory, char** out);
GF_API gf_status gf_trajectory_summary_json(const gf_model* model, const gf_trajectory* trajectory, char** out);
/* Accepts the JSON written by gf_trajectory_json or the long-format CSV. */
GF_API gf_status gf_trajectory_load(const gf_model* model, const char* text, gf_trajectory** out);
GF_API gf_status gf_diagnose_json(const gf_model* model, const gf_trajectory* trajectory, char** out);
GF_API gf_status gf_diagnose_csv(const gf_model* model, const gf_trajectory* trajectory, char** out);

/* States are JSON objects {"rho1": [...], "rho2": [...]}. steps == 0 uses
 * the configured step count. On GF_NOT_CONVERGED *out still receives the
 * best path found. */
GF_API gf_status gf_transport_cost(const gf_model* model, const char* from_json, const char* to_json,
                                   size_t steps, gf_transport** out);
GF_API void gf_transport_free(gf_transport* transport);
GF_API gf_status gf_transport_value(const gf_transport* transport, double* out);
GF_API gf_status gf_transport_json(const gf_transport* transport, char** out);
GF_API gf_status gf_transport_path_json(const gf_model* model, const gf_transport* transport, char** out);
GF_API gf_status gf_transport_path_csv(const gf_transport* transport, char** out);

GF_API gf_status gf_geodesic_profile_json(const char* path_json, char** out);
/* Levels that fail are reported inside the JSON; *all_levels_ok is 0 when
 * any did. */
GF_API gf_status gf_refinement_study_json(const gf_model* model, const char* plan_json, char** out,
                                          int* all_levels_ok);
/* *passed is set to 1 when the suite ran without failures. An unknown suite
 * yields GF_INVALID_ARGUMENT together with a report carrying a note. */
GF_API gf_status gf_property_suite_json(const char* suite, uint64_t seed, size_t samples, char** out,
                                        int* passed);

#ifdef __cplusplus
}
#endif

#endif
