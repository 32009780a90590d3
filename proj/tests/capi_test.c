/* Exercises the shared library through its C header only. */

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "graphflow/graphflow.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static const char* kS1 =
    "{\"graph\": {\"points\": [0, 1], \"weights\": [1, 1]},"
    " \"kernels\": {\"K11\": {\"preset\": \"distance\"}},"
    " \"initial\": {\"rho1\": [0.75, 0.25], \"rho2\": [0.5, 0.5]},"
    " \"integrator\": {\"max_dt\": 0.01}}";

static void test_model(void) {
  gf_model* model = NULL;
  EXPECT(gf_model_from_json(kS1, &model) == GF_OK);
  if (!model) return;

  size_t n = 0;
  EXPECT(gf_model_vertex_count(model, &n) == GF_OK);
  EXPECT(n == 2);

  double rho1[2], rho2[2], e = 0.0;
  EXPECT(gf_model_initial_state(model, rho1, rho2) == GF_OK);
  EXPECT(rho1[0] == 0.75 && rho2[1] == 0.5);
  EXPECT(gf_model_energy(model, rho1, rho2, &e) == GF_OK);
  EXPECT(fabs(e - 0.1875) < 1e-15);

  char* text = NULL;
  int ok = 0;
  EXPECT(gf_model_validation_json(model, &text, &ok) == GF_OK);
  EXPECT(ok == 1);
  gf_string_free(text);

  gf_trajectory* traj = NULL;
  EXPECT(gf_simulate(model, &traj) == GF_OK);
  size_t len = 0;
  EXPECT(gf_trajectory_length(traj, &len) == GF_OK);
  EXPECT(len > 2);
  double t = 0.0;
  EXPECT(gf_trajectory_state(traj, len - 1, &t, rho1, rho2) == GF_OK);
  EXPECT(fabs(t - 1.0) < 1e-12);
  EXPECT(rho1[0] > 0.75);
  EXPECT(gf_trajectory_state(traj, len, &t, rho1, rho2) == GF_INVALID_ARGUMENT);

  char* csv = NULL;
  EXPECT(gf_trajectory_csv(traj, &csv) == GF_OK);
  EXPECT(strncmp(csv, "t,species,vertex,density", 24) == 0);
  gf_trajectory* reread = NULL;
  EXPECT(gf_trajectory_load(model, csv, &reread) == GF_OK);
  gf_string_free(csv);

  char* report = NULL;
  EXPECT(gf_diagnose_json(model, reread, &report) == GF_OK);
  EXPECT(report && strstr(report, "\"g_t\"") != NULL);
  gf_string_free(report);
  gf_trajectory_free(reread);
  gf_trajectory_free(traj);
  gf_model_free(model);
}

static void test_transport(void) {
  gf_model* model = NULL;
  EXPECT(gf_model_from_json("{\"graph\": {\"points\": [0, 1], \"weights\": [1, 1]}}", &model) == GF_OK);
  gf_transport* result = NULL;
  EXPECT(gf_transport_cost(model, "{\"rho1\": [1, 0]}", "{\"rho1\": [0, 1]}", 16, &result) == GF_OK);
  double value = 0.0;
  EXPECT(gf_transport_value(result, &value) == GF_OK);
  EXPECT(value > 1.8 && value < 2.0);

  char* path = NULL;
  EXPECT(gf_transport_path_json(model, result, &path) == GF_OK);
  char* profile = NULL;
  EXPECT(gf_geodesic_profile_json(path, &profile) == GF_OK);
  EXPECT(profile && strstr(profile, "max_relative_deviation") != NULL);
  gf_string_free(profile);
  gf_string_free(path);
  gf_transport_free(result);

  EXPECT(gf_transport_cost(model, "{\"rho1\": [1, 0]}", "{\"rho1\": [1, 1]}", 16, &result) ==
         GF_INFEASIBLE_ENDPOINTS);
  gf_model_free(model);
}

static void test_errors(void) {
  gf_model* model = NULL;
  EXPECT(gf_model_from_json("{\"bogus\": 1}", &model) == GF_SCHEMA_ERROR);
  EXPECT(model == NULL);
  EXPECT(strstr(gf_last_error(), "$.bogus") != NULL);
  EXPECT(gf_model_from_json("{\"kernels\": {\"beta\": [1, -1]}}", &model) == GF_SEMANTIC_ERROR);
  EXPECT(gf_model_from_json(NULL, &model) == GF_NULL_ARGUMENT);
  EXPECT(strcmp(gf_status_name(GF_NOT_CONVERGED), "NotConverged") == 0);
  EXPECT(gf_status_is_numerical(GF_STEP_SIZE_UNDERFLOW) == 1);
  EXPECT(gf_status_is_numerical(GF_SCHEMA_ERROR) == 0);
  EXPECT(strlen(gf_version()) > 0);

  char* report = NULL;
  int passed = 0;
  EXPECT(gf_property_suite_json("antisym", 5, 20, &report, &passed) == GF_OK);
  EXPECT(passed == 1);
  gf_string_free(report);
  report = NULL;
  EXPECT(gf_property_suite_json("nope", 5, 20, &report, &passed) == GF_INVALID_ARGUMENT);
  EXPECT(passed == 0);
  gf_string_free(report);
}

int main(void) {
  test_model();
  test_transport();
  test_errors();
  if (failures) {
    fprintf(stderr, "%d C API check(s) failed\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
