#include "graphflow/graphflow.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/io.hpp"

struct gf_model {
  graphflow::RunConfig config;
  // Absent for configs without a graph (refinement studies build their own).
  std::optional<graphflow::System> system;
};

struct gf_trajectory {
  graphflow::Trajectory trajectory;
};

struct gf_transport {
  graphflow::TransportResult result;
  bool converged = true;
};

namespace {

thread_local std::string last_error;

gf_status record(graphflow::ErrorCode code, const char* what) {
  last_error = what;
  return static_cast<gf_status>(static_cast<int>(code));
}

gf_status null_argument(const char* name) {
  last_error = std::string("null argument: ") + name;
  return GF_NULL_ARGUMENT;
}

// Runs body and converts exceptions into status codes.
template <class Body>
gf_status guarded(Body&& body) {
  try {
    body();
    last_error.clear();
    return GF_OK;
  } catch (const graphflow::Error& e) {
    return record(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return GF_INTERNAL_ERROR;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GF_INTERNAL_ERROR;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const graphflow::System& system_of(const gf_model* model) {
  if (!model->system) graphflow::fail(graphflow::ErrorCode::kSchemaError, "$.graph: this command needs a graph");
  return *model->system;
}

graphflow::SpeciesPairState state_from(const gf_model* model, const double* rho1, const double* rho2) {
  const std::size_t n = system_of(model).graph.num_vertices();
  graphflow::SpeciesPairState s;
  s.rho[0] = graphflow::NodeField(std::vector<double>(rho1, rho1 + n));
  s.rho[1] = graphflow::NodeField(std::vector<double>(rho2, rho2 + n));
  return s;
}

}  // namespace

extern "C" {

const char* gf_version(void) { return graphflow::version(); }

const char* gf_status_name(gf_status status) {
  switch (status) {
    case GF_OK: return "Ok";
    case GF_NULL_ARGUMENT: return "NullArgument";
    case GF_INTERNAL_ERROR: return "InternalError";
    default: break;
  }
  const int code = static_cast<int>(status);
  if (code >= GF_SIZE_MISMATCH && code <= GF_INVALID_ARGUMENT) {
    return graphflow::error_code_name(static_cast<graphflow::ErrorCode>(code)).data();
  }
  return "Unknown";
}

int gf_status_is_numerical(gf_status status) {
  switch (status) {
    case GF_NON_CONVERGENT:
    case GF_STEP_SIZE_UNDERFLOW:
    case GF_INFINITE_ACTION:
    case GF_NOT_CONVERGED:
      return 1;
    default:
      return 0;
  }
}

const char* gf_last_error(void) { return last_error.c_str(); }

void gf_string_free(char* text) { std::free(text); }

gf_status gf_model_from_json(const char* config_json, gf_model** out) {
  if (!config_json) return null_argument("config_json");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto model = std::make_unique<gf_model>();
    model->config = graphflow::parse_config(config_json);
    if (!model->config.graph.empty()) model->system = graphflow::build_system(model->config);
    *out = model.release();
  });
}

void gf_model_free(gf_model* model) { delete model; }

gf_status gf_model_config_json(const gf_model* model, char** out) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  return guarded([&] { *out = copy_string(graphflow::emit_config(model->config)); });
}

gf_status gf_model_vertex_count(const gf_model* model, size_t* out) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  return guarded([&] { *out = system_of(model).graph.num_vertices(); });
}

gf_status gf_model_output_dir(const gf_model* model, char** out) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  return guarded([&] { *out = copy_string(model->config.output_dir); });
}

gf_status gf_model_initial_state(const gf_model* model, double* rho1, double* rho2) {
  if (!model) return null_argument("model");
  if (!rho1 || !rho2) return null_argument("rho");
  return guarded([&] {
    const auto s = graphflow::initial_state(model->config, system_of(model).graph);
    std::copy(s[0].begin(), s[0].end(), rho1);
    std::copy(s[1].begin(), s[1].end(), rho2);
  });
}

gf_status gf_model_energy(const gf_model* model, const double* rho1, const double* rho2, double* out) {
  if (!model) return null_argument("model");
  if (!rho1 || !rho2) return null_argument("rho");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto& sys = system_of(model);
    *out = graphflow::energy(state_from(model, rho1, rho2), sys.kernels, sys.graph);
  });
}

gf_status gf_model_validation_json(const gf_model* model, char** out, int* ok) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  return guarded([&] {
    const std::string report = graphflow::validation_json(model->config);
    if (ok) *ok = nlohmann::json::parse(report).at("ok").get<bool>() ? 1 : 0;
    *out = copy_string(report);
  });
}

gf_status gf_simulate(const gf_model* model, gf_trajectory** out) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    const auto& sys = system_of(model);
    const auto initial = graphflow::initial_state(model->config, sys.graph);
    auto t = std::make_unique<gf_trajectory>();
    t->trajectory = graphflow::integrate(initial, model->config.horizon, sys, model->config.integrator);
    *out = t.release();
  });
}

void gf_trajectory_free(gf_trajectory* trajectory) { delete trajectory; }

gf_status gf_trajectory_length(const gf_trajectory* trajectory, size_t* out) {
  if (!trajectory) return null_argument("trajectory");
  if (!out) return null_argument("out");
  *out = trajectory->trajectory.size();
  return GF_OK;
}

gf_status gf_trajectory_state(const gf_trajectory* trajectory, size_t index, double* time, double* rho1,
                              double* rho2) {
  if (!trajectory) return null_argument("trajectory");
  const auto& t = trajectory->trajectory;
  if (index >= t.size()) {
    return record(graphflow::ErrorCode::kInvalidArgument, "trajectory index out of range");
  }
  if (time) *time = t.times[index];
  if (rho1) std::copy(t.states[index][0].begin(), t.states[index][0].end(), rho1);
  if (rho2) std::copy(t.states[index][1].begin(), t.states[index][1].end(), rho2);
  return GF_OK;
}

gf_status gf_trajectory_csv(const gf_trajectory* trajectory, char** out) {
  if (!trajectory) return null_argument("trajectory");
  if (!out) return null_argument("out");
  return guarded([&] { *out = copy_string(graphflow::trajectory_csv(trajectory->trajectory)); });
}

gf_status gf_trajectory_json(const gf_model* model, const gf_trajectory* trajectory, char** out) {
  if (!model) return null_argument("model");
  if (!trajectory) return null_argument("trajectory");
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = copy_string(graphflow::trajectory_json(trajectory->trajectory, system_of(model).graph));
  });
}

gf_status gf_trajectory_summary_json(const gf_model* model, const gf_trajectory* trajectory, char** out) {
  if (!model) return null_argument("model");
  if (!trajectory) return null_argument("trajectory");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto& sys = system_of(model);
    graphflow::Projection projection;
    graphflow::initial_state(model->config, sys.graph, &projection);
    const bool projected = model->config.initial.atoms.has_value();
    *out = copy_string(graphflow::run_summary_json(model->config, trajectory->trajectory, sys,
                                                   projected ? &projection : nullptr));
  });
}

gf_status gf_trajectory_load(const gf_model* model, const char* text, gf_trajectory** out) {
  if (!model) return null_argument("model");
  if (!text) return null_argument("text");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    const auto& sys = system_of(model);
    auto t = std::make_unique<gf_trajectory>();
    const char* p = text;
    while (*p == ' ' || *p == '\n' || *p == '\t' || *p == '\r') ++p;
    t->trajectory = *p == '{' ? graphflow::parse_trajectory(text, sys) : graphflow::parse_trajectory_csv(text, sys);
    *out = t.release();
  });
}

gf_status gf_diagnose_json(const gf_model* model, const gf_trajectory* trajectory, char** out) {
  if (!model) return null_argument("model");
  if (!trajectory) return null_argument("trajectory");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto report = graphflow::diagnose(trajectory->trajectory, system_of(model), model->config.integrator);
    *out = copy_string(graphflow::diagnosis_json(report));
  });
}

gf_status gf_diagnose_csv(const gf_model* model, const gf_trajectory* trajectory, char** out) {
  if (!model) return null_argument("model");
  if (!trajectory) return null_argument("trajectory");
  if (!out) return null_argument("out");
  return guarded([&] { *out = copy_string(graphflow::diagnosis_csv(trajectory->trajectory, system_of(model))); });
}

gf_status gf_transport_cost(const gf_model* model, const char* from_json, const char* to_json, size_t steps,
                            gf_transport** out) {
  if (!model) return null_argument("model");
  if (!from_json || !to_json) return null_argument("state");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    const auto& sys = system_of(model);
    const auto a = graphflow::parse_state(from_json, sys.graph);
    const auto b = graphflow::parse_state(to_json, sys.graph);
    const std::size_t k = steps == 0 ? model->config.steps : steps;
    auto t = std::make_unique<gf_transport>();
    try {
      t->result = graphflow::transport_cost(sys.graph, a, b, k, sys.mobility, sys.kernels.beta(), sys.exponents,
                                            model->config.solver);
    } catch (const graphflow::NotConverged& e) {
      t->result = e.result();
      t->converged = false;
      *out = t.release();
      throw;
    }
    *out = t.release();
  });
}

void gf_transport_free(gf_transport* transport) { delete transport; }

gf_status gf_transport_value(const gf_transport* transport, double* out) {
  if (!transport) return null_argument("transport");
  if (!out) return null_argument("out");
  *out = transport->result.value;
  return GF_OK;
}

gf_status gf_transport_json(const gf_transport* transport, char** out) {
  if (!transport) return null_argument("transport");
  if (!out) return null_argument("out");
  return guarded([&] { *out = copy_string(graphflow::transport_json(transport->result, transport->converged)); });
}

gf_status gf_transport_path_json(const gf_model* model, const gf_transport* transport, char** out) {
  if (!model) return null_argument("model");
  if (!transport) return null_argument("transport");
  if (!out) return null_argument("out");
  return guarded([&] { *out = copy_string(graphflow::path_json(model->config, transport->result)); });
}

gf_status gf_transport_path_csv(const gf_transport* transport, char** out) {
  if (!transport) return null_argument("transport");
  if (!out) return null_argument("out");
  return guarded([&] { *out = copy_string(graphflow::path_csv(transport->result.path)); });
}

gf_status gf_geodesic_profile_json(const char* path_json, char** out) {
  if (!path_json) return null_argument("path_json");
  if (!out) return null_argument("out");
  return guarded([&] { *out = copy_string(graphflow::geodesic_profile_json(path_json)); });
}

gf_status gf_refinement_study_json(const gf_model* model, const char* plan_json, char** out, int* all_levels_ok) {
  if (!model) return null_argument("model");
  if (!plan_json) return null_argument("plan_json");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto plan = graphflow::parse_plan(plan_json);
    const auto report = graphflow::run_refinement_study(plan, model->config);
    if (all_levels_ok) {
      *all_levels_ok = 1;
      for (const auto& level : report.levels) {
        if (!level.ok) *all_levels_ok = 0;
      }
    }
    *out = copy_string(graphflow::study_json(report, plan, model->config));
  });
}

gf_status gf_property_suite_json(const char* suite, uint64_t seed, size_t samples, char** out, int* passed) {
  if (!suite) return null_argument("suite");
  if (!out) return null_argument("out");
  gf_status status = guarded([&] {
    const auto report = graphflow::property_harness(suite, seed, samples);
    if (passed) *passed = report.passed() ? 1 : 0;
    *out = copy_string(graphflow::harness_json(report));
    if (!report.note.empty()) graphflow::fail(graphflow::ErrorCode::kInvalidArgument, report.note);
  });
  return status;
}

}  // extern "C"
