#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "graphflow/error.hpp"
#include "graphflow/expression.hpp"
#include "graphflow/io.hpp"
#include "io_json.hpp"

namespace graphflow {

using namespace detail;

namespace {

void append(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

json rows(const std::vector<SpeciesPairState>& states, int species) {
  json out = json::array();
  for (const auto& s : states) out.push_back(s[species].values());
  return out;
}

json flux_rows(const std::vector<EdgeFluxPair>& fluxes, int species) {
  json out = json::array();
  for (const auto& f : fluxes) out.push_back(f[species].values());
  return out;
}

json edge_list(const FiniteGraph& graph) {
  json out = json::array();
  for (const Edge& e : graph.edges()) out.push_back({e.from, e.to});
  return out;
}

void check_edges(const json& j, const FiniteGraph& graph, const std::string& path) {
  if (!j.is_array() || j.size() != graph.num_edges()) {
    fail(ErrorCode::kSizeMismatch, path + ": edge list does not match the configured graph");
  }
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const auto pair = numbers(j[e], path + "[" + std::to_string(e) + "]");
    if (pair.size() != 2 || pair[0] != graph.edge(e).from || pair[1] != graph.edge(e).to) {
      fail(ErrorCode::kSizeMismatch, path + ": edge " + std::to_string(e) + " differs from the configured graph");
    }
  }
}

std::vector<SpeciesPairState> read_states(const json& j, const std::string& key1, const std::string& key2,
                                          std::size_t count, std::size_t width) {
  for (const auto& key : {key1, key2}) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != count) {
      fail(ErrorCode::kSizeMismatch, "$." + key + ": expected " + std::to_string(count) + " rows");
    }
  }
  std::vector<SpeciesPairState> out(count);
  for (std::size_t r = 0; r < count; ++r) {
    for (int i = 0; i < 2; ++i) {
      const std::string& key = i == 0 ? key1 : key2;
      auto v = numbers(j[key][r], "$." + key + "[" + std::to_string(r) + "]");
      if (v.size() != width) {
        fail(ErrorCode::kSizeMismatch, "$." + key + "[" + std::to_string(r) + "]: expected " +
                                           std::to_string(width) + " entries");
      }
      out[r][i] = NodeField(std::move(v));
    }
  }
  return out;
}

std::vector<EdgeFluxPair> read_fluxes(const json& j, const std::string& key1, const std::string& key2,
                                      std::size_t count, std::size_t width) {
  const auto states = read_states(j, key1, key2, count, width);
  std::vector<EdgeFluxPair> out(count);
  for (std::size_t r = 0; r < count; ++r) {
    for (int i = 0; i < 2; ++i) out[r][i] = EdgeField(states[r][i].values());
  }
  return out;
}

json monotonicity_json(const MonotonicityReport& m) {
  return {{"steps", m.steps},
          {"violations", m.violations},
          {"worst_increase", m.worst_increase},
          {"worst_excess", m.worst_excess}};
}

json conservation_json(const ConservationReport& c) {
  return {{"max_mass_drift", c.max_mass_drift},
          {"min_density", finite_or_null(c.min_density)},
          {"max_density", finite_or_null(c.max_density)},
          {"clamp_mass", c.clamp_mass},
          {"continuity_defect", c.continuity_defect}};
}

json certificate_json(const SolverCertificate& c) {
  return {{"constraint_residual", c.constraint_residual},
          {"optimality_residual", c.optimality_residual},
          {"iterations", c.iterations},
          {"objective", c.objective},
          {"smoothing_gap", c.smoothing_gap},
          {"final_smoothing", c.final_smoothing}};
}

}  // namespace

std::string trajectory_csv(const Trajectory& trajectory) {
  std::string out = "t,species,vertex,density\n";
  for (std::size_t n = 0; n < trajectory.size(); ++n) {
    for (int i = 0; i < 2; ++i) {
      const NodeField& rho = trajectory.states[n][i];
      for (std::size_t l = 0; l < rho.size(); ++l) {
        append(out, trajectory.times[n]);
        out += ',' + std::to_string(i + 1) + ',' + std::to_string(l) + ',';
        append(out, rho[l]);
        out += '\n';
      }
    }
  }
  return out;
}

std::string trajectory_json(const Trajectory& trajectory, const FiniteGraph& graph) {
  json steps = json::array();
  for (const StepRecord& s : trajectory.steps) steps.push_back({s.dt, s.error_norm, s.clamp_mass});
  json j = {{"times", trajectory.times},
            {"edges", edge_list(graph)},
            {"rho1", rows(trajectory.states, 0)},
            {"rho2", rows(trajectory.states, 1)},
            {"node_flux1", flux_rows(trajectory.node_fluxes, 0)},
            {"node_flux2", flux_rows(trajectory.node_fluxes, 1)},
            {"interval_flux1", flux_rows(trajectory.interval_fluxes, 0)},
            {"interval_flux2", flux_rows(trajectory.interval_fluxes, 1)},
            {"steps", steps},
            {"rejected_error", trajectory.rejected_error},
            {"rejected_guard", trajectory.rejected_guard},
            {"flux_evaluations", trajectory.flux_evaluations},
            {"clamp_mass_total", trajectory.clamp_mass_total},
            {"min_density_before_clamp", finite_or_null(trajectory.min_density_before_clamp)},
            {"max_density_before_clamp", finite_or_null(trajectory.max_density_before_clamp)}};
  return j.dump();
}

Trajectory parse_trajectory(const std::string& text, const System& system) {
  const json j = parse_json(text, "trajectory");
  check_keys(j, "$", {"times", "edges", "rho1", "rho2", "node_flux1", "node_flux2", "interval_flux1",
                      "interval_flux2", "steps", "rejected_error", "rejected_guard", "flux_evaluations",
                      "clamp_mass_total", "min_density_before_clamp", "max_density_before_clamp"});
  for (const char* key : {"times", "edges", "rho1", "rho2", "node_flux1", "node_flux2"}) {
    if (!j.contains(key)) schema_error(std::string("$.") + key, "missing");
  }
  const FiniteGraph& graph = system.graph;
  check_edges(j["edges"], graph, "$.edges");
  Trajectory t;
  t.times = numbers(j["times"], "$.times");
  if (t.times.empty()) fail(ErrorCode::kSizeMismatch, "$.times: trajectory is empty");
  for (std::size_t n = 1; n < t.times.size(); ++n) {
    if (!(t.times[n] > t.times[n - 1])) fail(ErrorCode::kInvalidArgument, "$.times: must increase strictly");
  }
  const std::size_t samples = t.times.size();
  t.states = read_states(j, "rho1", "rho2", samples, graph.num_vertices());
  t.node_fluxes = read_fluxes(j, "node_flux1", "node_flux2", samples, graph.num_edges());
  if (j.contains("interval_flux1") || j.contains("interval_flux2")) {
    t.interval_fluxes = read_fluxes(j, "interval_flux1", "interval_flux2", samples - 1, graph.num_edges());
  } else {
    for (std::size_t n = 0; n + 1 < samples; ++n) {
      EdgeFluxPair avg;
      for (int i = 0; i < 2; ++i) avg[i] = 0.5 * (t.node_fluxes[n][i] + t.node_fluxes[n + 1][i]);
      t.interval_fluxes.push_back(std::move(avg));
    }
  }
  if (j.contains("steps")) {
    const json& s = j["steps"];
    if (!s.is_array()) schema_error("$.steps", "expected an array");
    for (std::size_t n = 0; n < s.size(); ++n) {
      const auto v = numbers(s[n], "$.steps[" + std::to_string(n) + "]");
      if (v.size() != 3) schema_error("$.steps[" + std::to_string(n) + "]", "expected [dt, error, clamp]");
      t.steps.push_back({v[0], v[1], v[2]});
    }
  }
  if (j.contains("rejected_error")) t.rejected_error = count(j["rejected_error"], "$.rejected_error");
  if (j.contains("rejected_guard")) t.rejected_guard = count(j["rejected_guard"], "$.rejected_guard");
  if (j.contains("flux_evaluations")) t.flux_evaluations = count(j["flux_evaluations"], "$.flux_evaluations");
  if (j.contains("clamp_mass_total")) t.clamp_mass_total = number(j["clamp_mass_total"], "$.clamp_mass_total");
  if (j.contains("min_density_before_clamp") && !j["min_density_before_clamp"].is_null()) {
    t.min_density_before_clamp = number(j["min_density_before_clamp"], "$.min_density_before_clamp");
  }
  if (j.contains("max_density_before_clamp") && !j["max_density_before_clamp"].is_null()) {
    t.max_density_before_clamp = number(j["max_density_before_clamp"], "$.max_density_before_clamp");
  }
  return t;
}

Trajectory parse_trajectory_csv(const std::string& text, const System& system) {
  const std::size_t n = system.graph.num_vertices();
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,species,vertex,density", 0) != 0) {
    fail(ErrorCode::kSchemaError, "trajectory CSV: expected header t,species,vertex,density");
  }
  std::map<double, SpeciesPairState> by_time;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    double t = 0.0, rho = 0.0;
    int species = 0;
    unsigned long vertex = 0;
    if (std::sscanf(line.c_str(), "%lf,%d,%lu,%lf", &t, &species, &vertex, &rho) != 4 || species < 1 ||
        species > 2 || vertex >= n) {
      fail(ErrorCode::kSchemaError, "trajectory CSV line " + std::to_string(line_no) + ": malformed row");
    }
    auto [it, inserted] = by_time.try_emplace(t);
    if (inserted) it->second.rho = {NodeField(n, std::nan("")), NodeField(n, std::nan(""))};
    it->second[species - 1][vertex] = rho;
  }
  if (by_time.empty()) fail(ErrorCode::kSizeMismatch, "trajectory CSV has no rows");
  Trajectory traj;
  for (auto& [t, state] : by_time) {
    for (int i = 0; i < 2; ++i) {
      for (double v : state[i]) {
        if (std::isnan(v)) fail(ErrorCode::kSizeMismatch, "trajectory CSV is missing entries");
      }
    }
    traj.times.push_back(t);
    traj.node_fluxes.push_back(upwind_flux(state, system));
    traj.states.push_back(std::move(state));
  }
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    EdgeFluxPair avg;
    for (int i = 0; i < 2; ++i) avg[i] = 0.5 * (traj.node_fluxes[k][i] + traj.node_fluxes[k + 1][i]);
    traj.interval_fluxes.push_back(std::move(avg));
  }
  return traj;
}

std::string run_summary_json(const RunConfig& config, const Trajectory& trajectory, const System& system,
                             const Projection* projection) {
  const auto energies = energy_series(trajectory, system);
  const DeGiorgiReport dg = de_giorgi(trajectory, system);
  const ConservationReport cons = conservation(trajectory, system);
  json j = {{"version", version()},
            {"config", config_to_json(config)},
            {"final_time", trajectory.times.back()},
            {"samples", trajectory.size()},
            {"accepted_steps", trajectory.steps.size()},
            {"rejected_error", trajectory.rejected_error},
            {"rejected_guard", trajectory.rejected_guard},
            {"flux_evaluations", trajectory.flux_evaluations},
            {"energy_start", energies.front()},
            {"energy_end", energies.back()},
            {"g_t", dg.g_t},
            {"dissipation_integral", dg.dissipation_integral},
            {"velocity_integral", dg.velocity_integral},
            {"conservation", conservation_json(cons)},
            {"monotonicity", monotonicity_json(energy_monotonicity(trajectory, system, config.integrator))}};
  if (projection) {
    j["projection"] = {{"mode", projection_mode_name(projection->mode)},
                       {"mass_drift", {projection->mass_drift[0], projection->mass_drift[1]}}};
  }
  return j.dump(2);
}

DiagnosisReport diagnose(const Trajectory& trajectory, const System& system, const IntegratorOptions& options) {
  DiagnosisReport r;
  r.de_giorgi = de_giorgi(trajectory, system);
  r.chain_rule_residual = chain_rule_residual(trajectory, system);
  r.monotonicity = energy_monotonicity(trajectory, system, options);
  r.conservation = conservation(trajectory, system);
  return r;
}

std::string diagnosis_json(const DiagnosisReport& r) {
  json j = {{"version", version()},
            {"energy_start", r.de_giorgi.energy_start},
            {"energy_end", r.de_giorgi.energy_end},
            {"dissipation_integral", r.de_giorgi.dissipation_integral},
            {"velocity_integral", r.de_giorgi.velocity_integral},
            {"velocity_integral_kind", "action-based upper bound"},
            {"g_t", r.de_giorgi.g_t},
            {"chain_rule_residual", r.chain_rule_residual},
            {"monotonicity", monotonicity_json(r.monotonicity)},
            {"conservation", conservation_json(r.conservation)}};
  return j.dump(2);
}

std::string diagnosis_csv(const Trajectory& trajectory, const System& system) {
  std::string out = "t,energy,dissipation,action\n";
  for (std::size_t n = 0; n < trajectory.size(); ++n) {
    const auto& s = trajectory.states[n];
    append(out, trajectory.times[n]);
    out += ',';
    append(out, energy(s, system.kernels, system.graph));
    out += ',';
    append(out, dissipation(s, system));
    out += ',';
    append(out, action(system.graph, s, trajectory.node_fluxes[n], system.mobility, system.kernels.beta(),
                       system.exponents)
                    .total);
    out += '\n';
  }
  return out;
}

std::string transport_json(const TransportResult& result, bool converged) {
  json j = {{"version", version()},
            {"T", result.value},
            {"objective", result.certificate.objective},
            {"converged", converged},
            {"steps", result.path.intervals()},
            {"quadrature_nodes", result.path.quadrature_nodes},
            {"certificate", certificate_json(result.certificate)}};
  return j.dump(2);
}

std::string path_json(const RunConfig& config, const TransportResult& result) {
  const DiscretePath& path = result.path;
  json j = {{"version", version()},
            {"config", config_to_json(config)},
            {"T", result.value},
            {"certificate", certificate_json(result.certificate)},
            {"quadrature_nodes", path.quadrature_nodes},
            {"times", path.times},
            {"rho1", rows(path.states, 0)},
            {"rho2", rows(path.states, 1)},
            {"flux1", flux_rows(path.fluxes, 0)},
            {"flux2", flux_rows(path.fluxes, 1)}};
  return j.dump();
}

std::string path_csv(const DiscretePath& path) {
  std::string out = "t,species,vertex,density\n";
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    for (int i = 0; i < 2; ++i) {
      const NodeField& rho = path.states[k][i];
      for (std::size_t l = 0; l < rho.size(); ++l) {
        append(out, path.times[k]);
        out += ',' + std::to_string(i + 1) + ',' + std::to_string(l) + ',';
        append(out, rho[l]);
        out += '\n';
      }
    }
  }
  return out;
}

std::string geodesic_profile_json(const std::string& path_text) {
  const json j = parse_json(path_text, "path file");
  check_keys(j, "$", {"version", "config", "T", "certificate", "quadrature_nodes", "times", "rho1", "rho2",
                      "flux1", "flux2"});
  for (const char* key : {"config", "times", "rho1", "rho2", "flux1", "flux2"}) {
    if (!j.contains(key)) schema_error(std::string("$.") + key, "missing");
  }
  const RunConfig config = config_from_json(j["config"]);
  const System system = build_system(config);
  DiscretePath path;
  path.times = numbers(j["times"], "$.times");
  if (path.times.size() < 2) fail(ErrorCode::kSizeMismatch, "$.times: a path needs at least two states");
  path.states = read_states(j, "rho1", "rho2", path.times.size(), system.graph.num_vertices());
  path.fluxes = read_fluxes(j, "flux1", "flux2", path.times.size() - 1, system.graph.num_edges());
  if (j.contains("quadrature_nodes")) {
    path.quadrature_nodes = static_cast<int>(count(j["quadrature_nodes"], "$.quadrature_nodes"));
  }
  const Beta& beta = system.kernels.beta();
  const auto profile = geodesic_profile(path, system.graph, system.mobility, beta, system.exponents);
  double mean = 0.0;
  for (double a : profile) mean += a;
  mean /= static_cast<double>(profile.size());
  double worst = 0.0;
  for (double a : profile) worst = std::max(worst, std::abs(a - mean));
  const double total = path_action(path, system.graph, system.mobility, beta, system.exponents);
  json out = {{"version", version()},
              {"intervals", profile},
              {"mean", mean},
              {"max_relative_deviation", mean > 0.0 ? worst / mean : 0.0},
              {"path_action", total},
              {"T", std::pow(total, 1.0 / system.exponents.p())}};
  return out.dump(2);
}

std::string validation_json(const RunConfig& config) {
  const System system = build_system(config);
  const FiniteGraph& graph = system.graph;
  const AssumptionReport a = check_assumptions(graph, system.exponents);
  json bc = json::array();
  for (const BcSample& s : a.bc_profile) bc.push_back({{"epsilon", s.epsilon}, {"value", s.value}});
  bool ok = true;
  json mob = {{"name", system.mobility.name()},
              {"R", finite_or_null(system.mobility.r_max())},
              {"S", finite_or_null(system.mobility.s_max())}};
  try {
    const ValidationReport v = validate_mobility(system.mobility, 33);
    mob["admissible"] = true;
    mob["samples"] = v.samples;
    mob["uniformly_sublinear"] = v.classification.uniformly_sublinear;
    mob["bounded_thresholds"] = v.classification.bounded_thresholds;
    mob["vanishing_iff_source_zero"] = v.classification.vanishing_iff_source_zero;
    mob["support_condition"] = v.classification.condition_a();
  } catch (const Error& e) {
    ok = false;
    mob["admissible"] = false;
    mob["error_code"] = std::string(error_code_name(e.code()));
    mob["error"] = e.what();
  }
  json j = {{"version", version()},
            {"vertices", graph.num_vertices()},
            {"edges", graph.num_edges()},
            {"dimension", graph.dimension()},
            {"total_weight", graph.total_weight()},
            {"assumptions",
             {{"c_mu", a.c_mu}, {"c_eta", a.c_eta}, {"c_eta_prime", a.c_eta_prime}, {"bc_profile", bc}}},
            {"mobility", mob},
            {"kernels",
             {{"beta", {system.kernels.raw_beta()[0], system.kernels.raw_beta()[1]}},
              {"beta_folded", {system.kernels.beta()[0], system.kernels.beta()[1]}},
              {"cross_ratio", system.kernels.cross_ratio()},
              {"growth_constant_estimate", system.kernels.growth_constant_estimate()},
              {"max_abs", system.kernels.max_abs()}}},
            {"ok", ok}};
  return j.dump(2);
}

std::string harness_json(const HarnessReport& r) {
  json failures = json::array();
  for (const PropertyFailure& f : r.failures) {
    failures.push_back({{"sample", f.sample},
                        {"sample_seed", f.sample_seed},
                        {"size", f.size},
                        {"shrunk_size", f.shrunk_size},
                        {"violation", f.violation},
                        {"detail", f.detail}});
  }
  json j = {{"version", version()},
            {"suite", r.suite},
            {"seed", r.seed},
            {"samples", r.samples},
            {"checks", r.checks},
            {"worst_margin", finite_or_null(r.worst_margin)},
            {"failures", failures},
            {"passed", r.passed()}};
  if (!r.note.empty()) j["note"] = r.note;
  return j.dump(2);
}

namespace {

double normal_quantile(double u) {
  // Bisection on the CDF; plenty for quantile grids of a few thousand points.
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> quantile_points(const DensityRecipe& recipe, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    x[k] = recipe.family == DensityFamily::kGaussian ? recipe.location + recipe.scale * normal_quantile(u)
                                                     : recipe.location + recipe.scale * u;
  }
  return x;
}

RefinementPlan parse_plan(const std::string& source) {
  const json j = parse_json(source, "plan");
  check_keys(j, "$", {"description", "ladder", "density", "eta", "initial", "reference_atoms", "projection",
                      "horizon"});
  RefinementPlan plan;
  if (!j.contains("ladder")) schema_error("$.ladder", "missing");
  if (!j["ladder"].is_array()) schema_error("$.ladder", "expected an array of vertex counts");
  for (std::size_t i = 0; i < j["ladder"].size(); ++i) {
    plan.ladder.push_back(count(j["ladder"][i], "$.ladder[" + std::to_string(i) + "]"));
  }
  if (plan.ladder.empty()) fail(ErrorCode::kSemanticError, "$.ladder: needs at least one level");
  if (plan.ladder.front() < 2) fail(ErrorCode::kSemanticError, "$.ladder: levels need at least two vertices");
  for (std::size_t i = 1; i < plan.ladder.size(); ++i) {
    if (plan.ladder[i] <= plan.ladder[i - 1]) {
      fail(ErrorCode::kSemanticError, "$.ladder: vertex counts must increase strictly");
    }
  }
  if (j.contains("density")) {
    const json& d = j["density"];
    check_keys(d, "$.density", {"family", "mean", "sd", "lower", "upper"});
    const std::string family = d.contains("family") ? text(d["family"], "$.density.family") : "gaussian";
    if (family == "gaussian") {
      plan.density.family = DensityFamily::kGaussian;
      plan.density.location = d.contains("mean") ? number(d["mean"], "$.density.mean") : 0.0;
      plan.density.scale = d.contains("sd") ? number(d["sd"], "$.density.sd") : 1.0;
    } else if (family == "uniform") {
      plan.density.family = DensityFamily::kUniform;
      const double lo = d.contains("lower") ? number(d["lower"], "$.density.lower") : 0.0;
      const double hi = d.contains("upper") ? number(d["upper"], "$.density.upper") : 1.0;
      plan.density.location = lo;
      plan.density.scale = hi - lo;
    } else {
      schema_error("$.density.family", "expected gaussian or uniform");
    }
    if (!(plan.density.scale > 0.0)) fail(ErrorCode::kSemanticError, "$.density: spread must be positive");
  }
  if (j.contains("eta")) {
    const json& e = j["eta"];
    check_keys(e, "$.eta", {"name", "params"});
    plan.eta.name = e.contains("name") ? text(e["name"], "$.eta.name") : "gaussian";
    plan.eta.params = e.contains("params") ? params(e["params"], "$.eta.params") : Params{};
    if (plan.eta.name == "gaussian") {
      if (!plan.eta.params.count("sigma")) schema_error("$.eta.params.sigma", "missing");
    } else if (plan.eta.name == "constant") {
      plan.eta.params.try_emplace("value", 1.0);
    } else if (plan.eta.name == "cutoff") {
      if (!plan.eta.params.count("radius")) schema_error("$.eta.params.radius", "missing");
      plan.eta.params.try_emplace("value", 1.0);
    } else {
      schema_error("$.eta.name", "unknown eta preset '" + plan.eta.name + "'");
    }
  }
  if (j.contains("initial")) {
    check_keys(j["initial"], "$.initial", {"density1", "density2"});
    if (j["initial"].contains("density1")) plan.initial[0] = text(j["initial"]["density1"], "$.initial.density1");
    if (j["initial"].contains("density2")) plan.initial[1] = text(j["initial"]["density2"], "$.initial.density2");
  }
  for (const auto& e : plan.initial) Expression::parse(e, {"x"});
  if (j.contains("reference_atoms")) plan.reference_atoms = count(j["reference_atoms"], "$.reference_atoms");
  if (plan.reference_atoms == 0) fail(ErrorCode::kSemanticError, "$.reference_atoms: must be positive");
  if (j.contains("projection")) {
    const std::string mode = text(j["projection"], "$.projection");
    if (mode == "auto") {
      plan.projection = ProjectionMode::kAuto;
    } else if (mode == "plan") {
      plan.projection = ProjectionMode::kTransportPlan;
    } else if (mode == "nearest") {
      plan.projection = ProjectionMode::kNearestVertex;
    } else {
      schema_error("$.projection", "projection must be auto, plan or nearest");
    }
  }
  if (j.contains("horizon")) {
    plan.horizon = number(j["horizon"], "$.horizon");
    if (!(*plan.horizon > 0.0)) fail(ErrorCode::kSemanticError, "$.horizon: must be positive");
  }
  return plan;
}

bool StudyReport::gaps_decreasing() const {
  if (gaps.size() < 2) return false;
  const double a = gaps[gaps.size() - 2];
  const double b = gaps.back();
  return std::isfinite(a) && std::isfinite(b) && b < a;
}

namespace {

PairFunction plan_eta(const EtaPreset& eta) {
  if (eta.name == "gaussian") return eta_presets::gaussian(eta.params.at("sigma"));
  if (eta.name == "cutoff") return eta_presets::cutoff(eta.params.at("radius"), eta.params.at("value"));
  return eta_presets::constant(eta.params.at("value"));
}

AtomicSample reference_sample(const RefinementPlan& plan) {
  const auto x = quantile_points(plan.density, plan.reference_atoms);
  const double w = 1.0 / static_cast<double>(x.size());
  AtomicSample s;
  s.base_mass.assign(x.size(), w);
  for (double xi : x) s.points.push_back({xi});
  for (std::size_t i = 0; i < 2; ++i) {
    const Expression e = Expression::parse(plan.initial[i], {"x"});
    double total = 0.0;
    for (double xi : x) {
      const double v = e.evaluate(std::span<const double>(&xi, 1));
      if (!(v >= 0.0) || !std::isfinite(v)) {
        fail(ErrorCode::kSemanticError, "initial density " + std::to_string(i + 1) +
                                            " must be finite and nonnegative on the sample");
      }
      s.density[i].push_back(v);
      total += v * w;
    }
    if (!(total > 0.0)) fail(ErrorCode::kSemanticError, "initial density " + std::to_string(i + 1) + " vanishes");
    for (double& v : s.density[i]) v /= total;
  }
  return s;
}

double final_gap(const LevelReport& a, const LevelReport& b) {
  auto as_points = [](const std::vector<double>& x) {
    std::vector<Point> out;
    for (double v : x) out.push_back({v});
    return out;
  };
  const auto pa = as_points(a.points);
  const auto pb = as_points(b.points);
  double gap = 0.0;
  for (int i = 0; i < 2; ++i) {
    std::vector<double> ma(a.points.size()), mb(b.points.size());
    for (std::size_t l = 0; l < ma.size(); ++l) ma[l] = a.final_state[i][l] * a.weights[l];
    for (std::size_t l = 0; l < mb.size(); ++l) mb[l] = b.final_state[i][l] * b.weights[l];
    gap += w1_atomic(pa, ma, pb, mb);
  }
  return gap;
}

}  // namespace

StudyReport run_refinement_study(const RefinementPlan& plan, const RunConfig& config) {
  StudyReport report;
  report.horizon = plan.horizon.value_or(config.horizon);
  const AtomicSample sample = reference_sample(plan);
  const Mobility mobility = build_mobility(config.mobility);
  std::array<Kernel, 4> kernels{build_kernel(config.kernels.kernels[0]), build_kernel(config.kernels.kernels[1]),
                                build_kernel(config.kernels.kernels[2]), build_kernel(config.kernels.kernels[3])};
  const Exponents exponents = Exponents::from_p(config.p);
  const PairFunction eta = plan_eta(plan.eta);

  report.levels.resize(plan.ladder.size());
  parallel_for(plan.ladder.size(), [&](std::size_t idx) {
    LevelReport& level = report.levels[idx];
    level.vertices = plan.ladder[idx];
    level.points = quantile_points(plan.density, level.vertices);
    level.weights.assign(level.vertices, 1.0 / static_cast<double>(level.vertices));
    try {
      std::vector<Point> pts;
      for (double x : level.points) pts.push_back({x});
      FiniteGraph graph = build_graph(std::move(pts), level.weights, eta);
      const Projection proj = project_initial(sample, graph, plan.projection);
      level.projection = proj.mode;
      KernelSet ks(graph, kernels[0], kernels[1], kernels[2], kernels[3], config.kernels.beta);
      const System system{std::move(graph), mobility, std::move(ks), exponents};
      validate_state(proj.state, system.graph, mobility.density_threshold());
      const Trajectory traj = integrate(proj.state, report.horizon, system, config.integrator);
      level.final_state = traj.states.back();
      level.times = traj.times;
      level.energies = energy_series(traj, system);
      level.g_t = de_giorgi(traj, system).g_t;
      level.monotonicity = energy_monotonicity(traj, system, config.integrator);
      level.conservation = conservation(traj, system);
      level.steps = traj.steps.size();
      level.ok = true;
    } catch (const Error& e) {
      level.ok = false;
      level.error = e.what();
      level.error_code = std::string(error_code_name(e.code()));
    }
  });

  for (std::size_t idx = 1; idx < report.levels.size(); ++idx) {
    const LevelReport& a = report.levels[idx - 1];
    const LevelReport& b = report.levels[idx];
    report.gaps.push_back(a.ok && b.ok ? final_gap(a, b) : std::nan(""));
  }
  return report;
}

std::string study_json(const StudyReport& report, const RefinementPlan& plan, const RunConfig& config) {
  json levels = json::array();
  for (const LevelReport& l : report.levels) {
    json level = {{"vertices", l.vertices}, {"ok", l.ok}, {"points", l.points}};
    if (!l.ok) {
      level["error"] = l.error;
      level["error_code"] = l.error_code;
    } else {
      level["projection"] = projection_mode_name(l.projection);
      level["steps"] = l.steps;
      level["g_t"] = l.g_t;
      level["rho1"] = l.final_state[0].values();
      level["rho2"] = l.final_state[1].values();
      level["times"] = l.times;
      level["energies"] = l.energies;
      level["monotonicity"] = monotonicity_json(l.monotonicity);
      level["conservation"] = conservation_json(l.conservation);
    }
    levels.push_back(std::move(level));
  }
  json gaps = json::array();
  for (double g : report.gaps) gaps.push_back(finite_or_null(g));
  json ladder = plan.ladder;
  json j = {{"version", version()},
            {"config", config_to_json(config)},
            {"plan",
             {{"ladder", ladder},
              {"density",
               {{"family", plan.density.family == DensityFamily::kGaussian ? "gaussian" : "uniform"},
                {"location", plan.density.location},
                {"scale", plan.density.scale}}},
              {"eta", {{"name", plan.eta.name}, {"params", plan.eta.params}}},
              {"initial", {{"density1", plan.initial[0]}, {"density2", plan.initial[1]}}},
              {"reference_atoms", plan.reference_atoms},
              {"projection", projection_mode_name(plan.projection)}}},
            {"horizon", report.horizon},
            {"levels", levels},
            {"gaps", gaps},
            {"gaps_decreasing", report.gaps_decreasing()}};
  return j.dump(2);
}

}  // namespace graphflow
