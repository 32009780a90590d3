#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/io.hpp"
#include "io_json.hpp"

namespace graphflow {

#ifndef GRAPHFLOW_VERSION
#define GRAPHFLOW_VERSION "unversioned"
#endif

const char* version() noexcept { return GRAPHFLOW_VERSION; }

const char* projection_mode_name(ProjectionMode mode) noexcept {
  switch (mode) {
    case ProjectionMode::kAuto: return "auto";
    case ProjectionMode::kTransportPlan: return "plan";
    case ProjectionMode::kNearestVertex: return "nearest";
  }
  return "auto";
}

namespace detail {

void schema_error(const std::string& path, const std::string& what) {
  fail(ErrorCode::kSchemaError, path + ": " + what);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) schema_error(path, "expected an object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) schema_error(path + "." + item.key(), "unknown key");
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

double number_or_infinity(const json& j, const std::string& path) {
  if (j.is_null()) return kInfinity;
  return number(j, path);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::size_t count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::size_t>(j.get<long long>());
  schema_error(path, "expected a nonnegative integer");
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) schema_error(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) schema_error(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Point> points(const json& j, const std::string& path) {
  if (!j.is_array()) schema_error(path, "expected an array of points");
  std::vector<Point> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    if (j[i].is_number()) {
      out.push_back({j[i].get<double>()});
    } else {
      out.push_back(numbers(j[i], at));
    }
  }
  return out;
}

json points_json(const std::vector<Point>& pts) {
  json out = json::array();
  for (const Point& x : pts) out.push_back(x);
  return out;
}

Params params(const json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object of numbers");
  Params out;
  for (const auto& item : j.items()) out[item.key()] = number(item.value(), path + "." + item.key());
  return out;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kSchemaError, "$: " + what + " is not valid JSON (" + e.what() + ")");
  }
}

}  // namespace detail

using namespace detail;

namespace {

ProjectionMode parse_projection(const json& j, const std::string& path) {
  const std::string name = text(j, path);
  if (name == "auto") return ProjectionMode::kAuto;
  if (name == "plan") return ProjectionMode::kTransportPlan;
  if (name == "nearest") return ProjectionMode::kNearestVertex;
  schema_error(path, "projection must be auto, plan or nearest");
}

// Named parameters with defaults; anything not listed is rejected.
Params resolve_params(const Params& given, const std::vector<std::pair<const char*, std::optional<double>>>& spec,
                      const std::string& path) {
  Params out;
  for (const auto& [key, value] : given) {
    const bool known = std::any_of(spec.begin(), spec.end(), [&](const auto& s) { return key == s.first; });
    if (!known) schema_error(path + "." + key, "unknown parameter");
  }
  for (const auto& [key, fallback] : spec) {
    auto it = given.find(key);
    if (it != given.end()) {
      out[key] = it->second;
    } else if (fallback) {
      out[key] = *fallback;
    } else {
      schema_error(path + "." + key, "missing parameter");
    }
  }
  return out;
}

EtaPreset parse_eta_preset(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "params"});
  if (!j.contains("name")) schema_error(path + ".name", "missing");
  EtaPreset preset;
  preset.name = text(j["name"], path + ".name");
  const Params given = j.contains("params") ? params(j["params"], path + ".params") : Params{};
  const std::string at = path + ".params";
  if (preset.name == "constant") {
    preset.params = resolve_params(given, {{"value", 1.0}}, at);
  } else if (preset.name == "gaussian") {
    preset.params = resolve_params(given, {{"sigma", std::nullopt}}, at);
  } else if (preset.name == "cutoff") {
    preset.params = resolve_params(given, {{"radius", std::nullopt}, {"value", 1.0}}, at);
  } else {
    schema_error(path + ".name", "unknown eta preset '" + preset.name + "'");
  }
  return preset;
}

GraphSpec parse_graph(const json& j, const std::string& path) {
  check_keys(j, path, {"points", "weights", "generate", "eta_matrix", "eta_preset"});
  GraphSpec spec;
  if (j.contains("points") == j.contains("generate")) {
    schema_error(path, "give exactly one of points and generate");
  }
  if (j.contains("points")) {
    spec.points = points(j["points"], path + ".points");
    if (j.contains("weights")) {
      spec.weights = numbers(j["weights"], path + ".weights");
    } else {
      spec.weights.assign(spec.points.size(), spec.points.empty() ? 0.0 : 1.0 / static_cast<double>(spec.points.size()));
    }
  } else {
    if (j.contains("weights")) schema_error(path + ".weights", "generated graphs use equal weights");
    const json& g = j["generate"];
    check_keys(g, path + ".generate", {"vertices", "dimension"});
    if (!g.contains("vertices")) schema_error(path + ".generate.vertices", "missing");
    GraphGenerator gen;
    gen.vertices = count(g["vertices"], path + ".generate.vertices");
    if (g.contains("dimension")) gen.dimension = count(g["dimension"], path + ".generate.dimension");
    if (gen.vertices == 0 || gen.dimension == 0) {
      fail(ErrorCode::kSemanticError, path + ".generate: vertices and dimension must be positive");
    }
    spec.generator = gen;
  }
  if (j.contains("eta_matrix") && j.contains("eta_preset")) {
    schema_error(path, "give at most one of eta_matrix and eta_preset");
  }
  if (j.contains("eta_matrix")) {
    const json& m = j["eta_matrix"];
    if (!m.is_array()) schema_error(path + ".eta_matrix", "expected an array of rows");
    for (std::size_t r = 0; r < m.size(); ++r) {
      spec.eta_matrix.push_back(numbers(m[r], path + ".eta_matrix[" + std::to_string(r) + "]"));
    }
  } else if (j.contains("eta_preset")) {
    spec.eta_preset = parse_eta_preset(j["eta_preset"], path + ".eta_preset");
  } else {
    spec.eta_preset = EtaPreset{"constant", {{"value", 1.0}}};
  }
  return spec;
}

json graph_json(const GraphSpec& spec) {
  json j = json::object();
  if (spec.generator) {
    j["generate"] = {{"vertices", spec.generator->vertices}, {"dimension", spec.generator->dimension}};
  } else {
    j["points"] = points_json(spec.points);
    j["weights"] = spec.weights;
  }
  if (spec.eta_preset) {
    j["eta_preset"] = {{"name", spec.eta_preset->name}, {"params", spec.eta_preset->params}};
  } else {
    j["eta_matrix"] = spec.eta_matrix;
  }
  return j;
}

const std::vector<std::pair<const char*, std::optional<double>>>& mobility_params(const std::string& name,
                                                                                  const std::string& path) {
  static const std::vector<std::pair<const char*, std::optional<double>>> none;
  static const std::vector<std::pair<const char*, std::optional<double>>> volume{{"S", 1.0}};
  if (name == "linear" || name == "saturating" || name == "geometric") return none;
  if (name == "volume_filling") return volume;
  schema_error(path, "unknown mobility preset '" + name + "'");
}

MobilitySpec parse_mobility(const json& j, const std::string& path) {
  check_keys(j, path, {"preset", "params", "expression", "R", "S"});
  MobilitySpec spec;
  if (j.contains("expression")) {
    if (j.contains("preset") || j.contains("params")) {
      schema_error(path, "give either an expression or a preset");
    }
    spec.preset.clear();
    spec.expression = text(j["expression"], path + ".expression");
    if (j.contains("R")) spec.r_max = number_or_infinity(j["R"], path + ".R");
    if (j.contains("S")) spec.s_max = number_or_infinity(j["S"], path + ".S");
    return spec;
  }
  if (j.contains("R") || j.contains("S")) schema_error(path, "R and S belong to expression mobilities");
  if (j.contains("preset")) spec.preset = text(j["preset"], path + ".preset");
  const Params given = j.contains("params") ? params(j["params"], path + ".params") : Params{};
  spec.params = resolve_params(given, mobility_params(spec.preset, path + ".preset"), path + ".params");
  return spec;
}

json mobility_json(const MobilitySpec& spec) {
  if (!spec.expression.empty()) {
    return {{"expression", spec.expression}, {"R", finite_or_null(spec.r_max)}, {"S", finite_or_null(spec.s_max)}};
  }
  return {{"preset", spec.preset}, {"params", spec.params}};
}

const std::vector<std::pair<const char*, std::optional<double>>>& kernel_params(const std::string& name,
                                                                                const std::string& path) {
  using List = std::vector<std::pair<const char*, std::optional<double>>>;
  static const List plain{{"scale", 1.0}};
  static const List gaussian{{"sigma", std::nullopt}, {"scale", 1.0}};
  static const List morse{{"attraction", std::nullopt},
                          {"attraction_length", std::nullopt},
                          {"repulsion", std::nullopt},
                          {"repulsion_length", std::nullopt},
                          {"scale", 1.0}};
  if (name == "zero" || name == "distance" || name == "quadratic") return plain;
  if (name == "gaussian_well") return gaussian;
  if (name == "morse_like") return morse;
  schema_error(path, "unknown kernel preset '" + name + "'");
}

KernelSpec parse_kernel(const json& j, const std::string& path) {
  check_keys(j, path, {"preset", "params", "expression"});
  KernelSpec spec;
  if (j.contains("expression")) {
    if (j.contains("preset") || j.contains("params")) {
      schema_error(path, "give either an expression or a preset");
    }
    spec.preset.clear();
    spec.expression = text(j["expression"], path + ".expression");
    return spec;
  }
  if (j.contains("preset")) spec.preset = text(j["preset"], path + ".preset");
  const Params given = j.contains("params") ? params(j["params"], path + ".params") : Params{};
  spec.params = resolve_params(given, kernel_params(spec.preset, path + ".preset"), path + ".params");
  return spec;
}

json kernel_json(const KernelSpec& spec) {
  if (!spec.expression.empty()) return {{"expression", spec.expression}};
  return {{"preset", spec.preset}, {"params", spec.params}};
}

constexpr std::array<const char*, 4> kKernelNames{"K11", "K12", "K21", "K22"};

KernelsSpec parse_kernels(const json& j, const std::string& path) {
  check_keys(j, path, {"K11", "K12", "K21", "K22", "beta"});
  KernelsSpec spec;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string at = path + "." + kKernelNames[k];
    spec.kernels[k] = j.contains(kKernelNames[k]) ? parse_kernel(j[kKernelNames[k]], at)
                                                   : parse_kernel(json::object(), at);
  }
  if (j.contains("beta")) {
    const auto b = numbers(j["beta"], path + ".beta");
    if (b.size() != 2) schema_error(path + ".beta", "expected two entries");
    spec.beta = {b[0], b[1]};
  }
  if (!(spec.beta[0] > 0.0) || !(spec.beta[1] > 0.0) || !std::isfinite(spec.beta[0]) ||
      !std::isfinite(spec.beta[1])) {
    fail(ErrorCode::kSemanticError, path + ".beta: beta must be positive componentwise");
  }
  return spec;
}

json kernels_json(const KernelsSpec& spec) {
  json j = json::object();
  for (std::size_t k = 0; k < 4; ++k) j[kKernelNames[k]] = kernel_json(spec.kernels[k]);
  j["beta"] = {spec.beta[0], spec.beta[1]};
  return j;
}

InitialSpec parse_initial(const json& j, const std::string& path) {
  check_keys(j, path, {"rho1", "rho2", "atoms", "projection"});
  InitialSpec spec;
  if (j.contains("atoms")) {
    if (j.contains("rho1") || j.contains("rho2")) schema_error(path, "give either densities or atoms");
    const json& a = j["atoms"];
    const std::string at = path + ".atoms";
    check_keys(a, at, {"points", "base_mass", "density1", "density2"});
    for (const char* key : {"points", "base_mass", "density1", "density2"}) {
      if (!a.contains(key)) schema_error(at + "." + key, "missing");
    }
    AtomicSample sample;
    sample.points = points(a["points"], at + ".points");
    sample.base_mass = numbers(a["base_mass"], at + ".base_mass");
    sample.density[0] = numbers(a["density1"], at + ".density1");
    sample.density[1] = numbers(a["density2"], at + ".density2");
    spec.atoms = std::move(sample);
    if (j.contains("projection")) spec.projection = parse_projection(j["projection"], path + ".projection");
    return spec;
  }
  if (j.contains("projection")) schema_error(path + ".projection", "only meaningful with atoms");
  if (j.contains("rho1")) spec.densities[0] = numbers(j["rho1"], path + ".rho1");
  if (j.contains("rho2")) spec.densities[1] = numbers(j["rho2"], path + ".rho2");
  return spec;
}

json initial_json(const InitialSpec& spec) {
  if (spec.atoms) {
    const AtomicSample& a = *spec.atoms;
    return {{"atoms",
             {{"points", points_json(a.points)},
              {"base_mass", a.base_mass},
              {"density1", a.density[0]},
              {"density2", a.density[1]}}},
            {"projection", projection_mode_name(spec.projection)}};
  }
  json j = json::object();
  j["rho1"] = spec.densities[0];
  j["rho2"] = spec.densities[1];
  return j;
}

IntegratorOptions parse_integrator(const json& j, const std::string& path) {
  check_keys(j, path, {"rel_tol", "abs_tol", "max_dt", "initial_dt", "min_dt", "max_steps", "guard"});
  IntegratorOptions o;
  if (j.contains("rel_tol")) o.rel_tol = number(j["rel_tol"], path + ".rel_tol");
  if (j.contains("abs_tol")) o.abs_tol = number(j["abs_tol"], path + ".abs_tol");
  if (j.contains("max_dt")) o.max_dt = number_or_infinity(j["max_dt"], path + ".max_dt");
  if (j.contains("initial_dt")) o.initial_dt = number(j["initial_dt"], path + ".initial_dt");
  if (j.contains("min_dt")) o.min_dt = number(j["min_dt"], path + ".min_dt");
  if (j.contains("max_steps")) o.max_steps = count(j["max_steps"], path + ".max_steps");
  if (j.contains("guard")) o.guard = number(j["guard"], path + ".guard");
  if (!(o.rel_tol >= 0.0) || !(o.abs_tol >= 0.0) || o.rel_tol + o.abs_tol <= 0.0) {
    fail(ErrorCode::kSemanticError, path + ": tolerances must be nonnegative and not both zero");
  }
  if (!(o.initial_dt > 0.0) || !(o.min_dt > 0.0) || !(o.max_dt > 0.0)) {
    fail(ErrorCode::kSemanticError, path + ": step sizes must be positive");
  }
  return o;
}

json integrator_json(const IntegratorOptions& o) {
  return {{"rel_tol", o.rel_tol},       {"abs_tol", o.abs_tol}, {"max_dt", finite_or_null(o.max_dt)},
          {"initial_dt", o.initial_dt}, {"min_dt", o.min_dt},   {"max_steps", o.max_steps},
          {"guard", o.guard}};
}

void parse_solver(const json& j, const std::string& path, SolverOptions& o, std::size_t& steps) {
  check_keys(j, path, {"eps_c", "eps_o", "max_iterations", "smoothing", "quadrature_nodes", "memory", "steps"});
  if (j.contains("eps_c")) o.eps_c = number(j["eps_c"], path + ".eps_c");
  if (j.contains("eps_o")) o.eps_o = number(j["eps_o"], path + ".eps_o");
  if (j.contains("max_iterations")) o.max_iterations = count(j["max_iterations"], path + ".max_iterations");
  if (j.contains("smoothing")) o.smoothing = numbers(j["smoothing"], path + ".smoothing");
  if (j.contains("quadrature_nodes")) {
    o.quadrature_nodes = static_cast<int>(count(j["quadrature_nodes"], path + ".quadrature_nodes"));
  }
  if (j.contains("memory")) o.memory = count(j["memory"], path + ".memory");
  if (j.contains("steps")) steps = count(j["steps"], path + ".steps");
  if (o.quadrature_nodes < 1 || o.quadrature_nodes > 5) {
    fail(ErrorCode::kSemanticError, path + ".quadrature_nodes: supported range is 1..5");
  }
  if (o.smoothing.empty()) fail(ErrorCode::kSemanticError, path + ".smoothing: needs at least one level");
  for (double e : o.smoothing) {
    if (!(e > 0.0)) fail(ErrorCode::kSemanticError, path + ".smoothing: levels must be positive");
  }
  if (!(o.eps_c > 0.0) || !(o.eps_o > 0.0)) {
    fail(ErrorCode::kSemanticError, path + ": solver tolerances must be positive");
  }
}

json solver_json(const SolverOptions& o, std::size_t steps) {
  return {{"eps_c", o.eps_c},
          {"eps_o", o.eps_o},
          {"max_iterations", o.max_iterations},
          {"smoothing", o.smoothing},
          {"quadrature_nodes", o.quadrature_nodes},
          {"memory", o.memory},
          {"steps", steps}};
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

namespace detail {

json config_to_json(const RunConfig& c) {
  json j = json::object();
  j["description"] = c.description;
  if (!c.graph.empty()) j["graph"] = graph_json(c.graph);
  j["mobility"] = mobility_json(c.mobility);
  j["kernels"] = kernels_json(c.kernels);
  j["p"] = c.p;
  j["initial"] = initial_json(c.initial);
  j["horizon"] = c.horizon;
  j["integrator"] = integrator_json(c.integrator);
  j["solver"] = solver_json(c.solver, c.steps);
  j["output"] = {{"dir", c.output_dir}};
  j["seed"] = c.seed;
  return j;
}

RunConfig config_from_json(const json& j) {
  check_keys(j, "$", {"description", "graph", "mobility", "kernels", "p", "q", "initial", "horizon",
                      "integrator", "solver", "output", "seed"});
  RunConfig c;
  if (j.contains("description")) c.description = text(j["description"], "$.description");
  if (j.contains("graph")) c.graph = parse_graph(j["graph"], "$.graph");
  c.mobility = parse_mobility(j.contains("mobility") ? j["mobility"] : json::object(), "$.mobility");
  c.kernels = parse_kernels(j.contains("kernels") ? j["kernels"] : json::object(), "$.kernels");
  if (j.contains("p")) c.p = number(j["p"], "$.p");
  if (!(c.p > 1.0) || !std::isfinite(c.p)) fail(ErrorCode::kSemanticError, "$.p: p must lie in (1, inf)");
  if (j.contains("initial")) c.initial = parse_initial(j["initial"], "$.initial");
  if (j.contains("horizon")) c.horizon = number(j["horizon"], "$.horizon");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) {
    fail(ErrorCode::kSemanticError, "$.horizon: must be positive and finite");
  }
  if (j.contains("integrator")) c.integrator = parse_integrator(j["integrator"], "$.integrator");
  if (j.contains("solver")) parse_solver(j["solver"], "$.solver", c.solver, c.steps);
  if (j.contains("output")) {
    check_keys(j["output"], "$.output", {"dir"});
    if (j["output"].contains("dir")) c.output_dir = text(j["output"]["dir"], "$.output.dir");
  }
  if (j.contains("seed")) c.seed = count(j["seed"], "$.seed");

  // Build once so that semantic problems (kernel symmetry, graph
  // assumptions, expressions, initial mass) surface at load time.
  build_mobility(c.mobility);
  for (const KernelSpec& k : c.kernels.kernels) build_kernel(k);
  if (!c.graph.empty()) {
    const System system = build_system(c);
    initial_state(c, system.graph);
  }
  return c;
}

}  // namespace detail

RunConfig parse_config(const std::string& text) {
  return config_from_json(parse_json(text, "config"));
}

std::string emit_config(const RunConfig& config) { return config_to_json(config).dump(2); }

FiniteGraph build_graph(const RunConfig& config) {
  const GraphSpec& spec = config.graph;
  if (spec.empty()) fail(ErrorCode::kSchemaError, "$.graph: this command needs a graph");
  std::vector<Point> pts = spec.points;
  std::vector<double> weights = spec.weights;
  if (spec.generator) {
    std::uint64_t state = config.seed;
    const std::size_t n = spec.generator->vertices;
    pts.assign(n, Point(spec.generator->dimension));
    for (Point& x : pts) {
      for (double& c : x) c = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    }
    weights.assign(n, 1.0 / static_cast<double>(n));
  }
  EtaSpec eta;
  if (spec.eta_preset) {
    const Params& prm = spec.eta_preset->params;
    if (spec.eta_preset->name == "constant") {
      eta = eta_presets::constant(prm.at("value"));
    } else if (spec.eta_preset->name == "gaussian") {
      eta = eta_presets::gaussian(prm.at("sigma"));
    } else {
      eta = eta_presets::cutoff(prm.at("radius"), prm.at("value"));
    }
  } else {
    eta = spec.eta_matrix;
  }
  return build_graph(std::move(pts), std::move(weights), eta);
}

Mobility build_mobility(const MobilitySpec& spec) {
  if (!spec.expression.empty()) return Mobility::from_expression(spec.expression, spec.r_max, spec.s_max);
  if (spec.preset == "linear") return Mobility::linear();
  if (spec.preset == "saturating") return Mobility::saturating();
  if (spec.preset == "geometric") return Mobility::geometric();
  if (spec.preset == "volume_filling") return Mobility::volume_filling(spec.params.at("S"));
  fail(ErrorCode::kSchemaError, "$.mobility.preset: unknown preset '" + spec.preset + "'");
}

Kernel build_kernel(const KernelSpec& spec) {
  if (!spec.expression.empty()) return Kernel::from_expression(spec.expression);
  const Params& p = spec.params;
  Kernel k = Kernel::zero();
  if (spec.preset == "zero") {
    return k;
  } else if (spec.preset == "distance") {
    k = Kernel::distance();
  } else if (spec.preset == "quadratic") {
    k = Kernel::quadratic();
  } else if (spec.preset == "gaussian_well") {
    k = Kernel::gaussian_well(p.at("sigma"));
  } else if (spec.preset == "morse_like") {
    k = Kernel::morse_like(p.at("attraction"), p.at("attraction_length"), p.at("repulsion"),
                           p.at("repulsion_length"));
  } else {
    fail(ErrorCode::kSchemaError, "unknown kernel preset '" + spec.preset + "'");
  }
  const auto scale = p.find("scale");
  if (scale != p.end() && scale->second != 1.0) k = k.scaled(scale->second);
  return k;
}

System build_system(const RunConfig& config) {
  FiniteGraph graph = build_graph(config);
  const auto& ks = config.kernels.kernels;
  KernelSet kernels(graph, build_kernel(ks[0]), build_kernel(ks[1]), build_kernel(ks[2]), build_kernel(ks[3]),
                    config.kernels.beta);
  return System{std::move(graph), build_mobility(config.mobility), std::move(kernels),
                Exponents::from_p(config.p)};
}

Projection project_initial(const AtomicSample& sample, const FiniteGraph& graph, ProjectionMode mode) {
  const std::size_t atoms = sample.points.size();
  const std::size_t n = graph.num_vertices();
  if (sample.base_mass.size() != atoms || sample.density[0].size() != atoms || sample.density[1].size() != atoms) {
    fail(ErrorCode::kSizeMismatch, "atomic sample arrays have different lengths");
  }
  if (atoms == 0) fail(ErrorCode::kSizeMismatch, "atomic sample is empty");
  double base_total = 0.0;
  for (std::size_t a = 0; a < atoms; ++a) {
    if (sample.points[a].size() != graph.dimension()) {
      fail(ErrorCode::kSizeMismatch, "atom " + std::to_string(a) + " has the wrong dimension");
    }
    if (!(sample.base_mass[a] >= 0.0) || !std::isfinite(sample.base_mass[a])) {
      fail(ErrorCode::kInvalidArgument, "atom masses must be finite and nonnegative");
    }
    base_total += sample.base_mass[a];
  }
  if (!(base_total > 0.0)) fail(ErrorCode::kMassMismatch, "atomic sample carries no mass");
  for (int i = 0; i < 2; ++i) {
    double m = 0.0;
    for (std::size_t a = 0; a < atoms; ++a) {
      const double rho = sample.density[static_cast<std::size_t>(i)][a];
      if (!(rho >= 0.0) || !std::isfinite(rho)) {
        fail(ErrorCode::kInvalidArgument, "initial densities must be finite and nonnegative");
      }
      m += rho * sample.base_mass[a];
    }
    if (std::abs(m - 1.0) > 1e-6) {
      std::ostringstream os;
      os << "species " << i + 1 << " of the atomic sample has mass " << m << ", expected 1";
      fail(ErrorCode::kMassMismatch, os.str());
    }
  }

  if (mode == ProjectionMode::kAuto) {
    mode = atoms <= kPlanAtomLimit ? ProjectionMode::kTransportPlan : ProjectionMode::kNearestVertex;
  }

  std::array<std::vector<double>, 2> mass{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (mode == ProjectionMode::kTransportPlan) {
    // Normalize the vertex measure to the sample's total so the plan exists.
    std::vector<double> target(n);
    const double scale = base_total / graph.total_weight();
    for (std::size_t l = 0; l < n; ++l) target[l] = graph.weight(l) * scale;
    const auto plan = w1_plan(sample.points, sample.base_mass, graph.base().points, target);
    for (const PlanEntry& e : plan) {
      for (std::size_t i = 0; i < 2; ++i) mass[i][e.to] += sample.density[i][e.from] * e.mass;
    }
  } else {
    for (std::size_t a = 0; a < atoms; ++a) {
      std::size_t best = 0;
      double best_d = kInfinity;
      for (std::size_t l = 0; l < n; ++l) {
        const double d = distance(sample.points[a], graph.point(l));
        if (d < best_d) {  // strict: ties stay with the lower index
          best_d = d;
          best = l;
        }
      }
      for (std::size_t i = 0; i < 2; ++i) mass[i][best] += sample.density[i][a] * sample.base_mass[a];
    }
  }

  Projection out;
  out.mode = mode;
  for (std::size_t i = 0; i < 2; ++i) {
    double total = 0.0;
    for (double m : mass[i]) total += m;
    out.mass_drift[i] = total - 1.0;
    NodeField rho(n);
    for (std::size_t l = 0; l < n; ++l) rho[l] = mass[i][l] / total / graph.weight(l);
    out.state.rho[i] = std::move(rho);
  }
  return out;
}

SpeciesPairState initial_state(const RunConfig& config, const FiniteGraph& graph, Projection* projection) {
  const std::size_t n = graph.num_vertices();
  SpeciesPairState state;
  if (config.initial.atoms) {
    Projection p = project_initial(*config.initial.atoms, graph, config.initial.projection);
    state = p.state;
    if (projection) *projection = std::move(p);
  } else {
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& given = config.initial.densities[i];
      if (given.empty()) {
        state.rho[i] = NodeField(n, 1.0 / graph.total_weight());
      } else if (given.size() != n) {
        fail(ErrorCode::kSizeMismatch, "$.initial.rho" + std::to_string(i + 1) + ": expected " +
                                           std::to_string(n) + " entries, got " + std::to_string(given.size()));
      } else {
        state.rho[i] = NodeField(given);
      }
    }
  }
  validate_state(state, graph, build_mobility(config.mobility).density_threshold());
  return state;
}

SpeciesPairState parse_state(const std::string& text, const FiniteGraph& graph) {
  const json j = parse_json(text, "state file");
  check_keys(j, "$", {"rho1", "rho2"});
  if (!j.contains("rho1")) schema_error("$.rho1", "missing");
  SpeciesPairState state;
  state.rho[0] = NodeField(numbers(j["rho1"], "$.rho1"));
  state.rho[1] = j.contains("rho2") ? NodeField(numbers(j["rho2"], "$.rho2"))
                                    : NodeField(graph.num_vertices(), 1.0 / graph.total_weight());
  for (int i = 0; i < 2; ++i) {
    if (state[i].size() != graph.num_vertices()) {
      fail(ErrorCode::kSizeMismatch, "$.rho" + std::to_string(i + 1) + ": expected " +
                                         std::to_string(graph.num_vertices()) + " entries");
    }
  }
  return state;
}

std::string emit_state(const SpeciesPairState& state) {
  return json{{"rho1", state[0].values()}, {"rho2", state[1].values()}}.dump(2);
}

}  // namespace graphflow
