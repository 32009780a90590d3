#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graphflow/diagnostics.hpp"
#include "graphflow/dynamics.hpp"
#include "graphflow/harness.hpp"
#include "graphflow/transport.hpp"

namespace graphflow {

const char* version() noexcept;

using Params = std::map<std::string, double>;

struct EtaPreset {
  std::string name;  // constant | gaussian | cutoff
  Params params;

  bool operator==(const EtaPreset&) const = default;
};

// Uniformly sampled points in [0,1]^dimension with equal weights, drawn from
// the config seed.
struct GraphGenerator {
  std::size_t vertices = 0;
  std::size_t dimension = 1;

  bool operator==(const GraphGenerator&) const = default;
};

struct GraphSpec {
  std::vector<Point> points;
  std::vector<double> weights;
  std::optional<GraphGenerator> generator;
  DenseMatrix eta_matrix;
  std::optional<EtaPreset> eta_preset;

  bool empty() const noexcept { return points.empty() && !generator; }
  bool operator==(const GraphSpec&) const = default;
};

// Either a named preset or an expression in r and s.
struct MobilitySpec {
  std::string preset = "linear";
  Params params;
  std::string expression;
  double r_max = kInfinity;
  double s_max = kInfinity;

  bool operator==(const MobilitySpec&) const = default;
};

// Either a named preset or an expression in d = |x - y|. The optional
// "scale" parameter multiplies any preset.
struct KernelSpec {
  std::string preset = "zero";
  Params params;
  std::string expression;

  bool operator==(const KernelSpec&) const = default;
};

struct KernelsSpec {
  std::array<KernelSpec, 4> kernels;  // K11, K12, K21, K22
  Beta beta{1.0, 1.0};

  bool operator==(const KernelsSpec&) const = default;
};

// Atoms y_a of a sample of mu with masses base_mass[a] and the initial
// densities of both species evaluated at the atoms; the initial measure of
// species i is sum_a density[i][a] base_mass[a] delta_{y_a}.
struct AtomicSample {
  std::vector<Point> points;
  std::vector<double> base_mass;
  std::array<std::vector<double>, 2> density;

  bool operator==(const AtomicSample&) const = default;
};

enum class ProjectionMode { kAuto, kTransportPlan, kNearestVertex };

const char* projection_mode_name(ProjectionMode mode) noexcept;

inline constexpr std::size_t kPlanAtomLimit = 512;

struct InitialSpec {
  // Explicit densities with respect to mu; empty means uniform.
  std::array<std::vector<double>, 2> densities;
  std::optional<AtomicSample> atoms;
  ProjectionMode projection = ProjectionMode::kAuto;

  bool operator==(const InitialSpec&) const = default;
};

struct RunConfig {
  std::string description;
  GraphSpec graph;
  MobilitySpec mobility;
  KernelsSpec kernels;
  double p = 2.0;
  InitialSpec initial;
  double horizon = 1.0;
  IntegratorOptions integrator;
  SolverOptions solver;
  std::size_t steps = 64;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  bool operator==(const RunConfig&) const = default;
};

// Parses and validates a JSON config. Unknown keys are schema errors, except
// "q", which is always derived from p and therefore ignored.
RunConfig parse_config(const std::string& text);
// Fully resolved JSON (every default written out).
std::string emit_config(const RunConfig& config);

FiniteGraph build_graph(const RunConfig& config);
Mobility build_mobility(const MobilitySpec& spec);
Kernel build_kernel(const KernelSpec& spec);
System build_system(const RunConfig& config);

struct Projection {
  SpeciesPairState state;
  ProjectionMode mode = ProjectionMode::kAuto;  // the mode actually used
  std::array<double, 2> mass_drift{0.0, 0.0};   // total before renormalization minus one
};

// Moves an atomic initial measure onto the vertices. With a transport plan
// pi between the sample of mu and the normalized vertex measure, species i
// receives the second marginal of (density_i x 1) pi. Nearest-vertex mode
// sends every atom to its closest vertex, ties to the lower index.
Projection project_initial(const AtomicSample& sample, const FiniteGraph& graph,
                           ProjectionMode mode = ProjectionMode::kAuto);

SpeciesPairState initial_state(const RunConfig& config, const FiniteGraph& graph,
                               Projection* projection = nullptr);

// {"rho1": [...], "rho2": [...]}; a missing rho2 defaults to the uniform
// density.
SpeciesPairState parse_state(const std::string& text, const FiniteGraph& graph);
std::string emit_state(const SpeciesPairState& state);

// Long format: t,species,vertex,density
std::string trajectory_csv(const Trajectory& trajectory);
std::string trajectory_json(const Trajectory& trajectory, const FiniteGraph& graph);
Trajectory parse_trajectory(const std::string& text, const System& system);
// Reads the CSV form; fluxes are recomputed from the gradient-flow law and
// interval fluxes are the averages of the endpoint fluxes.
Trajectory parse_trajectory_csv(const std::string& text, const System& system);

std::string run_summary_json(const RunConfig& config, const Trajectory& trajectory,
                             const System& system, const Projection* projection = nullptr);

struct DiagnosisReport {
  DeGiorgiReport de_giorgi;
  double chain_rule_residual = 0.0;
  MonotonicityReport monotonicity;
  ConservationReport conservation;
};

DiagnosisReport diagnose(const Trajectory& trajectory, const System& system,
                         const IntegratorOptions& options);
std::string diagnosis_json(const DiagnosisReport& report);
// t,energy,dissipation,action
std::string diagnosis_csv(const Trajectory& trajectory, const System& system);

std::string transport_json(const TransportResult& result, bool converged = true);
// Path plus the config needed to rebuild its graph and mobility.
std::string path_json(const RunConfig& config, const TransportResult& result);
// t,species,vertex,density
std::string path_csv(const DiscretePath& path);
// Reads a path file and reports its per-interval action.
std::string geodesic_profile_json(const std::string& path_text);

std::string validation_json(const RunConfig& config);
std::string harness_json(const HarnessReport& report);

enum class DensityFamily { kUniform, kGaussian };

// 1-D density for mu, discretized by quantiles: the n points are
// F^{-1}((k + 1/2) / n), each with mass 1/n.
struct DensityRecipe {
  DensityFamily family = DensityFamily::kGaussian;
  double location = 0.0;  // mean, or lower end for uniform
  double scale = 1.0;     // standard deviation, or width for uniform

  bool operator==(const DensityRecipe&) const = default;
};

std::vector<double> quantile_points(const DensityRecipe& recipe, std::size_t n);

struct RefinementPlan {
  std::vector<std::size_t> ladder;
  DensityRecipe density;
  EtaPreset eta{"gaussian", {{"sigma", 0.5}}};
  // Initial densities with respect to mu, as expressions in x; normalized on
  // the reference sample.
  std::array<std::string, 2> initial{"1", "1"};
  std::size_t reference_atoms = kPlanAtomLimit;
  ProjectionMode projection = ProjectionMode::kAuto;
  std::optional<double> horizon;  // overrides the config horizon

  bool operator==(const RefinementPlan&) const = default;
};

RefinementPlan parse_plan(const std::string& text);

struct LevelReport {
  std::size_t vertices = 0;
  bool ok = false;
  std::string error;
  std::string error_code;
  ProjectionMode projection = ProjectionMode::kAuto;
  std::vector<double> points;
  std::vector<double> weights;
  SpeciesPairState final_state;
  std::vector<double> times;
  std::vector<double> energies;
  double g_t = 0.0;
  MonotonicityReport monotonicity;
  ConservationReport conservation;
  std::size_t steps = 0;
};

struct StudyReport {
  double horizon = 0.0;
  std::vector<LevelReport> levels;
  // W1 between final states of consecutive levels (sum over species);
  // NaN when either level failed.
  std::vector<double> gaps;

  bool gaps_decreasing() const;
};

StudyReport run_refinement_study(const RefinementPlan& plan, const RunConfig& config);
std::string study_json(const StudyReport& report, const RefinementPlan& plan,
                       const RunConfig& config);

}  // namespace graphflow
