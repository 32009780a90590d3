#pragma once

#include <string>
#include <vector>

#include "graphflow/dynamics.hpp"
#include "graphflow/transport.hpp"

namespace graphflow {

// Action of the velocity -beta grad(delta E) at rho.
double dissipation(const SpeciesPairState& state, const System& system);

// d/dt E(rho_t) at t = 0 by a central difference along the flow direction.
double energy_rate_fd(const SpeciesPairState& state, const System& system, double h = 1e-6);

struct DeGiorgiReport {
  double energy_start = 0.0;
  double energy_end = 0.0;
  double dissipation_integral = 0.0;  // int (1/q) D dt
  // int (1/p) A(rho_t, j_t) dt with the trajectory's own flux; an
  // action-based upper bound for the metric-derivative term.
  double velocity_integral = 0.0;
  double g_t = 0.0;
};

// Trapezoid quadrature on the trajectory's own time grid.
DeGiorgiReport de_giorgi(const Trajectory& trajectory, const System& system);

// Max over pairs of grid times s < t of
//   | E(t) - E(s) - int_s^t l~(v)[beta grad(delta E)] |
// with v recovered from the stored node fluxes.
double chain_rule_residual(const Trajectory& trajectory, const System& system);

// Velocity whose flux (under the dual representation) is j. Infinite where
// j leaves a vertex of zero mobility.
EdgeField velocity_of_flux(const FiniteGraph& graph, const NodeField& rho, const EdgeField& flux,
                           const Mobility& mobility, const Exponents& exponents);

// sum_l |x_l|^order rho(l) mu_l
double moment(const NodeField& rho, const FiniteGraph& graph, double order);
double moment(const SpeciesPairState& state, const FiniteGraph& graph, double order);

// Exact W1 between two atomic measures (transport LP, successive shortest
// paths). Throws MassMismatch when totals differ by more than 1e-10.
double w1_atomic(const std::vector<Point>& points_a, const std::vector<double>& mass_a,
                 const std::vector<Point>& points_b, const std::vector<double>& mass_b);
// Optimal plan as (i, j, mass) triples.
struct PlanEntry {
  std::size_t from;
  std::size_t to;
  double mass;
};
std::vector<PlanEntry> w1_plan(const std::vector<Point>& points_a, const std::vector<double>& mass_a,
                               const std::vector<Point>& points_b, const std::vector<double>& mass_b);

double w1_distance(const NodeField& a, const NodeField& b, const FiniteGraph& graph);
// Sum over species.
double w1_distance(const SpeciesPairState& a, const SpeciesPairState& b, const FiniteGraph& graph);

enum class FluxWeight { kTruncatedDistance, kDistanceGrowth };

struct FluxBound {
  double flux_integral = 0.0;  // (1/2) sum Phi |j| eta mu mu over both species
  double action = 0.0;
  double ratio = 0.0;  // flux_integral / action^(1/p); inf when the action vanishes but the flux does not
};

FluxBound flux_bound(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& flux,
                     const Mobility& mobility, const Beta& beta, const Exponents& exponents,
                     FluxWeight weight);

struct MonotonicityReport {
  std::size_t steps = 0;
  std::size_t violations = 0;
  double worst_increase = 0.0;  // largest E_{n+1} - E_n
  double worst_excess = 0.0;    // largest increase beyond the allowance
};

// E_{n+1} <= E_n + 10 (abs_tol + rel_tol |E_n|) for every step.
MonotonicityReport energy_monotonicity(const Trajectory& trajectory, const System& system,
                                       const IntegratorOptions& options);

struct ConservationReport {
  double max_mass_drift = 0.0;
  double min_density = 0.0;  // before clamping
  double max_density = 0.0;  // before clamping
  double clamp_mass = 0.0;
  // Largest |rho_{n+1} - rho_n + dt div(interval flux)|
  double continuity_defect = 0.0;
};

ConservationReport conservation(const Trajectory& trajectory, const System& system);

std::vector<double> energy_series(const Trajectory& trajectory, const System& system);

}  // namespace graphflow
