#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "graphflow/graph.hpp"
#include "graphflow/kernels.hpp"
#include "graphflow/mobility.hpp"
#include "graphflow/state.hpp"

namespace graphflow {

// Everything that defines one two-species interaction system on a graph.
struct System {
  FiniteGraph graph;
  Mobility mobility;
  KernelSet kernels;
  Exponents exponents;
};

// Upwind flux of one species driven by the edge field u = grad(phi):
//   j(l,k) = m(rho_l, rho_k) (beta u_-)^(q-1) - m(rho_k, rho_l) (beta u_+)^(q-1)
// The mobility is evaluated at the source vertex of the flow. With
// clamp_arguments, densities are clipped into the mobility box before
// evaluation (used for Runge-Kutta stage values).
EdgeField upwind_flux_from_drive(const FiniteGraph& graph, const NodeField& rho,
                                 const EdgeField& drive, double beta, const Mobility& mobility,
                                 const Exponents& exponents, bool clamp_arguments = false);

// Gradient-flow flux of both species. Throws ThresholdExceeded when the state
// leaves [0, threshold] by more than 1e-12.
EdgeFluxPair upwind_flux(const SpeciesPairState& state, const System& system);

// d rho / dt = -div j for both species.
std::array<NodeField, 2> rhs(const SpeciesPairState& state, const System& system);

using FluxLaw = std::function<EdgeFluxPair(const SpeciesPairState&)>;

struct IntegratorOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_dt = std::numeric_limits<double>::infinity();
  double initial_dt = 1e-4;
  double min_dt = 1e-14;
  std::size_t max_steps = 2'000'000;
  // Admissible excursion outside [0, threshold] before a step is rejected.
  double guard = 1e-12;

  bool operator==(const IntegratorOptions&) const = default;
};

struct StepRecord {
  double dt = 0.0;
  double error_norm = 0.0;
  double clamp_mass = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<SpeciesPairState> states;
  // Flux law evaluated at every stored state.
  std::vector<EdgeFluxPair> node_fluxes;
  // Runge-Kutta weighted flux on [t_n, t_n+1]; reproduces the state increment
  // exactly through the continuity equation.
  std::vector<EdgeFluxPair> interval_fluxes;
  std::vector<StepRecord> steps;
  std::size_t rejected_error = 0;
  std::size_t rejected_guard = 0;
  std::size_t flux_evaluations = 0;
  double clamp_mass_total = 0.0;
  double min_density_before_clamp = std::numeric_limits<double>::infinity();
  double max_density_before_clamp = -std::numeric_limits<double>::infinity();

  std::size_t size() const noexcept { return times.size(); }
};

// Adaptive Dormand-Prince 5(4) integration on the invariant simplex.
Trajectory integrate(const SpeciesPairState& initial, double t_final, const System& system,
                     const IntegratorOptions& options = {}, FluxLaw law = {});

}  // namespace graphflow
