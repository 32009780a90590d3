#pragma once

#include <array>
#include <vector>

#include "graphflow/dynamics.hpp"
#include "graphflow/error.hpp"
#include "graphflow/graph.hpp"
#include "graphflow/kernels.hpp"
#include "graphflow/mobility.hpp"
#include "graphflow/state.hpp"

namespace graphflow {

struct ActionValue {
  double total = 0.0;
  // Unweighted per-species actions; total = sum_i per_species[i] / beta[i].
  std::array<double, 2> per_species{0.0, 0.0};
};

// Upwind action of a flux pair at a state. Infinite when some flux leaves a
// vertex with zero mobility or a density lies outside the mobility box.
ActionValue action(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& flux,
                   const Mobility& mobility, const Beta& beta, const Exponents& exponents);

// Velocity form: sum_i (1/beta_i) sum_(l,k) m(rho_l, rho_k) (v_+)^q eta mu_l mu_k.
ActionValue dual_action(const FiniteGraph& graph, const SpeciesPairState& state,
                        const EdgeFluxPair& velocity, const Mobility& mobility, const Beta& beta,
                        const Exponents& exponents);

// Flux generated by an antisymmetric velocity:
//   j(l,k) = m(rho_l, rho_k) (v_+)^(q-1) - m(rho_k, rho_l) (v_-)^(q-1)
EdgeField flux_of_velocity(const FiniteGraph& graph, const NodeField& rho, const EdgeField& velocity,
                           const Mobility& mobility, const Exponents& exponents);
EdgeFluxPair flux_of_velocity(const FiniteGraph& graph, const SpeciesPairState& state,
                              const EdgeFluxPair& velocity, const Mobility& mobility,
                              const Exponents& exponents);

// Finsler pairing l_rho(j)[jbar]. Throws InfiniteAction when j has infinite
// action at rho.
double pairing_l(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& j,
                 const EdgeFluxPair& jbar, const Mobility& mobility, const Beta& beta,
                 const Exponents& exponents);

// Dual pairing on velocities. Throws NonAntisymmetric.
double pairing_l_tilde(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& v,
                       const EdgeFluxPair& vbar, const Mobility& mobility, const Beta& beta,
                       const Exponents& exponents);

// F_rho(j) = action^(1/p).
double minkowski_norm(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& j,
                      const Mobility& mobility, const Beta& beta, const Exponents& exponents);

// The steepest-descent flux of the energy; the same flux the dynamics use.
EdgeFluxPair negative_gradient_flux(const SpeciesPairState& state, const System& system);

// A path on the uniform grid t_k = k / K over [0, 1]. fluxes[k] acts on
// [t_k, t_k+1]; quadrature_nodes selects how the action of an interval is
// sampled along the linear density interpolant (1 = midpoint).
struct DiscretePath {
  std::vector<double> times;
  std::vector<SpeciesPairState> states;
  std::vector<EdgeFluxPair> fluxes;
  int quadrature_nodes = 1;

  std::size_t intervals() const noexcept { return fluxes.size(); }
};

struct SolverOptions {
  double eps_c = 1e-9;
  double eps_o = 1e-6;
  std::size_t max_iterations = 20000;
  std::vector<double> smoothing{1e-2, 1e-4, 1e-6};
  // Gauss-Legendre nodes per interval; 1 is the midpoint rule.
  int quadrature_nodes = 1;
  std::size_t memory = 12;

  bool operator==(const SolverOptions&) const = default;
};

struct SolverCertificate {
  double constraint_residual = 0.0;
  double optimality_residual = 0.0;
  std::size_t iterations = 0;
  double objective = 0.0;
  // Unsmoothed minus smoothed objective on the returned path.
  double smoothing_gap = 0.0;
  double final_smoothing = 0.0;
};

struct TransportResult {
  double value = 0.0;  // objective^(1/p)
  DiscretePath path;
  SolverCertificate certificate;
};

// Carries the best path found so callers can still inspect the certificate.
class NotConverged : public Error {
 public:
  NotConverged(const std::string& what, TransportResult result)
      : Error(ErrorCode::kNotConverged, "NotConverged: " + what), result_(std::move(result)) {}
  const TransportResult& result() const noexcept { return result_; }

 private:
  TransportResult result_;
};

// Minimizes the time-discrete action over paths joining the two states.
// Throws InfeasibleEndpoints (mass totals differ or some connected component
// would have to exchange mass) and NotConverged (the message carries the
// certificate).
TransportResult transport_cost(const FiniteGraph& graph, const SpeciesPairState& start,
                               const SpeciesPairState& end, std::size_t steps,
                               const Mobility& mobility, const Beta& beta, const Exponents& exponents,
                               const SolverOptions& options = {});

// Per-interval (unsmoothed) action along a path.
std::vector<double> geodesic_profile(const DiscretePath& path, const FiniteGraph& graph,
                                     const Mobility& mobility, const Beta& beta,
                                     const Exponents& exponents);

// sum_k dt * A_k.
double path_action(const DiscretePath& path, const FiniteGraph& graph, const Mobility& mobility,
                   const Beta& beta, const Exponents& exponents);

// Feasible path through the given states (uniform in time) using the
// minimum-norm antisymmetric flux on every interval.
DiscretePath interpolate_path(const FiniteGraph& graph, const std::vector<SpeciesPairState>& states,
                              int quadrature_nodes = 1);

// Largest continuity defect of a path, including mismatch against the given
// endpoints.
double continuity_residual(const DiscretePath& path, const FiniteGraph& graph,
                           const SpeciesPairState& start, const SpeciesPairState& end);

// Gauss-Legendre nodes on [0, 1] and weights summing to one.
std::pair<std::vector<double>, std::vector<double>> gauss_legendre_unit(int n);

}  // namespace graphflow
