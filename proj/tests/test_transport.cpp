#include <doctest.h>

#include <cmath>
#include <numeric>

#include "graphflow/diagnostics.hpp"
#include "graphflow/error.hpp"
#include "graphflow/transport.hpp"
#include "oracles.hpp"

using namespace graphflow;
using doctest::Approx;

namespace {

EdgeFluxPair single_edge_flux(const FiniteGraph& g, double j01) {
  EdgeFluxPair j{{EdgeField(g.num_edges()), EdgeField(g.num_edges())}};
  j[0][g.find_edge(0, 1)] = j01;
  j[0][g.find_edge(1, 0)] = -j01;
  return j;
}

}  // namespace

TEST_CASE("action of the gradient-flow flux equals the dissipation") {
  const System s1 = oracle::s1_system();
  const EdgeFluxPair j = upwind_flux(oracle::s1_state(), s1);
  const ActionValue a = action(s1.graph, oracle::s1_state(), j, s1.mobility, s1.kernels.beta(), s1.exponents);
  CHECK(a.total == Approx(0.0625).epsilon(1e-15));
  CHECK(a.per_species[1] == 0.0);

  const EdgeFluxPair zero = single_edge_flux(s1.graph, 0.0);
  CHECK(action(s1.graph, oracle::s1_state(), zero, s1.mobility, s1.kernels.beta(), s1.exponents).total == 0.0);

  const SpeciesPairState empty_source{{NodeField{0.0, 2.0}, NodeField{0.5, 0.5}}};
  const EdgeFluxPair out = single_edge_flux(s1.graph, 1.0);
  CHECK(std::isinf(action(s1.graph, empty_source, out, s1.mobility, s1.kernels.beta(), s1.exponents).total));
}

TEST_CASE("dual action and the velocity-to-flux map") {
  const System s1 = oracle::s1_system();
  const SpeciesPairState rho = oracle::s1_state();
  const EdgeFluxPair v{{edge_velocity(rho, s1.kernels, s1.graph, 0), edge_velocity(rho, s1.kernels, s1.graph, 1)}};
  CHECK(dual_action(s1.graph, rho, v, s1.mobility, s1.kernels.beta(), s1.exponents).total ==
        Approx(0.0625).epsilon(1e-15));
  const EdgeFluxPair j = flux_of_velocity(s1.graph, rho, v, s1.mobility, s1.exponents);
  CHECK(j[0][s1.graph.find_edge(0, 1)] == Approx(-0.125));

  EdgeFluxPair nonanti = v;
  nonanti[0][0] += 1.0;
  CHECK_THROWS_AS(dual_action(s1.graph, rho, nonanti, s1.mobility, s1.kernels.beta(), s1.exponents), Error);

  for (double p : {1.5, 3.0}) {
    const System sp = oracle::s1_system(p);
    const EdgeFluxPair jp = flux_of_velocity(sp.graph, rho, v, sp.mobility, sp.exponents);
    const double dual = dual_action(sp.graph, rho, v, sp.mobility, sp.kernels.beta(), sp.exponents).total;
    const double primal = action(sp.graph, rho, jp, sp.mobility, sp.kernels.beta(), sp.exponents).total;
    CHECK(dual == Approx(primal).epsilon(1e-12));
  }
}

TEST_CASE("Finsler pairings") {
  const System s1 = oracle::s1_system();
  const SpeciesPairState rho = oracle::s1_state();
  const Beta& beta = s1.kernels.beta();
  const EdgeFluxPair j = negative_gradient_flux(rho, s1);
  CHECK(j[0][s1.graph.find_edge(0, 1)] == Approx(-0.125));
  CHECK(pairing_l(s1.graph, rho, j, j, s1.mobility, beta, s1.exponents) == Approx(0.0625));
  CHECK(pairing_l(s1.graph, rho, j, single_edge_flux(s1.graph, 0.0), s1.mobility, beta, s1.exponents) == 0.0);

  const EdgeFluxPair v{{edge_velocity(rho, s1.kernels, s1.graph, 0), edge_velocity(rho, s1.kernels, s1.graph, 1)}};
  CHECK(pairing_l_tilde(s1.graph, rho, v, v, s1.mobility, beta, s1.exponents) == Approx(0.0625));
  CHECK(minkowski_norm(s1.graph, rho, j, s1.mobility, beta, s1.exponents) == Approx(0.25));

  const SpeciesPairState empty_source{{NodeField{0.0, 2.0}, NodeField{0.5, 0.5}}};
  try {
    pairing_l(s1.graph, empty_source, single_edge_flux(s1.graph, 1.0), j, s1.mobility, beta, s1.exponents);
    FAIL("expected InfiniteAction");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfiniteAction);
  }
}

TEST_CASE("negative gradient pairs with test fluxes as minus the energy derivative") {
  const System s1 = oracle::s1_system();
  const SpeciesPairState rho = oracle::s1_state();
  const EdgeFluxPair jbar = single_edge_flux(s1.graph, 1.0);
  const EdgeFluxPair grad = negative_gradient_flux(rho, s1);
  const double lhs = pairing_l(s1.graph, rho, grad, jbar, s1.mobility, s1.kernels.beta(), s1.exponents);

  // d/dh E(rho - h div jbar) by central differences.
  const NodeField div = nonlocal_divergence(jbar[0], s1.graph);
  const double h = 1e-6;
  SpeciesPairState plus = rho, minus = rho;
  for (std::size_t l = 0; l < 2; ++l) {
    plus[0][l] -= h * div[l];
    minus[0][l] += h * div[l];
  }
  const double dE = (energy(plus, s1.kernels, s1.graph) - energy(minus, s1.kernels, s1.graph)) / (2.0 * h);
  CHECK(lhs == Approx(-dE).epsilon(1e-6));
}

TEST_CASE("transport between identical states is free") {
  const FiniteGraph g = oracle::two_point_graph();
  const TransportResult r = transport_cost(g, oracle::s1_state(), oracle::s1_state(), 16, Mobility::linear(),
                                           {1.0, 1.0}, Exponents::from_p(2.0));
  CHECK(r.value < 1e-6);
  for (double a : geodesic_profile(r.path, g, Mobility::linear(), {1.0, 1.0}, Exponents::from_p(2.0))) {
    CHECK(a < 1e-10);
  }
}

TEST_CASE("transport on the two-point graph agrees with the 1-D variational oracle") {
  const FiniteGraph g = oracle::two_point_graph();
  const Exponents p2 = Exponents::from_p(2.0);
  const TransportResult r = transport_cost(g, oracle::s2_start(), oracle::s2_end(), 64, Mobility::linear(),
                                           {1.0, 1.0}, p2);
  const oracle::OneDimensionalResult ref = oracle::one_dimensional_transport(64);
  CHECK(r.value * r.value == Approx(ref.value).epsilon(2e-4));
  CHECK(r.certificate.constraint_residual <= 1e-9);
  CHECK(r.certificate.final_smoothing == 1e-6);
  CHECK(continuity_residual(r.path, g, oracle::s2_start(), oracle::s2_end()) <= 1e-9);

  // The path's density at the target follows the oracle.
  for (std::size_t k = 0; k < r.path.states.size(); k += 8) {
    CHECK(r.path.states[k][0][1] == Approx(ref.u[k]).epsilon(1e-3));
  }

  const std::vector<double> profile = geodesic_profile(r.path, g, Mobility::linear(), {1.0, 1.0}, p2);
  REQUIRE(profile.size() == 64);
  CHECK(path_action(r.path, g, Mobility::linear(), {1.0, 1.0}, p2) == Approx(ref.value).epsilon(2e-4));
}

TEST_CASE("1-D oracle approaches the continuum value") {
  const oracle::OneDimensionalResult fine = oracle::one_dimensional_transport(16384);
  CHECK(std::abs(fine.value - 4.0) < 1e-3);
  const oracle::OneDimensionalResult coarse = oracle::one_dimensional_transport(64);
  CHECK(coarse.value == Approx(3.931).epsilon(1e-3));
}

TEST_CASE("a reparametrized path costs more and has a non-constant profile") {
  const FiniteGraph g = oracle::two_point_graph();
  const Exponents p2 = Exponents::from_p(2.0);
  std::vector<SpeciesPairState> states;
  const std::size_t K = 64;
  for (std::size_t k = 0; k <= K; ++k) {
    const double t = static_cast<double>(k) / K;
    const double u = t * t;
    states.push_back(SpeciesPairState{{NodeField{1.0 - u, u}, NodeField{0.5, 0.5}}});
  }
  const DiscretePath path = interpolate_path(g, states);
  const double total = path_action(path, g, Mobility::linear(), {1.0, 1.0}, p2);
  CHECK(total > 4.0);
  const std::vector<double> profile = geodesic_profile(path, g, Mobility::linear(), {1.0, 1.0}, p2);
  const double mean = std::accumulate(profile.begin(), profile.end(), 0.0) / profile.size();
  CHECK(std::abs(profile.front() - mean) > 0.5 * mean);
}

TEST_CASE("transport cost decouples across species") {
  const FiniteGraph g = build_graph({{0.0}, {1.0}, {2.0}}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, eta_presets::gaussian(1.5));
  const Exponents p2 = Exponents::from_p(2.0);
  const Beta beta{2.0, 1.0};
  const SpeciesPairState a{{NodeField{1.5, 1.0, 0.5}, NodeField{1.2, 0.6, 1.2}}};
  const SpeciesPairState b{{NodeField{0.5, 1.0, 1.5}, NodeField{1.2, 0.6, 1.2}}};
  const TransportResult both = transport_cost(g, a, b, 16, Mobility::linear(), beta, p2);

  const SpeciesPairState a1{{a[0], NodeField{1.0, 1.0, 1.0}}};
  const SpeciesPairState b1{{b[0], NodeField{1.0, 1.0, 1.0}}};
  const TransportResult single = transport_cost(g, a1, b1, 16, Mobility::linear(), {1.0, 1.0}, p2);
  const double expected = single.value * single.value / beta[0];
  CHECK(both.value * both.value == Approx(expected).epsilon(2e-6));
}

TEST_CASE("transport rejects endpoints of different mass") {
  const FiniteGraph g = oracle::two_point_graph();
  const SpeciesPairState heavy{{NodeField{1.0, 0.5}, NodeField{0.5, 0.5}}};
  try {
    transport_cost(g, oracle::s2_start(), heavy, 16, Mobility::linear(), {1.0, 1.0}, Exponents::from_p(2.0));
    FAIL("expected InfeasibleEndpoints");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleEndpoints);
  }
}

TEST_CASE("Gauss-Legendre rules integrate polynomials exactly") {
  for (int n = 1; n <= 5; ++n) {
    const auto [x, w] = gauss_legendre_unit(n);
    double sum = 0.0, poly = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += w[i];
      poly += w[i] * std::pow(x[i], 2 * n - 1);
    }
    CHECK(sum == Approx(1.0));
    CHECK(poly == Approx(1.0 / (2 * n)));
  }
}
