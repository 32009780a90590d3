#include <doctest.h>

#include <cmath>
#include <random>

#include "graphflow/error.hpp"
#include "graphflow/graph.hpp"
#include "oracles.hpp"

using namespace graphflow;
using doctest::Approx;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("two-point graph has one edge in each direction") {
  const FiniteGraph g = oracle::two_point_graph();
  REQUIRE(g.num_vertices() == 2);
  REQUIRE(g.num_edges() == 2);
  CHECK(g.edge(0).from == 0);
  CHECK(g.edge(0).to == 1);
  CHECK(g.edge(1).from == 1);
  CHECK(g.edge(g.edge(0).reverse).from == 1);
  CHECK(g.eta(0, 1) == 1.0);
  CHECK(g.eta(1, 0) == 1.0);
  CHECK(g.find_edge(0, 0) == g.num_edges());
  CHECK(g.edge_length(0) == 1.0);
}

TEST_CASE("gaussian weights on collinear points are symmetric with empty diagonal") {
  const FiniteGraph g = build_graph({{0.0}, {0.5}, {2.0}}, {1.0, 1.0, 1.0}, eta_presets::gaussian(1.0));
  REQUIRE(g.num_edges() == 6);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(g.eta(l, l) == 0.0);
    for (std::size_t k = 0; k < 3; ++k) CHECK(g.eta(l, k) == g.eta(k, l));
  }
  CHECK(g.eta(0, 1) == Approx(std::exp(-0.25)).epsilon(1e-15));
  CHECK(g.eta(0, 2) == Approx(std::exp(-4.0)).epsilon(1e-15));
}

TEST_CASE("graph construction rejects invalid inputs") {
  CHECK(code_of([] { build_graph({{0.0}, {1.0}}, {1.0, 1.0}, DenseMatrix{{0.0, 1.0}, {2.0, 0.0}}); }) ==
        ErrorCode::kNonSymmetricWeights);
  CHECK(code_of([] { build_graph({{0.0}, {1.0}}, {1.0, 0.0}, eta_presets::constant()); }) ==
        ErrorCode::kNonPositiveWeight);
  CHECK(code_of([] { build_graph({{0.0}, {0.0}}, {1.0, 1.0}, eta_presets::constant()); }) ==
        ErrorCode::kDuplicatePoint);
  CHECK(code_of([] { build_graph({{0.0}, {1.0}}, {1.0}, eta_presets::constant()); }) ==
        ErrorCode::kSizeMismatch);
}

TEST_CASE("cutoff weights drop long edges") {
  const FiniteGraph g = build_graph({{0.0}, {1.0}, {3.0}}, {1.0, 1.0, 1.0}, eta_presets::cutoff(1.5));
  CHECK(g.num_edges() == 2);
  CHECK(g.find_edge(0, 2) == g.num_edges());
}

TEST_CASE("assumption constants on the two-point graph") {
  const FiniteGraph g = oracle::two_point_graph();
  const AssumptionReport r = check_assumptions(g, Exponents::from_p(2.0));
  CHECK(r.c_eta == Approx(1.0));
  CHECK(r.c_eta_prime == Approx(1.0));
  CHECK(r.num_edges == 2);
  CHECK(bc_profile(g, Exponents::from_p(2.0), 0.5) == 0.0);
  CHECK(bc_profile(g, Exponents::from_p(2.0), 1.0) == 0.0);
  CHECK(bc_profile(g, Exponents::from_p(2.0), 1.5) == Approx(1.0));

  const FiniteGraph single = build_graph({{0.3}}, {1.0}, eta_presets::constant());
  const AssumptionReport s = check_assumptions(single, Exponents::from_p(2.0));
  CHECK(s.c_eta == 0.0);
  CHECK(s.num_edges == 0);
}

TEST_CASE("nonlocal gradient") {
  const FiniteGraph g = oracle::two_point_graph();
  const std::size_t e01 = oracle::edge_id(g, 0, 1), e10 = oracle::edge_id(g, 1, 0);
  const EdgeField grad = nonlocal_gradient(NodeField{0.0, 1.0}, g);
  CHECK(grad[e01] == 1.0);
  CHECK(grad[e10] == -1.0);
  const EdgeField flat = nonlocal_gradient(NodeField{0.4, 0.4}, g);
  CHECK(flat[e01] == 0.0);
  CHECK(nonlocal_gradient(NodeField{0.25, 0.75}, g)[e01] == 0.5);
  CHECK_THROWS_AS(nonlocal_gradient(NodeField{1.0}, g), Error);
}

TEST_CASE("nonlocal divergence of the two-point gradient-flow flux") {
  const FiniteGraph g = oracle::two_point_graph();
  EdgeField j(g.num_edges());
  j[oracle::edge_id(g, 0, 1)] = -0.125;
  j[oracle::edge_id(g, 1, 0)] = 0.125;
  const NodeField div = nonlocal_divergence(j, g);
  CHECK(div[0] == Approx(-0.125).epsilon(1e-15));
  CHECK(div[1] == Approx(0.125).epsilon(1e-15));

  CHECK(nonlocal_divergence(EdgeField(g.num_edges()), g)[0] == 0.0);
  EdgeField sym(g.num_edges(), 0.7);
  const NodeField zero = nonlocal_divergence(sym, g);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("divergence duality on random weighted graphs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 7;
    std::vector<Point> pts;
    std::vector<double> w;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back({unit(rng), unit(rng)});
      w.push_back(0.1 + unit(rng));
    }
    const FiniteGraph g = build_graph(pts, w, eta_presets::gaussian(0.7));
    EdgeField j(g.num_edges());
    for (double& v : j) v = unit(rng) - 0.5;
    NodeField phi(n);
    for (double& v : phi) v = unit(rng) - 0.5;
    const NodeField div = nonlocal_divergence(j, g);
    double lhs = 0.0;
    for (std::size_t l = 0; l < n; ++l) lhs += phi[l] * div[l] * g.weight(l);
    CHECK(lhs == Approx(divergence_pairing(phi, j, g)).epsilon(1e-12));
  }
}

TEST_CASE("antisymmetrization") {
  const FiniteGraph g = oracle::two_point_graph();
  const std::size_t e01 = oracle::edge_id(g, 0, 1), e10 = oracle::edge_id(g, 1, 0);
  EdgeField j(g.num_edges());
  j[e01] = 3.0;
  j[e10] = 1.0;
  const EdgeField a = antisymmetrize_flux(j, g);
  CHECK(a[e01] == 1.0);
  CHECK(a[e10] == -1.0);
  CHECK(antisymmetrize_flux(a, g) == a);
  CHECK(is_antisymmetric(a, g));

  const NodeField d0 = nonlocal_divergence(j, g);
  const NodeField d1 = nonlocal_divergence(a, g);
  CHECK(d0[0] == Approx(d1[0]));

  EdgeField sym(g.num_edges(), 2.0);
  const EdgeField z = antisymmetrize_flux(sym, g);
  CHECK(z[e01] == 0.0);
  CHECK(z[e10] == 0.0);
}
