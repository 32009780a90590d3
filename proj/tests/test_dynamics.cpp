#include <doctest.h>

#include <cmath>

#include "graphflow/diagnostics.hpp"
#include "graphflow/dynamics.hpp"
#include "graphflow/error.hpp"
#include "oracles.hpp"

using namespace graphflow;
using doctest::Approx;

TEST_CASE("upwind flux on the two-point scenario") {
  const System s1 = oracle::s1_system();
  const std::size_t e01 = oracle::edge_id(s1.graph, 0, 1), e10 = oracle::edge_id(s1.graph, 1, 0);
  const EdgeFluxPair j = upwind_flux(oracle::s1_state(), s1);
  CHECK(j[0][e01] == Approx(-0.125).epsilon(1e-15));
  CHECK(j[0][e10] == Approx(0.125).epsilon(1e-15));
  CHECK(j[1][e01] == 0.0);
  CHECK(is_antisymmetric(j[0], s1.graph, 1e-15));

  // With p = 3 the flux is m(source) (u)^(1/2): 0.25 * sqrt(0.5).
  const System s3 = oracle::s1_system(3.0);
  CHECK(upwind_flux(oracle::s1_state(), s3)[0][e01] == Approx(-0.25 * std::sqrt(0.5)).epsilon(1e-14));

  const SpeciesPairState half{{NodeField{0.5, 0.5}, NodeField{0.5, 0.5}}};
  CHECK(upwind_flux(half, s1)[0][e01] == 0.0);
}

TEST_CASE("flux outside the mobility box is rejected") {
  const System vf = oracle::s1_system(2.0, Mobility::volume_filling(1.0));
  const SpeciesPairState over{{NodeField{1.5, 0.5}, NodeField{0.5, 0.5}}};
  try {
    upwind_flux(over, vf);
    FAIL("expected ThresholdExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kThresholdExceeded);
  }
}

TEST_CASE("right-hand side") {
  const System s1 = oracle::s1_system();
  const auto d = rhs(oracle::s1_state(), s1);
  CHECK(d[0][0] == Approx(0.125));
  CHECK(d[0][1] == Approx(-0.125));
  CHECK(d[1][0] == 0.0);
  CHECK(d[1][1] == 0.0);
  CHECK(d[0][0] * s1.graph.weight(0) + d[0][1] * s1.graph.weight(1) == 0.0);

  const SpeciesPairState mirrored{{NodeField{0.25, 0.75}, NodeField{0.5, 0.5}}};
  const auto m = rhs(mirrored, s1);
  CHECK(m[0][0] == Approx(-0.125));
  CHECK(m[0][1] == Approx(0.125));
}

TEST_CASE("two-point flow matches the scalar reference and stays monotone") {
  const System s1 = oracle::s1_system();
  const Trajectory traj = integrate(oracle::s1_state(), 10.0, s1);
  REQUIRE(traj.size() > 2);
  double previous = 0.0;
  for (const SpeciesPairState& s : traj.states) {
    CHECK(s[0][0] >= 0.75);
    CHECK(s[0][0] >= previous - 1e-14);
    previous = s[0][0];
  }
  CHECK(traj.times.back() == Approx(10.0));
  CHECK(traj.states.back()[0][0] == Approx(oracle::s1_reference_density(10.0)).epsilon(1e-7));
  CHECK(traj.states.back()[0][0] > 0.99);
}

TEST_CASE("zero kernels give a constant trajectory") {
  FiniteGraph g = oracle::two_point_graph();
  KernelSet k = KernelSet::zero(g);
  const System sys{std::move(g), Mobility::linear(), std::move(k), Exponents::from_p(2.0)};
  const Trajectory traj = integrate(oracle::s1_state(), 1.0, sys);
  for (const SpeciesPairState& s : traj.states) {
    CHECK(s[0][0] == 0.75);
    CHECK(s[1][1] == 0.5);
  }
}

TEST_CASE("volume-filling flow stays in the box") {
  const System vf = oracle::s1_system(2.0, Mobility::volume_filling(1.0));
  const Trajectory traj = integrate(oracle::s1_state(), 5.0, vf);
  CHECK(traj.min_density_before_clamp >= -1e-12);
  CHECK(traj.max_density_before_clamp <= 1.0 + 1e-12);
  for (const SpeciesPairState& s : traj.states) {
    for (int i = 0; i < 2; ++i) {
      for (double r : s[i]) {
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
      }
    }
  }
}

TEST_CASE("interval fluxes reproduce the state increments") {
  const System s1 = oracle::s1_system(3.0);
  const Trajectory traj = integrate(oracle::s1_state(), 1.0, s1);
  REQUIRE(traj.interval_fluxes.size() + 1 == traj.size());
  CHECK(conservation(traj, s1).continuity_defect < 1e-12);
}

TEST_CASE("step limits surface as StepSizeUnderflow") {
  const System s1 = oracle::s1_system();
  IntegratorOptions opts;
  opts.max_steps = 3;
  opts.max_dt = 0.01;
  try {
    integrate(oracle::s1_state(), 1.0, s1, opts);
    FAIL("expected StepSizeUnderflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStepSizeUnderflow);
  }
}
