#include <doctest.h>

#include <cmath>

#include "graphflow/diagnostics.hpp"
#include "graphflow/error.hpp"
#include "graphflow/harness.hpp"
#include "oracles.hpp"

using namespace graphflow;
using doctest::Approx;

TEST_CASE("dissipation on the two-point scenario") {
  const System s1 = oracle::s1_system();
  CHECK(dissipation(oracle::s1_state(), s1) == Approx(0.0625).epsilon(1e-15));
  const SpeciesPairState mirrored{{NodeField{0.25, 0.75}, NodeField{0.5, 0.5}}};
  CHECK(dissipation(mirrored, s1) == Approx(0.0625).epsilon(1e-15));

  FiniteGraph g = oracle::two_point_graph();
  KernelSet zero = KernelSet::zero(g);
  const System quiet{std::move(g), Mobility::linear(), std::move(zero), Exponents::from_p(2.0)};
  CHECK(dissipation(oracle::s1_state(), quiet) == 0.0);
}

TEST_CASE("energy rate equals minus the dissipation at t = 0") {
  const System s1 = oracle::s1_system();
  CHECK(energy_rate_fd(oracle::s1_state(), s1) == Approx(-0.0625).epsilon(1e-8));
  for (double p : {1.5, 3.0}) {
    const System sp = oracle::s1_system(p);
    CHECK(energy_rate_fd(oracle::s1_state(), sp) == Approx(-dissipation(oracle::s1_state(), sp)).epsilon(1e-7));
  }
}

TEST_CASE("De Giorgi functional along gradient-flow trajectories") {
  for (double p : {1.5, 2.0, 3.0}) {
    const System s1 = oracle::s1_system(p);
    // The residual is a trapezoid sum on the trajectory's own grid, so the
    // step is capped as in the scenario file.
    IntegratorOptions opts;
    opts.max_dt = 0.01;
    const Trajectory traj = integrate(oracle::s1_state(), 1.0, s1, opts);
    const DeGiorgiReport r = de_giorgi(traj, s1);
    CHECK(std::abs(r.g_t) <= 1e-3);
    CHECK(r.energy_end < r.energy_start);
    CHECK(chain_rule_residual(traj, s1) <= 1e-4);
  }
}

TEST_CASE("De Giorgi functional of a constant trajectory is zero") {
  FiniteGraph g = oracle::two_point_graph();
  KernelSet zero = KernelSet::zero(g);
  const System quiet{std::move(g), Mobility::linear(), std::move(zero), Exponents::from_p(2.0)};
  const Trajectory traj = integrate(oracle::s1_state(), 1.0, quiet);
  const DeGiorgiReport r = de_giorgi(traj, quiet);
  CHECK(r.g_t == 0.0);
  CHECK(chain_rule_residual(traj, quiet) == 0.0);
}

TEST_CASE("a non-gradient flux has a strictly positive De Giorgi functional") {
  const System s1 = oracle::s1_system();
  // Half the steepest-descent flux: the curve moves in the right direction
  // but too slowly, so the energy balance is strict.
  const FluxLaw slow = [&](const SpeciesPairState& s) {
    EdgeFluxPair j = upwind_flux(s, s1);
    j[0] *= 0.5;
    j[1] *= 0.5;
    return j;
  };
  const Trajectory traj = integrate(oracle::s1_state(), 1.0, s1, {}, slow);
  CHECK(de_giorgi(traj, s1).g_t > 1e-3);
}

TEST_CASE("moments") {
  const FiniteGraph g = oracle::two_point_graph();
  CHECK(moment(NodeField{2.0, 0.0}, g, 2.0) == 0.0);
  CHECK(moment(NodeField{0.75, 0.25}, g, 2.0) == 0.25);
  const System s1 = oracle::s1_system();
  for (const SpeciesPairState& s : integrate(oracle::s1_state(), 1.0, s1).states) {
    CHECK(moment(s[0], g, 2.0) <= 1.0);
  }
}

TEST_CASE("W1 distances") {
  const FiniteGraph g = oracle::two_point_graph();
  CHECK(w1_distance(NodeField{0.75, 0.25}, NodeField{0.75, 0.25}, g) == 0.0);
  CHECK(w1_distance(NodeField{1.0, 0.0}, NodeField{0.0, 1.0}, g) == Approx(1.0));

  const FiniteGraph line = build_graph({{0.0}, {1.0}, {2.0}}, {1.0, 1.0, 1.0}, eta_presets::constant());
  CHECK(w1_distance(NodeField{1.0, 0.0, 0.0}, NodeField{0.0, 0.5, 0.5}, line) == Approx(1.5));

  try {
    w1_distance(NodeField{1.0, 0.0}, NodeField{0.0, 0.5}, g);
    FAIL("expected MassMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMassMismatch);
  }

  // Atoms need not share support; the plan moves every unit along its
  // cheapest route.
  const std::vector<Point> a{{0.0}, {3.0}}, b{{1.0}, {2.0}, {4.0}};
  CHECK(w1_atomic(a, {0.5, 0.5}, b, {0.25, 0.25, 0.5}) == Approx(0.25 * 1 + 0.25 * 2 + 0.5 * 1));
  double planned = 0.0;
  for (const PlanEntry& e : w1_plan(a, {0.5, 0.5}, b, {0.25, 0.25, 0.5})) {
    planned += e.mass * std::abs(a[e.from][0] - b[e.to][0]);
  }
  CHECK(planned == Approx(1.25));
}

TEST_CASE("energy monotonicity and conservation along the two-point flow") {
  const System s1 = oracle::s1_system();
  const IntegratorOptions opts;
  const Trajectory traj = integrate(oracle::s1_state(), 1.0, s1, opts);
  const MonotonicityReport m = energy_monotonicity(traj, s1, opts);
  CHECK(m.violations == 0);
  CHECK(m.steps + 1 == traj.size());
  const ConservationReport c = conservation(traj, s1);
  CHECK(c.max_mass_drift <= 1e-12);
  CHECK(c.min_density >= 0.0);
  CHECK(c.clamp_mass <= 1e-12);
  CHECK(energy_series(traj, s1).front() == Approx(0.1875));
}

TEST_CASE("property suites pass on small sample counts") {
  for (const std::string& suite : property_suites()) {
    const HarnessReport r = property_harness(suite, 3, 60);
    INFO(suite);
    CHECK(r.passed());
    CHECK(r.samples == 60);
    CHECK(r.checks > 0);
  }
}

TEST_CASE("unknown property suite yields an empty report with a note") {
  const HarnessReport r = property_harness("no-such-suite", 1, 10);
  CHECK_FALSE(r.passed());
  CHECK(r.failures.empty());
  CHECK(r.checks == 0);
  CHECK_FALSE(r.note.empty());
}

TEST_CASE("property suites are reproducible for a fixed seed") {
  const HarnessReport a = property_harness("holder", 9, 40);
  const HarnessReport b = property_harness("holder", 9, 40);
  CHECK(a.worst_margin == b.worst_margin);
  CHECK(a.checks == b.checks);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<int> hits(257, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK(worker_count() >= 1);
}
