// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Numbers behind every verdict are printed on the following
// indented lines.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "graphflow/diagnostics.hpp"
#include "graphflow/harness.hpp"
#include "graphflow/io.hpp"
#include "oracles.hpp"

using namespace graphflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const std::string& name) {
  std::ifstream in(std::string(GRAPHFLOW_CONFIG_DIR) + "/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Verdict {
  int id;
  std::string title;
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& note) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "MISS ") + note);
  }
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// Everything criteria 3, 4 and 9 look at for one integrated configuration.
struct FlowCase {
  std::string name;
  System system;
  SpeciesPairState initial;
  IntegratorOptions options;
  bool bounded = false;
};

struct FlowOutcome {
  std::string name;
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  DeGiorgiReport de_giorgi;
  ConservationReport conservation;
  MonotonicityReport monotonicity;
  double threshold = 0.0;
  bool bounded = false;
  std::size_t steps = 0;
};

std::vector<FlowCase> flow_suite() {
  std::vector<FlowCase> cases;
  IntegratorOptions tight;
  tight.rel_tol = 1e-8;

  for (double p : {1.5, 2.0, 3.0}) {
    cases.push_back({fmt("two-point p=%.1f", p), oracle::s1_system(p), oracle::s1_state(), tight, false});
  }

  const RunConfig base = parse_config(read_file("rgg16.json"));
  for (const char* mobility : {"linear", "volume_filling"}) {
    for (double p : {1.5, 2.0, 3.0}) {
      RunConfig c = base;
      c.p = p;
      c.mobility = MobilitySpec{};
      c.mobility.preset = mobility;
      if (std::string(mobility) == "volume_filling") c.mobility.params = {{"S", 4.0}};
      c.integrator.rel_tol = 1e-8;
      System system = build_system(c);
      SpeciesPairState initial = initial_state(c, system.graph);
      const bool bounded = std::isfinite(system.mobility.density_threshold());
      cases.push_back({fmt("rgg16 %s p=%.1f", mobility, p), std::move(system), std::move(initial), c.integrator,
                       bounded});
    }
  }
  return cases;
}

FlowOutcome run_flow(const FlowCase& fc) {
  FlowOutcome out;
  out.name = fc.name;
  out.bounded = fc.bounded;
  out.threshold = fc.system.mobility.density_threshold();
  const auto start = Clock::now();
  try {
    const Trajectory traj = integrate(fc.initial, 1.0, fc.system, fc.options);
    out.de_giorgi = de_giorgi(traj, fc.system);
    out.conservation = conservation(traj, fc.system);
    out.monotonicity = energy_monotonicity(traj, fc.system, fc.options);
    out.steps = traj.size() - 1;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = seconds_since(start);
  return out;
}

Verdict criterion_flux_law() {
  Verdict v{1, "upwind flux law on the two-point scenario"};
  const System s2 = oracle::s1_system(2.0);
  const System s3 = oracle::s1_system(3.0);
  const std::size_t e01 = s2.graph.find_edge(0, 1);
  const auto start = Clock::now();
  const double j2 = upwind_flux(oracle::s1_state(), s2)[0][e01];
  const double j3 = upwind_flux(oracle::s1_state(), s3)[0][e01];
  const double elapsed = seconds_since(start);
  v.check(std::abs(j2 + 0.125) <= 1e-12, fmt("p=2: j(0,1) = %.9f, expected -0.125", j2));
  v.check(std::abs(j3 + 0.353553) <= 1e-6,
          fmt("p=3: j(0,1) = %.9f, expected -0.353553; the flux here is linear in the mobility", j3));
  v.check(elapsed < 1e-3, fmt("runtime %.3g ms", elapsed * 1e3));
  return v;
}

Verdict criterion_chain_rule() {
  Verdict v{2, "energy-dissipation chain rule at t = 0"};
  const System s1 = oracle::s1_system();
  const auto start = Clock::now();
  const double rate = energy_rate_fd(oracle::s1_state(), s1, 1e-6);
  const double d = dissipation(oracle::s1_state(), s1);
  const double elapsed = seconds_since(start);
  v.check(std::abs(rate + d) <= 1e-6, fmt("dE/dt = %.10f, -D = %.10f", rate, -d));
  v.check(std::abs(d - 0.0625) <= 1e-6, fmt("D = %.10f, expected 0.0625", d));
  v.check(elapsed < 1e-2, fmt("runtime %.3g ms", elapsed * 1e3));
  return v;
}

Verdict criterion_de_giorgi(const std::vector<FlowOutcome>& flows) {
  Verdict v{3, "De Giorgi functional vanishes along computed flows"};
  for (const FlowOutcome& f : flows) {
    if (!f.ok) {
      v.check(false, f.name + ": integration failed: " + f.error);
      continue;
    }
    v.check(std::abs(f.de_giorgi.g_t) <= 1e-3 && f.seconds < 10.0,
            fmt("%s: G_T = %.3e, %zu steps, %.3f s", f.name.c_str(), f.de_giorgi.g_t, f.steps, f.seconds));
  }
  return v;
}

Verdict criterion_conservation(const std::vector<FlowOutcome>& flows) {
  Verdict v{4, "mass conservation, positivity and box invariance"};
  for (const FlowOutcome& f : flows) {
    if (!f.ok) {
      v.check(false, f.name + ": integration failed");
      continue;
    }
    const ConservationReport& c = f.conservation;
    bool ok = c.max_mass_drift <= 1e-10 && c.min_density >= -1e-12 && c.clamp_mass <= 1e-9;
    std::string note = fmt("%s: drift %.2e, min %.2e, clamp %.2e", f.name.c_str(), c.max_mass_drift,
                           c.min_density, c.clamp_mass);
    if (f.bounded) {
      ok = ok && c.max_density <= f.threshold + 1e-12;
      note += fmt(", max %.4f <= %.1f", c.max_density, f.threshold);
    }
    v.check(ok, note);
  }
  return v;
}

Verdict criterion_quasimetric() {
  Verdict v{5, "transport cost on the two-point graph against the 1-D oracle"};
  const auto start = Clock::now();
  const FiniteGraph g = oracle::two_point_graph();
  const Exponents p2 = Exponents::from_p(2.0);
  const Mobility lin = Mobility::linear();
  SolverOptions opts;
  opts.smoothing = {1e-2, 1e-4, 1e-6};
  bool converged = true;
  TransportResult r;
  try {
    r = transport_cost(g, oracle::s2_start(), oracle::s2_end(), 64, lin, {1.0, 1.0}, p2, opts);
  } catch (const NotConverged& e) {
    converged = false;
    r = e.result();
  }
  const double elapsed = seconds_since(start);

  const oracle::OneDimensionalResult fine = oracle::one_dimensional_transport(16384);
  const oracle::OneDimensionalResult coarse = oracle::one_dimensional_transport(64);
  const std::vector<double> profile = geodesic_profile(r.path, g, lin, {1.0, 1.0}, p2);
  double mean = 0.0, worst = 0.0;
  for (double a : profile) mean += a;
  mean /= static_cast<double>(profile.size());
  for (double a : profile) worst = std::max(worst, std::abs(a - mean));

  v.check(converged, fmt("solver converged: constraint %.2e, optimality %.2e, %zu iterations",
                         r.certificate.constraint_residual, r.certificate.optimality_residual,
                         r.certificate.iterations));
  v.check(std::abs(fine.value - 4.0) <= 1e-3, fmt("dense-grid oracle T^2 = %.6f (K=16384)", fine.value));
  v.check(std::abs(r.value * r.value - coarse.value) <= 1e-3 * coarse.value,
          fmt("solver T^2 = %.6f vs oracle on the same grid %.6f (K=64)", r.value * r.value, coarse.value));
  v.check(std::abs(r.value - 2.0) <= 1e-2, fmt("T = %.6f, expected 2.0 +- 0.01 (K=64)", r.value));
  v.check(worst <= 0.04 * mean,
          fmt("profile mean %.4f, max relative deviation %.3f (last interval %.3f)", mean, worst / mean,
              profile.empty() ? 0.0 : profile.back()));
  v.check(elapsed < 60.0, fmt("runtime %.2f s", elapsed));
  return v;
}

Verdict criterion_decoupling() {
  Verdict v{6, "decoupling of the two-species transport cost"};
  const FiniteGraph g = build_graph({{0.0}, {1.0}, {2.0}}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, eta_presets::gaussian(1.5));
  const Exponents p2 = Exponents::from_p(2.0);
  const Beta beta{2.0, 1.0};
  const SolverOptions opts;
  const SpeciesPairState a{{NodeField{1.5, 1.0, 0.5}, NodeField{1.2, 0.6, 1.2}}};
  const SpeciesPairState b{{NodeField{0.5, 1.0, 1.5}, NodeField{1.2, 0.6, 1.2}}};
  const SpeciesPairState a1{{a[0], NodeField{1.0, 1.0, 1.0}}};
  const SpeciesPairState b1{{b[0], NodeField{1.0, 1.0, 1.0}}};
  try {
    const TransportResult both = transport_cost(g, a, b, 32, Mobility::linear(), beta, p2, opts);
    const TransportResult single = transport_cost(g, a1, b1, 32, Mobility::linear(), {1.0, 1.0}, p2, opts);
    const double lhs = std::pow(both.value, p2.p());
    const double rhs = std::pow(single.value, p2.p()) / beta[0];
    const double tol = 2.0 * opts.eps_o;
    v.check(std::abs(lhs - rhs) <= tol * std::max(1.0, rhs),
            fmt("T^p = %.9f, (1/beta1) single-species T^p = %.9f, tolerance %.1e", lhs, rhs, tol));
  } catch (const std::exception& e) {
    v.check(false, std::string("solver failed: ") + e.what());
  }
  return v;
}

Verdict criterion_properties() {
  Verdict v{7, "randomized property suites"};
  const auto start = Clock::now();
  for (const char* suite : {"holder", "norm", "antisym", "convexity", "duality"}) {
    const HarnessReport r = property_harness(suite, 42, 1000);
    v.check(r.passed(), fmt("%s: %zu checks, %zu failures, worst margin %.2e", suite, r.checks, r.failures.size(),
                            r.worst_margin));
  }
  const double elapsed = seconds_since(start);
  v.check(elapsed < 30.0, fmt("runtime %.2f s", elapsed));
  return v;
}

Verdict criterion_refinement(StudyReport& study) {
  Verdict v{8, "refinement stability of the final states"};
  const auto start = Clock::now();
  const RunConfig config = parse_config(read_file("refine.json"));
  const RefinementPlan plan = parse_plan(read_file("refine_plan.json"));
  study = run_refinement_study(plan, config);
  const double elapsed = seconds_since(start);
  std::string ladder;
  for (const LevelReport& level : study.levels) {
    v.check(level.ok, fmt("N=%zu: %s, projection %s, G_T = %.2e", level.vertices,
                          level.ok ? "ok" : level.error.c_str(), projection_mode_name(level.projection), level.g_t));
  }
  bool finite = study.gaps.size() == plan.ladder.size() - 1;
  std::string gaps;
  for (double gap : study.gaps) {
    finite = finite && std::isfinite(gap);
    gaps += fmt(" %.5f", gap);
  }
  v.check(finite, "W1 gaps:" + gaps);
  v.check(study.gaps_decreasing(), "last two gaps decrease");
  v.check(elapsed < 120.0, fmt("runtime %.2f s", elapsed));
  return v;
}

Verdict criterion_monotonicity(const std::vector<FlowOutcome>& flows, const StudyReport& study) {
  Verdict v{9, "energy is nonincreasing along every trajectory"};
  for (const FlowOutcome& f : flows) {
    if (!f.ok) {
      v.check(false, f.name + ": integration failed");
      continue;
    }
    v.check(f.monotonicity.violations == 0,
            fmt("%s: %zu violations in %zu steps, largest increase %.2e", f.name.c_str(), f.monotonicity.violations,
                f.monotonicity.steps, f.monotonicity.worst_increase));
  }
  for (const LevelReport& level : study.levels) {
    if (!level.ok) {
      v.check(false, fmt("refinement N=%zu: no trajectory", level.vertices));
      continue;
    }
    v.check(level.monotonicity.violations == 0,
            fmt("refinement N=%zu: %zu violations in %zu steps, largest increase %.2e", level.vertices,
                level.monotonicity.violations, level.monotonicity.steps, level.monotonicity.worst_increase));
  }
  return v;
}

void report(const Verdict& v) {
  std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", v.id, v.title.c_str());
  for (const std::string& note : v.notes) std::printf("      %s\n", note.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  std::vector<Verdict> verdicts;
  const auto run = [&](Verdict v) {
    report(v);
    verdicts.push_back(std::move(v));
  };

  run(criterion_flux_law());
  run(criterion_chain_rule());

  std::vector<FlowOutcome> flows;
  for (const FlowCase& fc : flow_suite()) flows.push_back(run_flow(fc));
  run(criterion_de_giorgi(flows));
  run(criterion_conservation(flows));

  run(criterion_quasimetric());
  run(criterion_decoupling());
  run(criterion_properties());

  StudyReport study;
  run(criterion_refinement(study));
  run(criterion_monotonicity(flows, study));

  const auto failed = std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return !v.pass; });
  std::printf("%zu of %zu criteria passed\n", verdicts.size() - static_cast<std::size_t>(failed), verdicts.size());
  return failed == 0 ? 0 : 1;
}
