#include "graphflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "graphflow/diagnostics.hpp"
#include "graphflow/dynamics.hpp"
#include "graphflow/error.hpp"
#include "graphflow/transport.hpp"

namespace graphflow {

std::size_t worker_count() {
  if (const char* env = std::getenv("GRAPHFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Outcome {
  std::size_t checks = 0;
  double margin = -std::numeric_limits<double>::infinity();
  std::string detail;

  void check(double violation, const std::string& what) {
    ++checks;
    if (violation > margin) {
      margin = violation;
      detail = what;
    }
  }
};

using Rng = std::mt19937_64;

double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

struct Instance {
  FiniteGraph graph;
  Mobility mobility;
  Exponents exponents;
  Beta beta;
};

Mobility random_mobility(Rng& rng) {
  switch (rng() % 3) {
    case 0:
      return Mobility::linear();
    case 1:
      return Mobility::saturating();
    default:
      return Mobility::geometric();
  }
}

FiniteGraph random_graph(Rng& rng, std::size_t n) {
  const std::size_t dim = 1 + rng() % 2;
  std::vector<Point> points(n, Point(dim));
  std::vector<double> weights(n);
  for (std::size_t l = 0; l < n; ++l) {
    // Jittered grid keeps points distinct.
    for (std::size_t c = 0; c < dim; ++c) points[l][c] = uniform(rng, 0.0, 1.0);
    points[l][0] = (static_cast<double>(l) + uniform(rng, 0.1, 0.9)) / static_cast<double>(n);
    weights[l] = uniform(rng, 0.3, 2.0);
  }
  if (rng() % 2 == 0) return build_graph(points, weights, eta_presets::gaussian(uniform(rng, 0.3, 1.5)));
  return build_graph(points, weights, eta_presets::constant(uniform(rng, 0.5, 2.0)));
}

Instance random_instance(Rng& rng, std::size_t n) {
  FiniteGraph g = random_graph(rng, n);
  Mobility m = random_mobility(rng);
  const Exponents ex = Exponents::from_p(uniform(rng, 1.2, 4.0));
  const Beta beta{uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0)};
  return {std::move(g), std::move(m), ex, beta};
}

NodeField random_density(Rng& rng, const FiniteGraph& g, double zero_probability = 0.0) {
  NodeField rho(g.num_vertices());
  double total = 0.0;
  for (std::size_t l = 0; l < rho.size(); ++l) {
    rho[l] = uniform(rng, 0.0, 1.0) < zero_probability ? 0.0 : uniform(rng, 0.05, 1.0);
    total += rho[l] * g.weight(l);
  }
  if (total == 0.0) {
    rho[0] = 1.0;
    total = g.weight(0);
  }
  rho *= 1.0 / total;
  return rho;
}

SpeciesPairState random_state(Rng& rng, const FiniteGraph& g, double zero_probability = 0.0) {
  SpeciesPairState s;
  s[0] = random_density(rng, g, zero_probability);
  s[1] = random_density(rng, g, zero_probability);
  return s;
}

EdgeField random_antisymmetric(Rng& rng, const FiniteGraph& g) {
  EdgeField j(g.num_edges());
  std::normal_distribution<double> normal;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge& edge = g.edge(e);
    if (edge.from > edge.to) continue;
    const double v = uniform(rng, 0.0, 1.0) < 0.2 ? 0.0 : normal(rng);
    j[e] = v;
    j[edge.reverse] = -v;
  }
  return j;
}

EdgeFluxPair random_flux_pair(Rng& rng, const FiniteGraph& g) {
  EdgeFluxPair p;
  p[0] = random_antisymmetric(rng, g);
  p[1] = random_antisymmetric(rng, g);
  return p;
}

EdgeFluxPair scaled(const EdgeFluxPair& a, double c) {
  EdgeFluxPair out = a;
  out[0] *= c;
  out[1] *= c;
  return out;
}

double scale_of(std::initializer_list<double> values) {
  double s = 1.0;
  for (double v : values) s = std::max(s, std::abs(v));
  return s;
}

std::string describe(const char* what, double lhs, double rhs) {
  std::ostringstream os;
  os.precision(17);
  os << what << ": lhs " << lhs << " rhs " << rhs;
  return os.str();
}

Outcome suite_holder(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const Instance in = random_instance(rng, n);
  const auto state = random_state(rng, in.graph);
  const auto j = random_flux_pair(rng, in.graph);
  const auto jb = random_flux_pair(rng, in.graph);
  const double p = in.exponents.p(), q = in.exponents.q();
  Outcome out;
  {
    const double lhs = pairing_l(in.graph, state, j, jb, in.mobility, in.beta, in.exponents);
    const double ajj = pairing_l(in.graph, state, j, j, in.mobility, in.beta, in.exponents);
    const double abb = pairing_l(in.graph, state, jb, jb, in.mobility, in.beta, in.exponents);
    const double rhs = std::pow(abb, 1.0 / p) * std::pow(ajj, 1.0 / q);
    out.check(lhs - rhs - 1e-10 * scale_of({lhs, rhs}), describe("l Hoelder", lhs, rhs));
    const double lambda = uniform(rng, 0.1, 5.0);
    const double eq = pairing_l(in.graph, state, j, scaled(j, lambda), in.mobility, in.beta, in.exponents);
    const double eq_rhs = lambda * ajj;
    out.check(std::abs(eq - eq_rhs) - 1e-8 * scale_of({eq, eq_rhs}), describe("l equality case", eq, eq_rhs));
  }
  {
    const auto v = random_flux_pair(rng, in.graph);
    const auto vb = random_flux_pair(rng, in.graph);
    const double lhs = pairing_l_tilde(in.graph, state, v, vb, in.mobility, in.beta, in.exponents);
    const double av = dual_action(in.graph, state, v, in.mobility, in.beta, in.exponents).total;
    const double ab = dual_action(in.graph, state, vb, in.mobility, in.beta, in.exponents).total;
    const double rhs = std::pow(ab, 1.0 / q) * std::pow(av, 1.0 / p);
    out.check(lhs - rhs - 1e-10 * scale_of({lhs, rhs}), describe("l~ Hoelder", lhs, rhs));
    const double lambda = uniform(rng, 0.1, 5.0);
    const double eq = pairing_l_tilde(in.graph, state, v, scaled(v, lambda), in.mobility, in.beta, in.exponents);
    out.check(std::abs(eq - lambda * av) - 1e-8 * scale_of({eq, lambda * av}),
              describe("l~ equality case", eq, lambda * av));
  }
  return out;
}

Outcome suite_norm(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const Instance in = random_instance(rng, n);
  const auto state = random_state(rng, in.graph);
  const auto j = random_flux_pair(rng, in.graph);
  const auto jb = random_flux_pair(rng, in.graph);
  auto F = [&](const EdgeFluxPair& x) { return minkowski_norm(in.graph, state, x, in.mobility, in.beta, in.exponents); };
  Outcome out;
  const double lambda = uniform(rng, 0.1, 10.0);
  const double fl = F(scaled(j, lambda));
  const double lf = lambda * F(j);
  out.check(std::abs(fl - lf) - 1e-10 * scale_of({fl, lf}), describe("homogeneity", fl, lf));
  EdgeFluxPair sum = j;
  sum[0] += jb[0];
  sum[1] += jb[1];
  const double lhs = F(sum);
  const double rhs = F(j) + F(jb);
  out.check(lhs - rhs - 1e-10 * scale_of({lhs, rhs}), describe("triangle", lhs, rhs));
  return out;
}

Outcome suite_antisym(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const Instance in = random_instance(rng, n);
  const auto state = random_state(rng, in.graph);
  EdgeFluxPair j;
  std::normal_distribution<double> normal;
  for (int i = 0; i < 2; ++i) {
    j[i] = EdgeField(in.graph.num_edges());
    for (double& x : j[i]) x = normal(rng);
  }
  EdgeFluxPair anti;
  for (int i = 0; i < 2; ++i) anti[i] = antisymmetrize_flux(j[i], in.graph);
  Outcome out;
  const double a = action(in.graph, state, j, in.mobility, in.beta, in.exponents).total;
  const double b = action(in.graph, state, anti, in.mobility, in.beta, in.exponents).total;
  out.check(b - a - 1e-12 * scale_of({a}), describe("action after antisymmetrization", b, a));
  for (int i = 0; i < 2; ++i) {
    const NodeField d1 = nonlocal_divergence(j[i], in.graph);
    const NodeField d2 = nonlocal_divergence(anti[i], in.graph);
    double worst = 0.0, size = 0.0;
    for (std::size_t l = 0; l < d1.size(); ++l) {
      worst = std::max(worst, std::abs(d1[l] - d2[l]));
      size = std::max(size, std::abs(d1[l]));
    }
    out.check(worst - 1e-12 * scale_of({size}), describe("divergence change", worst, 0.0));
  }
  return out;
}

Outcome suite_convexity(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const Instance in = random_instance(rng, n);
  const auto s0 = random_state(rng, in.graph, 0.2);
  const auto s1 = random_state(rng, in.graph, 0.2);
  const auto j0 = random_flux_pair(rng, in.graph);
  const auto j1 = random_flux_pair(rng, in.graph);
  const double tau = uniform(rng, 0.0, 1.0);
  SpeciesPairState sm;
  EdgeFluxPair jm;
  for (int i = 0; i < 2; ++i) {
    sm[i] = (1.0 - tau) * s0[i] + tau * s1[i];
    jm[i] = (1.0 - tau) * j0[i] + tau * j1[i];
  }
  const double a0 = action(in.graph, s0, j0, in.mobility, in.beta, in.exponents).total;
  const double a1 = action(in.graph, s1, j1, in.mobility, in.beta, in.exponents).total;
  const double am = action(in.graph, sm, jm, in.mobility, in.beta, in.exponents).total;
  const double rhs = (1.0 - tau) * a0 + tau * a1;
  Outcome out;
  if (std::isinf(rhs)) {
    out.check(-1.0, "endpoint action infinite");
  } else {
    out.check(am - rhs - 1e-10 * scale_of({rhs}), describe("convexity", am, rhs));
  }
  return out;
}

Outcome suite_duality(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const FiniteGraph g = random_graph(rng, n);
  std::normal_distribution<double> normal;
  NodeField phi(g.num_vertices());
  for (double& x : phi) x = normal(rng);
  EdgeField j(g.num_edges());
  for (double& x : j) x = normal(rng);
  const NodeField div = nonlocal_divergence(j, g);
  double lhs = 0.0, size = 0.0;
  for (std::size_t l = 0; l < phi.size(); ++l) {
    lhs += phi[l] * div[l] * g.weight(l);
    size += std::abs(phi[l] * div[l] * g.weight(l));
  }
  const double rhs = divergence_pairing(phi, j, g);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge& edge = g.edge(e);
    size += 0.5 * std::abs((phi[edge.to] - phi[edge.from]) * edge.eta * j[e] * g.weight(edge.from) * g.weight(edge.to));
  }
  Outcome out;
  out.check(std::abs(lhs - rhs) - 1e-12 * scale_of({size}), describe("duality", lhs, rhs));
  return out;
}

Kernel random_kernel(Rng& rng) {
  switch (rng() % 4) {
    case 0:
      return Kernel::distance();
    case 1:
      return Kernel::quadratic();
    case 2:
      return Kernel::gaussian_well(uniform(rng, 0.2, 1.0));
    default:
      return Kernel::morse_like(1.0, 0.5, 0.5, 0.1);
  }
}

Outcome suite_nonnegativity(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const FiniteGraph g = random_graph(rng, n);
  const auto state = random_state(rng, g, 0.4);
  double top = 0.0;
  for (int i = 0; i < 2; ++i) top = std::max(top, *std::max_element(state[i].begin(), state[i].end()));
  Mobility m = Mobility::linear();
  switch (rng() % 3) {
    case 0:
      break;
    case 1:
      m = Mobility::saturating();
      break;
    default:
      m = Mobility::volume_filling(std::max(top, 1.0 / g.min_weight()));
  }
  const Kernel k = random_kernel(rng);
  const double c = uniform(rng, 0.5, 2.0);
  KernelSet kernels(g, k, k.scaled(c), k, random_kernel(rng), {uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0)});
  const System sys{g, m, kernels, Exponents::from_p(uniform(rng, 1.5, 3.0))};
  IntegratorOptions opt;
  opt.rel_tol = 1e-7;
  opt.abs_tol = 1e-9;
  const Trajectory tr = integrate(state, 0.5, sys, opt);
  const ConservationReport r = conservation(tr, sys);
  Outcome out;
  out.check(-r.min_density - 1e-12, describe("min density before clamp", r.min_density, -1e-12));
  out.check(r.clamp_mass - 1e-9, describe("clamp mass", r.clamp_mass, 1e-9));
  out.check(r.max_mass_drift - 1e-10, describe("mass drift", r.max_mass_drift, 1e-10));
  return out;
}

Outcome suite_decoupling(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const FiniteGraph g = random_graph(rng, n);
  const Mobility m = Mobility::linear();
  const Exponents ex = Exponents::from_p(uniform(rng, 1.5, 3.0));
  SpeciesPairState a = random_state(rng, g), b = random_state(rng, g);
  b[1] = a[1];
  const double beta1 = uniform(rng, 0.5, 2.0);
  SolverOptions opt;
  const auto two = transport_cost(g, a, b, 8, m, {beta1, uniform(rng, 0.5, 2.0)}, ex, opt);
  const auto one = transport_cost(g, a, b, 8, m, {1.0, 1.0}, ex, opt);
  const double lhs = two.certificate.objective;
  const double rhs = one.certificate.objective / beta1;
  Outcome out;
  out.check(std::abs(lhs - rhs) - 2.0 * opt.eps_o * scale_of({rhs}), describe("decoupling", lhs, rhs));
  return out;
}

Outcome suite_quasimetric(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const FiniteGraph g = random_graph(rng, n);
  const Mobility m = Mobility::linear();
  const Exponents ex = Exponents::from_p(2.0);
  const auto a = random_state(rng, g), b = random_state(rng, g), c = random_state(rng, g);
  const Beta beta{1.0, 1.0};
  Outcome out;
  const double self = transport_cost(g, a, a, 8, m, beta, ex).value;
  out.check(std::abs(self) - 1e-12, describe("T(a,a)", self, 0.0));
  const double ac = transport_cost(g, a, c, 8, m, beta, ex).value;
  const double ab = transport_cost(g, a, b, 8, m, beta, ex).value;
  const double bc = transport_cost(g, b, c, 8, m, beta, ex).value;
  // The time-discrete cost only satisfies the triangle inequality up to the
  // discretization error of the K = 8 grid.
  out.check(ac - ab - bc - 1e-2 * scale_of({ac}), describe("triangle", ac, ab + bc));
  return out;
}

Outcome suite_lsc(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const Instance in = random_instance(rng, n);
  const auto state = random_state(rng, in.graph, 0.3);
  auto j = random_flux_pair(rng, in.graph);
  // No flux may leave an empty vertex in the limit, otherwise its action is
  // infinite and the check is vacuous.
  for (int i = 0; i < 2; ++i) {
    for (std::size_t e = 0; e < in.graph.num_edges(); ++e) {
      const Edge& edge = in.graph.edge(e);
      const double source = j[i][e] > 0.0 ? state[i][edge.from] : state[i][edge.to];
      if (source == 0.0 || in.mobility(state[i][edge.from], state[i][edge.to]) == 0.0 ||
          in.mobility(state[i][edge.to], state[i][edge.from]) == 0.0) {
        j[i][e] = 0.0;
        j[i][edge.reverse] = 0.0;
      }
    }
  }
  const auto ds = random_state(rng, in.graph);
  const auto dj = random_flux_pair(rng, in.graph);
  const double limit = action(in.graph, state, j, in.mobility, in.beta, in.exponents).total;
  // The perturbed actions approach their limit linearly in 1/k; Richardson
  // extrapolation of two far-out terms estimates the liminf.
  auto perturbed = [&](double k) {
    SpeciesPairState s;
    EdgeFluxPair f;
    for (int i = 0; i < 2; ++i) {
      s[i] = state[i] + (1.0 / k) * ds[i];
      f[i] = j[i] + (1.0 / k) * dj[i];
    }
    return action(in.graph, s, f, in.mobility, in.beta, in.exponents).total;
  };
  const double coarse = perturbed(1e9);
  const double fine = perturbed(1e10);
  const double liminf = fine + (fine - coarse) / 9.0;
  Outcome out;
  out.check(limit - liminf - 1e-8 * scale_of({liminf}), describe("lower semicontinuity", limit, liminf));
  return out;
}

struct Suite {
  Outcome (*run)(std::uint64_t, std::size_t);
  std::size_t min_size;
  std::size_t max_size;
};

const std::map<std::string, Suite>& registry() {
  static const std::map<std::string, Suite> suites{
      {"antisym", {suite_antisym, 2, 7}},
      {"convexity", {suite_convexity, 2, 7}},
      {"decoupling", {suite_decoupling, 2, 4}},
      {"duality", {suite_duality, 2, 7}},
      {"holder", {suite_holder, 2, 7}},
      {"lsc", {suite_lsc, 2, 7}},
      {"nonnegativity", {suite_nonnegativity, 2, 6}},
      {"norm", {suite_norm, 2, 7}},
      {"quasimetric", {suite_quasimetric, 2, 4}},
  };
  return suites;
}

Outcome guarded(const Suite& suite, std::uint64_t seed, std::size_t n) {
  try {
    return suite.run(seed, n);
  } catch (const std::exception& e) {
    Outcome out;
    out.check(kInfinity, std::string("exception: ") + e.what());
    return out;
  }
}

}  // namespace

std::vector<std::string> property_suites() {
  std::vector<std::string> names;
  for (const auto& [name, suite] : registry()) names.push_back(name);
  return names;
}

HarnessReport property_harness(const std::string& suite_name, std::uint64_t seed, std::size_t samples) {
  HarnessReport report;
  report.suite = suite_name;
  report.seed = seed;
  const auto it = registry().find(suite_name);
  if (it == registry().end()) {
    report.note = "unknown suite '" + suite_name + "'";
    return report;
  }
  const Suite& suite = it->second;
  report.samples = samples;
  std::vector<Outcome> outcomes(samples);
  std::vector<std::uint64_t> seeds(samples);
  std::vector<std::size_t> sizes(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    seeds[i] = splitmix(seed ^ splitmix(i + 1));
    sizes[i] = suite.min_size + seeds[i] % (suite.max_size - suite.min_size + 1);
  }
  parallel_for(samples, [&](std::size_t i) { outcomes[i] = guarded(suite, seeds[i], sizes[i]); });
  for (std::size_t i = 0; i < samples; ++i) {
    report.checks += outcomes[i].checks;
    report.worst_margin = std::max(report.worst_margin, outcomes[i].margin);
    if (!(outcomes[i].margin <= 0.0)) {
      PropertyFailure f;
      f.sample = i;
      f.sample_seed = seeds[i];
      f.size = sizes[i];
      f.shrunk_size = sizes[i];
      f.violation = outcomes[i].margin;
      f.detail = outcomes[i].detail;
      // Shrink: the smallest instance drawn from the same seed that still fails.
      for (std::size_t n = suite.min_size; n < sizes[i]; ++n) {
        const Outcome o = guarded(suite, seeds[i], n);
        if (!(o.margin <= 0.0)) {
          f.shrunk_size = n;
          f.violation = o.margin;
          f.detail = o.detail;
          break;
        }
      }
      report.failures.push_back(std::move(f));
    }
  }
  return report;
}

}  // namespace graphflow
