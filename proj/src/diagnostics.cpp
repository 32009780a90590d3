#include "graphflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "graphflow/error.hpp"

namespace graphflow {

namespace {

EdgeFluxPair scaled_gradients(const SpeciesPairState& state, const System& system, double sign) {
  EdgeFluxPair out;
  for (int i = 0; i < 2; ++i) {
    out[i] = nonlocal_gradient(variational_derivative(state, system.kernels, system.graph, i), system.graph);
    out[i] *= sign * system.kernels.beta()[static_cast<std::size_t>(i)];
  }
  return out;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& f, std::size_t upto) {
  double s = 0.0;
  for (std::size_t n = 0; n + 1 <= upto; ++n) {
    if (n + 1 >= t.size()) break;
    s += 0.5 * (t[n + 1] - t[n]) * (f[n] + f[n + 1]);
  }
  return s;
}

}  // namespace

double dissipation(const SpeciesPairState& state, const System& system) {
  const EdgeFluxPair v = scaled_gradients(state, system, -1.0);
  return dual_action(system.graph, state, v, system.mobility, system.kernels.beta(), system.exponents).total;
}

double energy_rate_fd(const SpeciesPairState& state, const System& system, double h) {
  const auto velocity = rhs(state, system);
  SpeciesPairState plus = state, minus = state;
  for (int i = 0; i < 2; ++i) {
    for (std::size_t l = 0; l < state[i].size(); ++l) {
      plus[i][l] += h * velocity[static_cast<std::size_t>(i)][l];
      minus[i][l] -= h * velocity[static_cast<std::size_t>(i)][l];
    }
  }
  return (energy(plus, system.kernels, system.graph) - energy(minus, system.kernels, system.graph)) / (2.0 * h);
}

std::vector<double> energy_series(const Trajectory& trajectory, const System& system) {
  std::vector<double> e;
  e.reserve(trajectory.size());
  for (const auto& s : trajectory.states) e.push_back(energy(s, system.kernels, system.graph));
  return e;
}

DeGiorgiReport de_giorgi(const Trajectory& trajectory, const System& system) {
  DeGiorgiReport r;
  if (trajectory.size() == 0) return r;
  const std::size_t n = trajectory.size();
  std::vector<double> d(n), a(n);
  for (std::size_t k = 0; k < n; ++k) {
    d[k] = dissipation(trajectory.states[k], system);
    a[k] = action(system.graph, trajectory.states[k], trajectory.node_fluxes[k], system.mobility,
                  system.kernels.beta(), system.exponents)
               .total;
  }
  r.energy_start = energy(trajectory.states.front(), system.kernels, system.graph);
  r.energy_end = energy(trajectory.states.back(), system.kernels, system.graph);
  r.dissipation_integral = trapezoid(trajectory.times, d, n - 1) / system.exponents.q();
  r.velocity_integral = trapezoid(trajectory.times, a, n - 1) / system.exponents.p();
  r.g_t = r.energy_end - r.energy_start + r.dissipation_integral + r.velocity_integral;
  return r;
}

EdgeField velocity_of_flux(const FiniteGraph& graph, const NodeField& rho, const EdgeField& flux,
                           const Mobility& mobility, const Exponents& exponents) {
  const double pm1 = exponents.p() - 1.0;
  EdgeField v(graph.num_edges());
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const Edge& edge = graph.edge(e);
    const double j = flux[e];
    if (j == 0.0) continue;
    const double m = j > 0.0 ? mobility(rho[edge.from], rho[edge.to]) : mobility(rho[edge.to], rho[edge.from]);
    const double mag = m > 0.0 ? std::pow(std::abs(j) / m, pm1) : kInfinity;
    v[e] = j > 0.0 ? mag : -mag;
  }
  return v;
}

double chain_rule_residual(const Trajectory& trajectory, const System& system) {
  const std::size_t n = trajectory.size();
  if (n < 2) return 0.0;
  std::vector<double> integrand(n), e(n);
  for (std::size_t k = 0; k < n; ++k) {
    const SpeciesPairState& s = trajectory.states[k];
    EdgeFluxPair v;
    for (int i = 0; i < 2; ++i) {
      v[i] = velocity_of_flux(system.graph, s[i], trajectory.node_fluxes[k][i], system.mobility, system.exponents);
    }
    integrand[k] = pairing_l_tilde(system.graph, s, v, scaled_gradients(s, system, 1.0), system.mobility,
                                   system.kernels.beta(), system.exponents);
    e[k] = energy(s, system.kernels, system.graph);
  }
  double lo = 0.0, hi = 0.0, integral = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    integral += 0.5 * (trajectory.times[k] - trajectory.times[k - 1]) * (integrand[k] + integrand[k - 1]);
    const double c = e[k] - e[0] - integral;
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return hi - lo;
}

double moment(const NodeField& rho, const FiniteGraph& graph, double order) {
  if (!(order > 0.0)) fail(ErrorCode::kInvalidArgument, "moment order must be positive");
  if (rho.size() != graph.num_vertices()) fail(ErrorCode::kSizeMismatch, "density does not match the graph");
  const std::vector<double> origin(graph.dimension(), 0.0);
  double s = 0.0;
  for (std::size_t l = 0; l < rho.size(); ++l) {
    s += std::pow(distance(graph.point(l), origin), order) * rho[l] * graph.weight(l);
  }
  return s;
}

double moment(const SpeciesPairState& state, const FiniteGraph& graph, double order) {
  return moment(state[0], graph, order) + moment(state[1], graph, order);
}

namespace {

struct Atoms {
  std::vector<std::size_t> index;
  std::vector<double> mass;
};

Atoms positive_atoms(const std::vector<double>& mass) {
  Atoms a;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] < 0.0) fail(ErrorCode::kInvalidArgument, "atomic masses must be nonnegative");
    if (mass[i] > 0.0) {
      a.index.push_back(i);
      a.mass.push_back(mass[i]);
    }
  }
  return a;
}

// Successive shortest augmenting paths with Dijkstra on reduced costs over
// the dense bipartite network S -> sources -> sinks -> T.
std::vector<PlanEntry> solve_transport(const std::vector<Point>& pa, const std::vector<double>& ma,
                                       const std::vector<Point>& pb, const std::vector<double>& mb) {
  if (pa.size() != ma.size() || pb.size() != mb.size()) {
    fail(ErrorCode::kSizeMismatch, "points and masses differ in length");
  }
  double ta = 0.0, tb = 0.0;
  for (double v : ma) ta += v;
  for (double v : mb) tb += v;
  if (std::abs(ta - tb) > 1e-10) {
    std::ostringstream os;
    os << "total masses differ: " << ta << " vs " << tb;
    fail(ErrorCode::kMassMismatch, os.str());
  }
  const Atoms A = positive_atoms(ma);
  const Atoms B = positive_atoms(mb);
  const std::size_t na = A.index.size(), nb = B.index.size();
  std::vector<double> cost(na * nb);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) cost[i * nb + j] = distance(pa[A.index[i]], pb[B.index[j]]);
  }
  std::vector<double> supply = A.mass, demand = B.mass, flow(na * nb, 0.0);
  // Node numbering: 0 = S, 1..na sources, na+1..na+nb sinks, na+nb+1 = T.
  const std::size_t V = na + nb + 2, S = 0, T = na + nb + 1;
  std::vector<double> pot(V, 0.0), dist(V);
  std::vector<std::size_t> prev(V);
  std::vector<char> done(V);
  const double total = std::min(ta, tb);
  double remaining = total;
  const double inf = std::numeric_limits<double>::infinity();
  // Every augmentation saturates an arc, so this cap is never reached unless
  // rounding stalls the loop.
  const std::size_t max_augmentations = 4 * (na + 1) * (nb + 1) + 16;
  std::size_t augmentations = 0;
  while (remaining > 1e-15 * std::max(1.0, total)) {
    if (++augmentations > max_augmentations) {
      fail(ErrorCode::kNonConvergent, "transport LP did not terminate");
    }
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), 0);
    dist[S] = 0.0;
    for (;;) {
      std::size_t u = V;
      double best = inf;
      for (std::size_t k = 0; k < V; ++k) {
        if (!done[k] && dist[k] < best) {
          best = dist[k];
          u = k;
        }
      }
      if (u == V) break;
      done[u] = 1;
      auto relax = [&](std::size_t v, double c) {
        // Rounding can make reduced costs slightly negative; touching a
        // settled node would then corrupt the predecessor tree.
        if (done[v]) return;
        const double nd = dist[u] + c + pot[u] - pot[v];
        if (nd < dist[v]) {
          dist[v] = nd;
          prev[v] = u;
        }
      };
      if (u == S) {
        for (std::size_t i = 0; i < na; ++i) {
          if (supply[i] > 0.0) relax(1 + i, 0.0);
        }
      } else if (u <= na) {
        const std::size_t i = u - 1;
        for (std::size_t j = 0; j < nb; ++j) relax(1 + na + j, cost[i * nb + j]);
      } else if (u < T) {
        const std::size_t j = u - 1 - na;
        if (demand[j] > 0.0) relax(T, 0.0);
        for (std::size_t i = 0; i < na; ++i) {
          if (flow[i * nb + j] > 0.0) relax(1 + i, -cost[i * nb + j]);
        }
      }
    }
    if (!std::isfinite(dist[T])) break;
    for (std::size_t k = 0; k < V; ++k) pot[k] += std::min(dist[k], dist[T]);

    // Bottleneck along the path.
    double push = inf;
    for (std::size_t v = T; v != S; v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == S) {
        push = std::min(push, supply[v - 1]);
      } else if (v == T) {
        push = std::min(push, demand[u - 1 - na]);
      } else if (u > na) {
        push = std::min(push, flow[(v - 1) * nb + (u - 1 - na)]);
      }
    }
    for (std::size_t v = T; v != S; v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == S) {
        supply[v - 1] = supply[v - 1] - push <= 1e-18 ? 0.0 : supply[v - 1] - push;
      } else if (v == T) {
        demand[u - 1 - na] = demand[u - 1 - na] - push <= 1e-18 ? 0.0 : demand[u - 1 - na] - push;
      } else if (u <= na) {
        flow[(u - 1) * nb + (v - 1 - na)] += push;
      } else {
        double& f = flow[(v - 1) * nb + (u - 1 - na)];
        f = f - push <= 1e-18 ? 0.0 : f - push;
      }
    }
    remaining -= push;
  }
  std::vector<PlanEntry> plan;
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      if (flow[i * nb + j] > 0.0) plan.push_back({A.index[i], B.index[j], flow[i * nb + j]});
    }
  }
  return plan;
}

}  // namespace

std::vector<PlanEntry> w1_plan(const std::vector<Point>& points_a, const std::vector<double>& mass_a,
                               const std::vector<Point>& points_b, const std::vector<double>& mass_b) {
  return solve_transport(points_a, mass_a, points_b, mass_b);
}

double w1_atomic(const std::vector<Point>& points_a, const std::vector<double>& mass_a,
                 const std::vector<Point>& points_b, const std::vector<double>& mass_b) {
  double s = 0.0;
  for (const auto& e : solve_transport(points_a, mass_a, points_b, mass_b)) {
    s += e.mass * distance(points_a[e.from], points_b[e.to]);
  }
  return s;
}

double w1_distance(const NodeField& a, const NodeField& b, const FiniteGraph& graph) {
  if (a.size() != graph.num_vertices() || b.size() != graph.num_vertices()) {
    fail(ErrorCode::kSizeMismatch, "densities do not match the graph");
  }
  std::vector<double> ma(a.size()), mb(b.size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    ma[l] = std::max(a[l], 0.0) * graph.weight(l);
    mb[l] = std::max(b[l], 0.0) * graph.weight(l);
  }
  return w1_atomic(graph.base().points, ma, graph.base().points, mb);
}

double w1_distance(const SpeciesPairState& a, const SpeciesPairState& b, const FiniteGraph& graph) {
  return w1_distance(a[0], b[0], graph) + w1_distance(a[1], b[1], graph);
}

FluxBound flux_bound(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& flux,
                     const Mobility& mobility, const Beta& beta, const Exponents& exponents,
                     FluxWeight weight) {
  FluxBound out;
  for (int i = 0; i < 2; ++i) {
    for (std::size_t e = 0; e < graph.num_edges(); ++e) {
      const Edge& edge = graph.edge(e);
      const double d = graph.edge_length(e);
      const double phi = weight == FluxWeight::kTruncatedDistance ? std::min(2.0, d)
                                                                   : std::max(d, std::pow(d, exponents.p()));
      out.flux_integral +=
          0.5 * phi * std::abs(flux[i][e]) * edge.eta * graph.weight(edge.from) * graph.weight(edge.to);
    }
  }
  out.action = action(graph, state, flux, mobility, beta, exponents).total;
  const double root = std::pow(out.action, 1.0 / exponents.p());
  if (root > 0.0) {
    out.ratio = out.flux_integral / root;
  } else {
    out.ratio = out.flux_integral > 0.0 ? kInfinity : 0.0;
  }
  return out;
}

MonotonicityReport energy_monotonicity(const Trajectory& trajectory, const System& system,
                                       const IntegratorOptions& options) {
  MonotonicityReport r;
  const auto e = energy_series(trajectory, system);
  for (std::size_t k = 1; k < e.size(); ++k) {
    ++r.steps;
    const double increase = e[k] - e[k - 1];
    const double allowance = 10.0 * (options.abs_tol + options.rel_tol * std::abs(e[k - 1]));
    r.worst_increase = std::max(r.worst_increase, increase);
    if (increase > allowance) {
      ++r.violations;
      r.worst_excess = std::max(r.worst_excess, increase - allowance);
    }
  }
  return r;
}

ConservationReport conservation(const Trajectory& trajectory, const System& system) {
  ConservationReport r;
  if (trajectory.size() == 0) return r;
  const FiniteGraph& graph = system.graph;
  const auto& first = trajectory.states.front();
  r.min_density = std::min(*std::min_element(first[0].begin(), first[0].end()),
                           *std::min_element(first[1].begin(), first[1].end()));
  r.max_density = std::max(*std::max_element(first[0].begin(), first[0].end()),
                           *std::max_element(first[1].begin(), first[1].end()));
  if (trajectory.size() > 1) {
    r.min_density = std::min(r.min_density, trajectory.min_density_before_clamp);
    r.max_density = std::max(r.max_density, trajectory.max_density_before_clamp);
  }
  r.clamp_mass = trajectory.clamp_mass_total;
  for (int i = 0; i < 2; ++i) {
    const double m0 = mass(first[i], graph);
    for (const auto& s : trajectory.states) r.max_mass_drift = std::max(r.max_mass_drift, std::abs(mass(s[i], graph) - m0));
    for (std::size_t k = 0; k + 1 < trajectory.size(); ++k) {
      const double dt = trajectory.times[k + 1] - trajectory.times[k];
      const NodeField div = nonlocal_divergence(trajectory.interval_fluxes[k][i], graph);
      for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
        const double d = trajectory.states[k + 1][i][l] - trajectory.states[k][i][l] + dt * div[l];
        r.continuity_defect = std::max(r.continuity_defect, std::abs(d));
      }
    }
  }
  return r;
}

}  // namespace graphflow
