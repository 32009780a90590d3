#include "graphflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "graphflow/error.hpp"

namespace graphflow {

namespace {

double clip(double x, double hi) { return std::clamp(x, 0.0, hi); }

void check_thresholds(const SpeciesPairState& state, const System& system) {
  const double thr = system.mobility.density_threshold();
  for (int i = 0; i < 2; ++i) {
    if (state[i].size() != system.graph.num_vertices()) {
      fail(ErrorCode::kSizeMismatch, "state does not match the graph");
    }
    for (std::size_t l = 0; l < state[i].size(); ++l) {
      const double r = state[i][l];
      if (!(r >= -1e-12) || r > thr + 1e-12) {
        std::ostringstream os;
        os << "species " << i + 1 << " density " << r << " at vertex " << l
           << " violates the mobility box [0, " << thr << "]";
        fail(ErrorCode::kThresholdExceeded, os.str());
      }
    }
  }
}

EdgeFluxPair gradient_flow_flux(const SpeciesPairState& state, const System& system) {
  EdgeFluxPair out;
  for (int i = 0; i < 2; ++i) {
    const EdgeField drive =
        nonlocal_gradient(variational_derivative(state, system.kernels, system.graph, i), system.graph);
    out[i] = upwind_flux_from_drive(system.graph, state[i], drive, system.kernels.beta()[static_cast<std::size_t>(i)],
                                    system.mobility, system.exponents, true);
  }
  return out;
}

}  // namespace

EdgeField upwind_flux_from_drive(const FiniteGraph& graph, const NodeField& rho,
                                 const EdgeField& drive, double beta, const Mobility& mobility,
                                 const Exponents& exponents, bool clamp_arguments) {
  if (rho.size() != graph.num_vertices() || drive.size() != graph.num_edges()) {
    fail(ErrorCode::kSizeMismatch, "upwind flux inputs do not match the graph");
  }
  const double power = exponents.q() - 1.0;
  const double thr = mobility.density_threshold();
  EdgeField j(graph.num_edges());
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const Edge& edge = graph.edge(e);
    double a = rho[edge.from];
    double b = rho[edge.to];
    if (clamp_arguments) {
      a = clip(a, thr);
      b = clip(b, thr);
    }
    const double u = beta * drive[e];
    if (u < 0.0) {
      // Potential decreases towards the target: mass leaves edge.from.
      j[e] = mobility(a, b) * std::pow(-u, power);
    } else if (u > 0.0) {
      j[e] = -mobility(b, a) * std::pow(u, power);
    } else {
      j[e] = 0.0;
    }
  }
  return j;
}

EdgeFluxPair upwind_flux(const SpeciesPairState& state, const System& system) {
  check_thresholds(state, system);
  return gradient_flow_flux(state, system);
}

std::array<NodeField, 2> rhs(const SpeciesPairState& state, const System& system) {
  const EdgeFluxPair flux = upwind_flux(state, system);
  std::array<NodeField, 2> out;
  for (int i = 0; i < 2; ++i) {
    out[static_cast<std::size_t>(i)] = nonlocal_divergence(flux[i], system.graph);
    out[static_cast<std::size_t>(i)] *= -1.0;
  }
  return out;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr int kStages = 7;
constexpr double kA[kStages][kStages] = {
    {0, 0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0},
};
constexpr double kB[kStages] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
constexpr double kE[kStages] = {71.0 / 57600,      0,           -71.0 / 16695, 71.0 / 1920,
                                -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

struct Flat {
  std::vector<double> v;
};

Flat flatten(const SpeciesPairState& s) {
  Flat f;
  f.v.insert(f.v.end(), s[0].begin(), s[0].end());
  f.v.insert(f.v.end(), s[1].begin(), s[1].end());
  return f;
}

SpeciesPairState unflatten(const std::vector<double>& v, std::size_t n) {
  SpeciesPairState s;
  s[0] = NodeField(std::vector<double>(v.begin(), v.begin() + static_cast<long>(n)));
  s[1] = NodeField(std::vector<double>(v.begin() + static_cast<long>(n), v.end()));
  return s;
}

EdgeFluxPair weighted_flux(const std::array<EdgeFluxPair, kStages>& stages) {
  EdgeFluxPair out;
  for (int i = 0; i < 2; ++i) {
    out[i] = EdgeField(stages[0][i].size());
    for (int s = 0; s < kStages; ++s) {
      if (kB[s] == 0.0) continue;
      for (std::size_t e = 0; e < out[i].size(); ++e) out[i][e] += kB[s] * stages[static_cast<std::size_t>(s)][i][e];
    }
  }
  return out;
}

}  // namespace

Trajectory integrate(const SpeciesPairState& initial, double t_final, const System& system,
                     const IntegratorOptions& options, FluxLaw law) {
  const FiniteGraph& graph = system.graph;
  const std::size_t n = graph.num_vertices();
  const double thr = system.mobility.density_threshold();
  check_thresholds(initial, system);
  if (!(t_final >= 0.0)) fail(ErrorCode::kInvalidArgument, "final time must be nonnegative");
  if (!law) law = [&system](const SpeciesPairState& s) { return gradient_flow_flux(s, system); };

  Trajectory traj;
  auto derivative = [&](const std::vector<double>& y, EdgeFluxPair& flux_out) {
    flux_out = law(unflatten(y, n));
    ++traj.flux_evaluations;
    std::vector<double> dy(2 * n);
    for (int i = 0; i < 2; ++i) {
      const NodeField div = nonlocal_divergence(flux_out[i], graph);
      for (std::size_t l = 0; l < n; ++l) dy[static_cast<std::size_t>(i) * n + l] = -div[l];
    }
    return dy;
  };

  std::vector<double> y = flatten(initial).v;
  double t = 0.0;
  std::array<EdgeFluxPair, kStages> stage_flux;
  std::array<std::vector<double>, kStages> k;
  k[0] = derivative(y, stage_flux[0]);

  traj.times.push_back(0.0);
  traj.states.push_back(initial);
  traj.node_fluxes.push_back(stage_flux[0]);

  double dt = std::min({options.initial_dt, options.max_dt, t_final > 0.0 ? t_final : 1.0});
  std::vector<double> stage(2 * n), y_new(2 * n);
  std::size_t steps = 0;
  while (t < t_final) {
    if (++steps > options.max_steps) fail(ErrorCode::kStepSizeUnderflow, "maximum number of steps exceeded");
    bool last = false;
    if (t + dt >= t_final) {
      dt = t_final - t;
      last = true;
    }
    if (dt < options.min_dt) {
      std::ostringstream os;
      os << "step size " << dt << " at t = " << t << "; state min/max ";
      const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
      os << *lo << " / " << *hi;
      fail(ErrorCode::kStepSizeUnderflow, os.str());
    }

    for (int s = 1; s < kStages; ++s) {
      for (std::size_t q = 0; q < y.size(); ++q) {
        double acc = 0.0;
        for (int r = 0; r < s; ++r) acc += kA[s][r] * k[static_cast<std::size_t>(r)][q];
        stage[q] = y[q] + dt * acc;
      }
      k[static_cast<std::size_t>(s)] = derivative(stage, stage_flux[static_cast<std::size_t>(s)]);
    }
    // Stage 7 is evaluated at the 5th-order solution (FSAL).
    y_new = stage;

    double err = 0.0;
    for (std::size_t q = 0; q < y.size(); ++q) {
      double e = 0.0;
      for (int s = 0; s < kStages; ++s) e += kE[s] * k[static_cast<std::size_t>(s)][q];
      e *= dt;
      const double sc = options.abs_tol + options.rel_tol * std::max(std::abs(y[q]), std::abs(y_new[q]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / static_cast<double>(y.size()));

    if (!(err <= 1.0)) {
      ++traj.rejected_error;
      const double factor = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      dt *= factor;
      continue;
    }
    const auto [lo, hi] = std::minmax_element(y_new.begin(), y_new.end());
    if (*lo < -options.guard || *hi > thr + options.guard) {
      ++traj.rejected_guard;
      dt *= 0.5;
      continue;
    }
    traj.min_density_before_clamp = std::min(traj.min_density_before_clamp, *lo);
    traj.max_density_before_clamp = std::max(traj.max_density_before_clamp, *hi);

    double clamp_mass = 0.0;
    for (int i = 0; i < 2; ++i) {
      double before = 0.0, after = 0.0;
      for (std::size_t l = 0; l < n; ++l) {
        double& r = y_new[static_cast<std::size_t>(i) * n + l];
        before += r * graph.weight(l);
        const double c = clip(r, thr);
        clamp_mass += std::abs(c - r) * graph.weight(l);
        r = c;
        after += r * graph.weight(l);
      }
      if (after != before && after > 0.0) {
        const double scale = before / after;
        for (std::size_t l = 0; l < n; ++l) y_new[static_cast<std::size_t>(i) * n + l] *= scale;
      }
    }

    const EdgeFluxPair interval = weighted_flux(stage_flux);
    t = last ? t_final : t + dt;
    y = y_new;
    // FSAL: the last stage is the derivative at the accepted point, unless
    // clamping moved it.
    if (clamp_mass > 0.0) {
      k[0] = derivative(y, stage_flux[0]);
    } else {
      k[0] = k[kStages - 1];
      stage_flux[0] = stage_flux[kStages - 1];
    }

    traj.times.push_back(t);
    traj.states.push_back(unflatten(y, n));
    traj.node_fluxes.push_back(stage_flux[0]);
    traj.interval_fluxes.push_back(interval);
    traj.steps.push_back({dt, err, clamp_mass});
    traj.clamp_mass_total += clamp_mass;

    const double factor = err > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))) : 5.0;
    dt = std::min(dt * factor, options.max_dt);
  }
  return traj;
}

}  // namespace graphflow
