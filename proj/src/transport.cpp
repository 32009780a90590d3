#include "graphflow/transport.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "graphflow/error.hpp"

namespace graphflow {

namespace {


void require_sizes(const FiniteGraph& graph, const SpeciesPairState& state) {
  for (int i = 0; i < 2; ++i) {
    if (state[i].size() != graph.num_vertices()) fail(ErrorCode::kSizeMismatch, "state does not match the graph");
  }
}

void require_sizes(const FiniteGraph& graph, const EdgeFluxPair& flux) {
  for (int i = 0; i < 2; ++i) {
    if (flux[i].size() != graph.num_edges()) fail(ErrorCode::kSizeMismatch, "edge field does not match the graph");
  }
}

void require_antisymmetric(const FiniteGraph& graph, const EdgeFluxPair& v, const char* what) {
  for (int i = 0; i < 2; ++i) {
    double scale = 0.0;
    for (double x : v[i]) scale = std::max(scale, std::abs(x));
    if (!is_antisymmetric(v[i], graph, 1e-12 * std::max(1.0, scale))) {
      fail(ErrorCode::kNonAntisymmetric, std::string(what) + " of species " + std::to_string(i + 1) +
                                             " is not antisymmetric");
    }
  }
}

void require_beta(const Beta& beta) {
  if (!(beta[0] > 0.0) || !(beta[1] > 0.0)) fail(ErrorCode::kInvalidArgument, "beta must be positive");
}

}  // namespace

ActionValue action(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& flux,
                   const Mobility& mobility, const Beta& beta, const Exponents& exponents) {
  require_sizes(graph, state);
  require_sizes(graph, flux);
  require_beta(beta);
  ActionValue out;
  for (int i = 0; i < 2; ++i) {
    const NodeField& rho = state[i];
    double sum = 0.0;
    for (std::size_t e = 0; e < graph.num_edges(); ++e) {
      const Edge& edge = graph.edge(e);
      const double a = alpha_density(flux[i][e], rho[edge.from], rho[edge.to], mobility, exponents);
      const double b =
          alpha_density(-flux[i][e], rho[edge.to], rho[edge.from], mobility, exponents);
      const double w = edge.eta * graph.weight(edge.from) * graph.weight(edge.to);
      if (a + b > 0.0) sum += (a + b) * w;
    }
    out.per_species[static_cast<std::size_t>(i)] = 0.5 * sum;
  }
  out.total = out.per_species[0] / beta[0] + out.per_species[1] / beta[1];
  return out;
}

ActionValue dual_action(const FiniteGraph& graph, const SpeciesPairState& state,
                        const EdgeFluxPair& velocity, const Mobility& mobility, const Beta& beta,
                        const Exponents& exponents) {
  require_sizes(graph, state);
  require_sizes(graph, velocity);
  require_beta(beta);
  require_antisymmetric(graph, velocity, "velocity");
  ActionValue out;
  for (int i = 0; i < 2; ++i) {
    const NodeField& rho = state[i];
    double sum = 0.0;
    for (std::size_t e = 0; e < graph.num_edges(); ++e) {
      const Edge& edge = graph.edge(e);
      const double a = alpha_tilde_density(velocity[i][e], rho[edge.from], rho[edge.to], mobility, exponents);
      if (a > 0.0) sum += a * edge.eta * graph.weight(edge.from) * graph.weight(edge.to);
    }
    out.per_species[static_cast<std::size_t>(i)] = sum;
  }
  out.total = out.per_species[0] / beta[0] + out.per_species[1] / beta[1];
  return out;
}

EdgeField flux_of_velocity(const FiniteGraph& graph, const NodeField& rho, const EdgeField& velocity,
                           const Mobility& mobility, const Exponents& exponents) {
  if (rho.size() != graph.num_vertices() || velocity.size() != graph.num_edges()) {
    fail(ErrorCode::kSizeMismatch, "flux_of_velocity inputs do not match the graph");
  }
  const double power = exponents.q() - 1.0;
  EdgeField j(graph.num_edges());
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const Edge& edge = graph.edge(e);
    const double v = velocity[e];
    if (v > 0.0) {
      j[e] = mobility(rho[edge.from], rho[edge.to]) * std::pow(v, power);
    } else if (v < 0.0) {
      j[e] = -mobility(rho[edge.to], rho[edge.from]) * std::pow(-v, power);
    }
  }
  return j;
}

EdgeFluxPair flux_of_velocity(const FiniteGraph& graph, const SpeciesPairState& state,
                              const EdgeFluxPair& velocity, const Mobility& mobility,
                              const Exponents& exponents) {
  EdgeFluxPair out;
  for (int i = 0; i < 2; ++i) out[i] = flux_of_velocity(graph, state[i], velocity[i], mobility, exponents);
  return out;
}

double pairing_l(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& j,
                 const EdgeFluxPair& jbar, const Mobility& mobility, const Beta& beta,
                 const Exponents& exponents) {
  require_sizes(graph, jbar);
  const ActionValue a = action(graph, state, j, mobility, beta, exponents);
  if (!std::isfinite(a.total)) fail(ErrorCode::kInfiniteAction, "l_rho(j) needs a flux of finite action");
  const double pm1 = exponents.p() - 1.0;
  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    const NodeField& rho = state[i];
    double sum = 0.0;
    for (std::size_t e = 0; e < graph.num_edges(); ++e) {
      const Edge& edge = graph.edge(e);
      const double x = j[i][e];
      double slope = 0.0;
      // Finite action guarantees a positive mobility wherever the flux is
      // nonzero in the corresponding direction.
      if (x > 0.0) {
        slope = std::pow(x / mobility(rho[edge.from], rho[edge.to]), pm1);
      } else if (x < 0.0) {
        slope = -std::pow(-x / mobility(rho[edge.to], rho[edge.from]), pm1);
      }
      sum += jbar[i][e] * slope * edge.eta * graph.weight(edge.from) * graph.weight(edge.to);
    }
    total += 0.5 * sum / beta[static_cast<std::size_t>(i)];
  }
  return total;
}

double pairing_l_tilde(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& v,
                       const EdgeFluxPair& vbar, const Mobility& mobility, const Beta& beta,
                       const Exponents& exponents) {
  require_sizes(graph, state);
  require_sizes(graph, v);
  require_sizes(graph, vbar);
  require_beta(beta);
  require_antisymmetric(graph, v, "velocity");
  require_antisymmetric(graph, vbar, "test velocity");
  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    const EdgeField j = flux_of_velocity(graph, state[i], v[i], mobility, exponents);
    double sum = 0.0;
    for (std::size_t e = 0; e < graph.num_edges(); ++e) {
      const Edge& edge = graph.edge(e);
      sum += vbar[i][e] * j[e] * edge.eta * graph.weight(edge.from) * graph.weight(edge.to);
    }
    total += 0.5 * sum / beta[static_cast<std::size_t>(i)];
  }
  return total;
}

double minkowski_norm(const FiniteGraph& graph, const SpeciesPairState& state, const EdgeFluxPair& j,
                      const Mobility& mobility, const Beta& beta, const Exponents& exponents) {
  return std::pow(action(graph, state, j, mobility, beta, exponents).total, 1.0 / exponents.p());
}

EdgeFluxPair negative_gradient_flux(const SpeciesPairState& state, const System& system) {
  return upwind_flux(state, system);
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre_unit(int n) {
  std::vector<double> x, w;
  switch (n) {
    case 1:
      x = {0.0};
      w = {2.0};
      break;
    case 2:
      x = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
      w = {1.0, 1.0};
      break;
    case 3:
      x = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
      w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      break;
    case 4:
      x = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
      w = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
      break;
    case 5:
      x = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
      w = {0.2369268850561891, 0.4786286704993665, 128.0 / 225.0, 0.4786286704993665,
           0.2369268850561891};
      break;
    default:
      fail(ErrorCode::kInvalidArgument, "quadrature_nodes must be between 1 and 5");
  }
  for (auto& t : x) t = 0.5 * (1.0 + t);
  for (auto& t : w) t *= 0.5;
  return {x, w};
}

namespace {

// The continuity operator restricted to antisymmetric fluxes, one unknown per
// unordered edge (a < b) holding j(a, b):
//   (D J)(a) += eta mu_b J,  (D J)(b) -= eta mu_a J
// so that the density update is rho' = -D J.
class ContinuityOperator {
 public:
  explicit ContinuityOperator(const FiniteGraph& graph) : graph_(graph) {
    for (std::size_t e = 0; e < graph.num_edges(); ++e) {
      if (graph.edge(e).from < graph.edge(e).to) undirected_.push_back(e);
    }
    const std::size_t n = graph.num_vertices();
    Eigen::MatrixXd ddt = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t u = 0; u < undirected_.size(); ++u) {
      const Edge& edge = graph.edge(undirected_[u]);
      const auto a = static_cast<Eigen::Index>(edge.from);
      const auto b = static_cast<Eigen::Index>(edge.to);
      const double ca = edge.eta * graph.weight(edge.to);
      const double cb = -edge.eta * graph.weight(edge.from);
      ddt(a, a) += ca * ca;
      ddt(b, b) += cb * cb;
      ddt(a, b) += ca * cb;
      ddt(b, a) += ca * cb;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ddt);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double top = lambda.size() > 0 ? lambda.cwiseAbs().maxCoeff() : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      if (lambda(k) > 1e-12 * top) inv(k) = 1.0 / lambda(k);
    }
    pinv_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  }

  std::size_t edges() const noexcept { return undirected_.size(); }
  std::size_t ordered_id(std::size_t u) const { return undirected_[u]; }

  void apply(const double* J, double* out) const {
    std::fill(out, out + graph_.num_vertices(), 0.0);
    for (std::size_t u = 0; u < undirected_.size(); ++u) {
      const Edge& edge = graph_.edge(undirected_[u]);
      out[edge.from] += edge.eta * graph_.weight(edge.to) * J[u];
      out[edge.to] -= edge.eta * graph_.weight(edge.from) * J[u];
    }
  }

  void apply_transpose(const double* y, double* out) const {
    for (std::size_t u = 0; u < undirected_.size(); ++u) {
      const Edge& edge = graph_.edge(undirected_[u]);
      out[u] = edge.eta * (graph_.weight(edge.to) * y[edge.from] - graph_.weight(edge.from) * y[edge.to]);
    }
  }

  // Minimum-norm J with D J = b (least squares when b is not in the range).
  std::vector<double> min_norm(const std::vector<double>& b) const {
    const Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
    const Eigen::VectorXd y = pinv_ * bv;
    std::vector<double> J(undirected_.size());
    apply_transpose(y.data(), J.data());
    return J;
  }

  // Orthogonal projection onto the row space of D.
  void project_row_space(const double* J, double* out) const {
    std::vector<double> dj(graph_.num_vertices());
    apply(J, dj.data());
    const Eigen::Map<const Eigen::VectorXd> v(dj.data(), static_cast<Eigen::Index>(dj.size()));
    const Eigen::VectorXd y = pinv_ * v;
    apply_transpose(y.data(), out);
  }

 private:
  const FiniteGraph& graph_;
  std::vector<std::size_t> undirected_;
  Eigen::MatrixXd pinv_;
};

struct SpeciesPath {
  std::vector<std::vector<double>> rho;  // K + 1 states
};

// Objective of the reduced problem: the unknowns are the per-interval
// fluxes of both species on unordered edges; states are obtained from the
// start state by accumulating the continuity equation.
class PathObjective {
 public:
  PathObjective(const FiniteGraph& graph, const ContinuityOperator& op, const SpeciesPairState& start,
                std::size_t steps, const Mobility& mobility, const Beta& beta, const Exponents& exponents,
                int quadrature_nodes)
      : graph_(graph),
        op_(op),
        start_(start),
        steps_(steps),
        dt_(1.0 / static_cast<double>(steps)),
        mobility_(mobility),
        beta_(beta),
        exponents_(exponents),
        threshold_(mobility.density_threshold()) {
    std::tie(nodes_, weights_) = gauss_legendre_unit(quadrature_nodes);
  }

  std::size_t block() const noexcept { return op_.edges(); }
  std::size_t size() const noexcept { return 2 * steps_ * op_.edges(); }
  double dt() const noexcept { return dt_; }
  std::size_t steps() const noexcept { return steps_; }

  const double* flux(const std::vector<double>& x, int species, std::size_t s) const {
    return x.data() + (static_cast<std::size_t>(species) * steps_ + s) * block();
  }

  // States rho_0..rho_K for one species.
  std::vector<std::vector<double>> states(const std::vector<double>& x, int species) const {
    const std::size_t n = graph_.num_vertices();
    std::vector<std::vector<double>> rho(steps_ + 1, std::vector<double>(n));
    rho[0] = start_[species].values();
    std::vector<double> dj(n);
    for (std::size_t s = 0; s < steps_; ++s) {
      op_.apply(flux(x, species, s), dj.data());
      for (std::size_t l = 0; l < n; ++l) rho[s + 1][l] = rho[s][l] - dt_ * dj[l];
    }
    return rho;
  }

  // Returns +inf outside the box. When grad is non-null it receives the
  // (unprojected) gradient.
  double evaluate(const std::vector<double>& x, double eps, std::vector<double>* grad) const {
    const std::size_t n = graph_.num_vertices();
    const std::size_t E = block();
    const double p = exponents_.p();
    if (grad) grad->assign(size(), 0.0);
    double total = 0.0;
    std::vector<double> dj(n), rho_q(n), suffix(n), g_rho(n), tmp(E);
    for (int i = 0; i < 2; ++i) {
      const auto rho = states(x, i);
      for (const auto& state : rho) {
        for (double r : state) {
          if (!(r >= -kBoxSlack) || r > threshold_ + kBoxSlack) return kInfinity;
        }
      }
      const double inv_beta = 1.0 / beta_[static_cast<std::size_t>(i)];
      std::fill(suffix.begin(), suffix.end(), 0.0);
      for (std::size_t s = steps_; s-- > 0;) {
        const double* J = flux(x, i, s);
        double* gJ = grad ? grad->data() + (static_cast<std::size_t>(i) * steps_ + s) * E : nullptr;
        op_.apply(J, dj.data());
        // Accumulates tau-weighted state sensitivities of this interval.
        std::vector<double> local(n, 0.0), interval_sum(n, 0.0);
        for (std::size_t g = 0; g < nodes_.size(); ++g) {
          const double tau = nodes_[g];
          for (std::size_t l = 0; l < n; ++l) rho_q[l] = rho[s][l] - tau * dt_ * dj[l];
          std::fill(g_rho.begin(), g_rho.end(), 0.0);
          const double wq = weights_[g] * dt_ * inv_beta;
          for (std::size_t u = 0; u < E; ++u) {
            const double Ju = J[u];
            if (Ju == 0.0) continue;
            const Edge& edge = graph_.edge(op_.ordered_id(u));
            const std::size_t src = Ju > 0.0 ? edge.from : edge.to;
            const std::size_t dst = Ju > 0.0 ? edge.to : edge.from;
            const double r = clip(rho_q[src]);
            const double t = clip(rho_q[dst]);
            const double m = mobility_(r, t) + eps;
            if (!(m > 0.0)) return kInfinity;
            const double c = wq * edge.eta * graph_.weight(edge.from) * graph_.weight(edge.to);
            const double a = std::abs(Ju);
            const double ap = std::pow(a, p);
            const double mp = std::pow(m, p - 1.0);
            total += c * ap / mp;
            if (grad) {
              const double d_a = c * p * ap / (a * mp);
              gJ[u] += Ju > 0.0 ? d_a : -d_a;
              const double d_m = -c * (p - 1.0) * ap / (mp * m);
              const auto dm = mobility_.gradient(r, t);
              g_rho[src] += d_m * dm[0];
              g_rho[dst] += d_m * dm[1];
            }
          }
          if (grad) {
            for (std::size_t l = 0; l < n; ++l) {
              local[l] += tau * g_rho[l];
              interval_sum[l] += g_rho[l];
            }
          }
        }
        if (grad) {
          // d rho_q / d J_s = -tau dt D and d rho_q / d J_r = -dt D for r < s.
          for (std::size_t l = 0; l < n; ++l) local[l] += suffix[l];
          op_.apply_transpose(local.data(), tmp.data());
          for (std::size_t u = 0; u < E; ++u) gJ[u] -= dt_ * tmp[u];
          for (std::size_t l = 0; l < n; ++l) suffix[l] += interval_sum[l];
        }
      }
    }
    return total;
  }

  // Removes the component that would change the endpoint: the time sum of
  // every species' flux keeps its row-space part.
  void project(std::vector<double>& g) const {
    const std::size_t E = block();
    std::vector<double> sum(E), proj(E);
    for (int i = 0; i < 2; ++i) {
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t s = 0; s < steps_; ++s) {
        const double* gs = g.data() + (static_cast<std::size_t>(i) * steps_ + s) * E;
        for (std::size_t u = 0; u < E; ++u) sum[u] += gs[u];
      }
      op_.project_row_space(sum.data(), proj.data());
      for (std::size_t s = 0; s < steps_; ++s) {
        double* gs = g.data() + (static_cast<std::size_t>(i) * steps_ + s) * E;
        for (std::size_t u = 0; u < E; ++u) gs[u] -= proj[u] / static_cast<double>(steps_);
      }
    }
  }

  double residual(const std::vector<double>& projected_gradient) const {
    double s = 0.0;
    for (double v : projected_gradient) s += v * v;
    return std::sqrt(s / dt_);
  }

 private:
  static constexpr double kBoxSlack = 1e-12;
  double clip(double r) const { return std::clamp(r, 0.0, threshold_); }

  const FiniteGraph& graph_;
  const ContinuityOperator& op_;
  const SpeciesPairState& start_;
  std::size_t steps_;
  double dt_;
  const Mobility& mobility_;
  Beta beta_;
  Exponents exponents_;
  double threshold_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

struct LevelOutcome {
  std::size_t iterations = 0;
  double residual = kInfinity;
};

// Limited-memory BFGS on the affine feasible set; all search directions stay
// in the range of the projection, so the iterate stays feasible.
LevelOutcome minimize(const PathObjective& objective, std::vector<double>& x, double eps,
                      const SolverOptions& options, std::size_t budget) {
  LevelOutcome out;
  std::vector<double> g, g_new, d(x.size()), x_new(x.size());
  double f = objective.evaluate(x, eps, &g);
  if (!std::isfinite(f)) fail(ErrorCode::kNotConverged, "initial path has infinite smoothed action");
  objective.project(g);
  std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;
  std::deque<double> rhos;
  for (;;) {
    out.residual = objective.residual(g);
    if (out.residual <= options.eps_o || out.iterations >= budget) return out;
    ++out.iterations;

    // Two-loop recursion.
    d = g;
    std::vector<double> alphas(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      alphas[k] = rhos[k] * dot(memory[k].first, d);
      for (std::size_t t = 0; t < d.size(); ++t) d[t] -= alphas[k] * memory[k].second[t];
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      const double gamma = dot(s, y) / dot(y, y);
      for (double& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double beta = rhos[k] * dot(memory[k].second, d);
      for (std::size_t t = 0; t < d.size(); ++t) d[t] += (alphas[k] - beta) * memory[k].first[t];
    }
    for (double& v : d) v = -v;
    objective.project(d);
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      memory.clear();
      rhos.clear();
      d = g;
      for (double& v : d) v = -v;
      slope = dot(g, d);
    }

    double step = 1.0;
    if (memory.empty()) step = std::min(1.0, 1.0 / std::sqrt(dot(g, g)));
    // Armijo backtracking; once function differences drop to round-off, the
    // approximate Wolfe test on the directional derivative takes over.
    double f_new = kInfinity;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t t = 0; t < x.size(); ++t) x_new[t] = x[t] + step * d[t];
      f_new = objective.evaluate(x_new, eps, &g_new);
      if (std::isfinite(f_new)) {
        objective.project(g_new);
        if (f_new <= f + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
        const double slope_new = dot(g_new, d);
        if (f_new <= f + 1e-12 * std::abs(f) && std::abs(slope_new) <= 0.8 * std::abs(slope)) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) return out;

    std::vector<double> s(x.size()), y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
      s[t] = x_new[t] - x[t];
      y[t] = g_new[t] - g[t];
    }
    const double sy = dot(s, y);
    if (sy > 1e-14 * std::sqrt(dot(s, s) * dot(y, y))) {
      memory.emplace_back(std::move(s), std::move(y));
      rhos.push_back(1.0 / sy);
      if (memory.size() > options.memory) {
        memory.pop_front();
        rhos.pop_front();
      }
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
  }
}

EdgeField ordered_flux(const ContinuityOperator& op, const FiniteGraph& graph, const double* J) {
  EdgeField j(graph.num_edges());
  for (std::size_t u = 0; u < op.edges(); ++u) {
    const std::size_t e = op.ordered_id(u);
    j[e] = J[u];
    j[graph.edge(e).reverse] = -J[u];
  }
  return j;
}

std::vector<double> flux_block(const ContinuityOperator& op, const EdgeField& j) {
  std::vector<double> J(op.edges());
  for (std::size_t u = 0; u < op.edges(); ++u) J[u] = j[op.ordered_id(u)];
  return J;
}

void check_endpoint_masses(const FiniteGraph& graph, const SpeciesPairState& a, const SpeciesPairState& b) {
  for (int i = 0; i < 2; ++i) {
    const double ma = mass(a[i], graph);
    const double mb = mass(b[i], graph);
    if (std::abs(ma - mb) > 1e-10) {
      std::ostringstream os;
      os << "species " << i + 1 << " masses differ: " << ma << " vs " << mb;
      fail(ErrorCode::kInfeasibleEndpoints, os.str());
    }
  }
}

void check_box(const SpeciesPairState& state, double threshold, const char* which) {
  for (int i = 0; i < 2; ++i) {
    for (double r : state[i]) {
      if (!(r >= 0.0) || r > threshold) {
        std::ostringstream os;
        os << which << " state has density " << r << " outside [0, " << threshold << "]";
        fail(ErrorCode::kThresholdExceeded, os.str());
      }
    }
  }
}

SpeciesPairState clean_roundoff(SpeciesPairState state, double threshold) {
  for (int i = 0; i < 2; ++i) {
    for (double& r : state[i]) {
      if (r < 0.0 && r >= -1e-12) r = 0.0;
      if (r > threshold && r <= threshold + 1e-12) r = threshold;
    }
  }
  return state;
}

}  // namespace

double continuity_residual(const DiscretePath& path, const FiniteGraph& graph,
                           const SpeciesPairState& start, const SpeciesPairState& end) {
  if (path.states.size() != path.fluxes.size() + 1 || path.states.empty()) {
    fail(ErrorCode::kSizeMismatch, "path needs one more state than fluxes");
  }
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
      worst = std::max(worst, std::abs(path.states.front()[i][l] - start[i][l]));
      worst = std::max(worst, std::abs(path.states.back()[i][l] - end[i][l]));
    }
    for (std::size_t k = 0; k < path.fluxes.size(); ++k) {
      const double dt = path.times[k + 1] - path.times[k];
      const NodeField div = nonlocal_divergence(path.fluxes[k][i], graph);
      for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
        const double r = path.states[k + 1][i][l] - path.states[k][i][l] + dt * div[l];
        worst = std::max(worst, std::abs(r));
      }
    }
  }
  return worst;
}

std::vector<double> geodesic_profile(const DiscretePath& path, const FiniteGraph& graph,
                                     const Mobility& mobility, const Beta& beta,
                                     const Exponents& exponents) {
  const auto [nodes, weights] = gauss_legendre_unit(path.quadrature_nodes);
  const double thr = mobility.density_threshold();
  std::vector<double> profile;
  profile.reserve(path.intervals());
  for (std::size_t k = 0; k < path.intervals(); ++k) {
    double a = 0.0;
    for (std::size_t g = 0; g < nodes.size(); ++g) {
      SpeciesPairState q;
      for (int i = 0; i < 2; ++i) {
        q[i] = NodeField(graph.num_vertices());
        for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
          q[i][l] = (1.0 - nodes[g]) * path.states[k][i][l] + nodes[g] * path.states[k + 1][i][l];
        }
      }
      q = clean_roundoff(std::move(q), thr);
      a += weights[g] * action(graph, q, path.fluxes[k], mobility, beta, exponents).total;
    }
    profile.push_back(a);
  }
  return profile;
}

double path_action(const DiscretePath& path, const FiniteGraph& graph, const Mobility& mobility,
                   const Beta& beta, const Exponents& exponents) {
  const auto profile = geodesic_profile(path, graph, mobility, beta, exponents);
  double total = 0.0;
  for (std::size_t k = 0; k < profile.size(); ++k) total += (path.times[k + 1] - path.times[k]) * profile[k];
  return total;
}

DiscretePath interpolate_path(const FiniteGraph& graph, const std::vector<SpeciesPairState>& states,
                              int quadrature_nodes) {
  if (states.size() < 2) fail(ErrorCode::kInvalidArgument, "a path needs at least two states");
  gauss_legendre_unit(quadrature_nodes);
  const ContinuityOperator op(graph);
  const std::size_t K = states.size() - 1;
  const double dt = 1.0 / static_cast<double>(K);
  DiscretePath path;
  path.quadrature_nodes = quadrature_nodes;
  path.states = states;
  for (std::size_t k = 0; k <= K; ++k) path.times.push_back(static_cast<double>(k) * dt);
  std::vector<double> dj(graph.num_vertices());
  for (std::size_t k = 0; k < K; ++k) {
    EdgeFluxPair flux;
    for (int i = 0; i < 2; ++i) {
      std::vector<double> b(graph.num_vertices());
      for (std::size_t l = 0; l < b.size(); ++l) b[l] = (states[k][i][l] - states[k + 1][i][l]) / dt;
      const auto J = op.min_norm(b);
      op.apply(J.data(), dj.data());
      for (std::size_t l = 0; l < b.size(); ++l) {
        if (std::abs(dj[l] - b[l]) > 1e-9 * std::max(1.0, std::abs(b[l]))) {
          fail(ErrorCode::kInfeasibleEndpoints, "consecutive states cannot be joined on this graph");
        }
      }
      flux[i] = ordered_flux(op, graph, J.data());
    }
    path.fluxes.push_back(std::move(flux));
  }
  return path;
}

TransportResult transport_cost(const FiniteGraph& graph, const SpeciesPairState& start,
                               const SpeciesPairState& end, std::size_t steps,
                               const Mobility& mobility, const Beta& beta, const Exponents& exponents,
                               const SolverOptions& options) {
  require_sizes(graph, start);
  require_sizes(graph, end);
  require_beta(beta);
  if (steps < 8) fail(ErrorCode::kInvalidArgument, "transport_cost needs at least 8 time steps");
  if (options.smoothing.empty()) fail(ErrorCode::kInvalidArgument, "smoothing schedule is empty");
  check_endpoint_masses(graph, start, end);
  const double thr = mobility.density_threshold();
  check_box(start, thr, "start");
  check_box(end, thr, "end");

  const ContinuityOperator op(graph);
  const PathObjective objective(graph, op, start, steps, mobility, beta, exponents, options.quadrature_nodes);
  const std::size_t E = op.edges();
  const double dt = objective.dt();

  // Constant-in-time minimum-norm flux: a feasible starting path whose
  // states interpolate the endpoints linearly.
  std::vector<double> x(objective.size(), 0.0);
  std::vector<double> dj(graph.num_vertices());
  for (int i = 0; i < 2; ++i) {
    std::vector<double> b(graph.num_vertices());
    for (std::size_t l = 0; l < b.size(); ++l) b[l] = start[i][l] - end[i][l];
    const auto J = op.min_norm(b);
    op.apply(J.data(), dj.data());
    for (std::size_t l = 0; l < b.size(); ++l) {
      if (std::abs(dj[l] - b[l]) > 1e-10) {
        fail(ErrorCode::kInfeasibleEndpoints,
             "species " + std::to_string(i + 1) + " would have to move mass between disconnected components");
      }
    }
    for (std::size_t s = 0; s < steps; ++s) {
      std::copy(J.begin(), J.end(), x.begin() + static_cast<long>((static_cast<std::size_t>(i) * steps + s) * E));
    }
  }

  SolverCertificate cert;
  LevelOutcome last;
  for (double eps : options.smoothing) {
    const std::size_t budget = options.max_iterations > cert.iterations ? options.max_iterations - cert.iterations : 0;
    last = minimize(objective, x, eps, options, budget);
    cert.iterations += last.iterations;
  }
  cert.final_smoothing = options.smoothing.back();

  TransportResult result;
  DiscretePath& path = result.path;
  path.quadrature_nodes = options.quadrature_nodes;
  for (std::size_t k = 0; k <= steps; ++k) path.times.push_back(static_cast<double>(k) * dt);
  path.times.back() = 1.0;
  path.states.assign(steps + 1, SpeciesPairState{});
  path.fluxes.assign(steps, EdgeFluxPair{});
  for (int i = 0; i < 2; ++i) {
    const auto rho = objective.states(x, i);
    for (std::size_t k = 0; k <= steps; ++k) path.states[k][i] = NodeField(rho[k]);
    for (std::size_t s = 0; s < steps; ++s) path.fluxes[s][i] = ordered_flux(op, graph, objective.flux(x, i, s));
  }

  // Certificate from the returned path alone.
  std::vector<double> xr(objective.size());
  for (int i = 0; i < 2; ++i) {
    for (std::size_t s = 0; s < steps; ++s) {
      const auto J = flux_block(op, path.fluxes[s][i]);
      std::copy(J.begin(), J.end(), xr.begin() + static_cast<long>((static_cast<std::size_t>(i) * steps + s) * E));
    }
  }
  std::vector<double> g;
  cert.objective = objective.evaluate(xr, cert.final_smoothing, &g);
  objective.project(g);
  cert.optimality_residual = objective.residual(g);
  cert.constraint_residual = continuity_residual(path, graph, start, end);
  cert.smoothing_gap = path_action(path, graph, mobility, beta, exponents) - cert.objective;
  result.certificate = cert;
  result.value = std::pow(std::max(cert.objective, 0.0), 1.0 / exponents.p());

  if (!(cert.constraint_residual <= options.eps_c) || !(cert.optimality_residual <= options.eps_o)) {
    std::ostringstream os;
    os << "transport solver stopped after " << cert.iterations
       << " iterations with constraint residual " << cert.constraint_residual
       << " and optimality residual " << cert.optimality_residual << " (objective " << cert.objective << ")";
    throw NotConverged(os.str(), std::move(result));
  }
  return result;
}

}  // namespace graphflow
