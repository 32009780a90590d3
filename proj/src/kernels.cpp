#include "graphflow/kernels.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "graphflow/error.hpp"
#include "graphflow/expression.hpp"

namespace graphflow {

Kernel Kernel::zero() {
  return Kernel("zero", [](std::span<const double>, std::span<const double>) { return 0.0; });
}

Kernel Kernel::distance() {
  return Kernel("distance", [](std::span<const double> x, std::span<const double> y) {
    return graphflow::distance(x, y);
  });
}

Kernel Kernel::quadratic() {
  return Kernel("quadratic", [](std::span<const double> x, std::span<const double> y) {
    const double d = graphflow::distance(x, y);
    return d * d;
  });
}

Kernel Kernel::gaussian_well(double sigma) {
  if (!(sigma > 0.0)) fail(ErrorCode::kInvalidArgument, "gaussian_well sigma must be positive");
  return Kernel("gaussian_well", [sigma](std::span<const double> x, std::span<const double> y) {
    const double d = graphflow::distance(x, y);
    return -std::exp(-d * d / (sigma * sigma));
  });
}

Kernel Kernel::morse_like(double attraction, double attraction_length, double repulsion,
                          double repulsion_length) {
  if (!(attraction_length > 0.0) || !(repulsion_length > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "morse_like length scales must be positive");
  }
  return Kernel("morse_like", [=](std::span<const double> x, std::span<const double> y) {
    const double d = graphflow::distance(x, y);
    return attraction * std::exp(-d / attraction_length) - repulsion * std::exp(-d / repulsion_length);
  });
}

Kernel Kernel::from_expression(const std::string& text) {
  auto expr = std::make_shared<Expression>(Expression::parse(text, {"d"}));
  return Kernel("expression:" + text, [expr](std::span<const double> x, std::span<const double> y) {
    const double d[1] = {graphflow::distance(x, y)};
    return expr->evaluate(d);
  });
}

Kernel Kernel::scaled(double factor) const {
  PairFunction inner = fn_;
  return Kernel(name_, [inner, factor](std::span<const double> x, std::span<const double> y) {
    return factor * inner(x, y);
  });
}

namespace {

std::vector<double> tabulate(const Kernel& kernel, const FiniteGraph& graph) {
  const std::size_t n = graph.num_vertices();
  std::vector<double> m(n * n);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t h = 0; h < n; ++h) {
      const double v = kernel(graph.point(l), graph.point(h));
      if (!std::isfinite(v)) {
        fail(ErrorCode::kSemanticError, "kernel " + kernel.name() + " is not finite on the vertices");
      }
      m[l * n + h] = v;
    }
  }
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t h = l + 1; h < n; ++h) {
      const double a = m[l * n + h];
      const double b = m[h * n + l];
      if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
        fail(ErrorCode::kSemanticError, "kernel " + kernel.name() + " is not symmetric");
      }
    }
  }
  return m;
}

double fold_ratio(const std::vector<double>& k12, const std::vector<double>& k21) {
  double ratio = 0.0;
  bool found = false;
  for (std::size_t t = 0; t < k12.size(); ++t) {
    if (std::abs(k21[t]) > 1e-300) {
      ratio = k12[t] / k21[t];
      found = true;
      break;
    }
  }
  if (!found) {
    for (double v : k12) {
      if (v != 0.0) fail(ErrorCode::kSemanticError, "K12 is nonzero where K21 vanishes identically");
    }
    return 1.0;
  }
  if (!(ratio > 0.0)) {
    fail(ErrorCode::kSemanticError, "K12 must be a positive multiple of K21");
  }
  for (std::size_t t = 0; t < k12.size(); ++t) {
    if (std::abs(k12[t] - ratio * k21[t]) > 1e-10 * std::max(1.0, std::abs(k12[t]))) {
      std::ostringstream os;
      os << "K12 is not a constant positive multiple of K21 (ratio " << ratio << " fails at entry " << t
         << ")";
      fail(ErrorCode::kSemanticError, os.str());
    }
  }
  return ratio;
}

}  // namespace

KernelSet::KernelSet(const FiniteGraph& graph, const Kernel& k11, const Kernel& k12,
                     const Kernel& k21, const Kernel& k22, Beta beta, double growth_exponent)
    : n_(graph.num_vertices()), raw_beta_(beta) {
  if (!(beta[0] > 0.0) || !(beta[1] > 0.0)) {
    fail(ErrorCode::kSemanticError, "beta must be positive componentwise");
  }
  auto m11 = tabulate(k11, graph);
  auto m12 = tabulate(k12, graph);
  auto m21 = tabulate(k21, graph);
  auto m22 = tabulate(k22, graph);
  cross_ratio_ = fold_ratio(m12, m21);
  for (double& v : m11) v /= cross_ratio_;
  beta_ = {beta[0] * cross_ratio_, beta[1]};
  matrices_ = {std::move(m11), m21, m21, std::move(m22)};
  for (const auto& m : matrices_) {
    for (double v : m) max_abs_ = std::max(max_abs_, std::abs(v));
  }

  // Growth constant: difference quotients over pairs of vertex pairs.
  const std::size_t n = n_;
  const std::size_t combos = n * n * n * n;
  constexpr std::size_t kMaxSamples = 50'000;
  std::mt19937_64 rng(0x6b65726eULL);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  auto quotient = [&](std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    const double dx = graphflow::distance(graph.point(a), graph.point(c));
    const double dy = graphflow::distance(graph.point(b), graph.point(d));
    const double delta = std::sqrt(dx * dx + dy * dy);
    if (delta == 0.0) return;
    const double denom = std::max(delta, std::pow(delta, growth_exponent));
    for (const auto& m : matrices_) {
      growth_estimate_ = std::max(growth_estimate_, std::abs(m[a * n + b] - m[c * n + d]) / denom);
    }
  };
  if (combos <= kMaxSamples) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c)
          for (std::size_t d = 0; d < n; ++d) quotient(a, b, c, d);
  } else {
    for (std::size_t t = 0; t < kMaxSamples; ++t) quotient(pick(rng), pick(rng), pick(rng), pick(rng));
  }
}

KernelSet KernelSet::zero(const FiniteGraph& graph, Beta beta) {
  return KernelSet(graph, Kernel::zero(), Kernel::zero(), Kernel::zero(), Kernel::zero(), beta);
}

NodeField convolve_potential(const Kernel& kernel, const NodeField& rho, const FiniteGraph& graph) {
  if (rho.size() != graph.num_vertices()) fail(ErrorCode::kSizeMismatch, "density size mismatch");
  NodeField out(graph.num_vertices());
  for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
    double s = 0.0;
    for (std::size_t h = 0; h < graph.num_vertices(); ++h) {
      s += kernel(graph.point(l), graph.point(h)) * rho[h] * graph.weight(h);
    }
    out[l] = s;
  }
  return out;
}

NodeField variational_derivative(const SpeciesPairState& state, const KernelSet& kernels,
                                 const FiniteGraph& graph, int species) {
  const std::size_t n = graph.num_vertices();
  if (kernels.size() != n || state[0].size() != n || state[1].size() != n) {
    fail(ErrorCode::kSizeMismatch, "state, kernels and graph disagree on vertex count");
  }
  NodeField out(n);
  for (std::size_t l = 0; l < n; ++l) {
    double s = 0.0;
    for (int k = 0; k < 2; ++k) {
      const NodeField& rho = state[k];
      for (std::size_t h = 0; h < n; ++h) s += kernels(species, k, l, h) * rho[h] * graph.weight(h);
    }
    out[l] = s;
  }
  return out;
}

double energy(const SpeciesPairState& state, const KernelSet& kernels, const FiniteGraph& graph) {
  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    const NodeField potential = variational_derivative(state, kernels, graph, i);
    for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
      total += potential[l] * state[i][l] * graph.weight(l);
    }
  }
  return 0.5 * total;
}

EdgeField edge_velocity(const SpeciesPairState& state, const KernelSet& kernels,
                        const FiniteGraph& graph, int species) {
  EdgeField v = nonlocal_gradient(variational_derivative(state, kernels, graph, species), graph);
  v *= -1.0;
  return v;
}

double energy_continuity_constant(const KernelSet& kernels, double delta_l1) {
  return kernels.max_abs() * (2.0 + 0.5 * delta_l1);
}

}  // namespace graphflow
