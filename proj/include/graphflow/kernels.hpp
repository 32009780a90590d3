#pragma once

#include <array>
#include <string>
#include <vector>

#include "graphflow/graph.hpp"
#include "graphflow/state.hpp"

namespace graphflow {

// Symmetric interaction kernel K(x, y).
class Kernel {
 public:
  Kernel(std::string name, PairFunction fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  static Kernel zero();
  static Kernel distance();
  static Kernel quadratic();
  // -exp(-|x-y|^2 / sigma^2)
  static Kernel gaussian_well(double sigma);
  // a exp(-|x-y| / la) - r exp(-|x-y| / lr)
  static Kernel morse_like(double attraction, double attraction_length, double repulsion,
                           double repulsion_length);
  // Expression in the variable d = |x - y|.
  static Kernel from_expression(const std::string& text);

  double operator()(std::span<const double> x, std::span<const double> y) const {
    return fn_(x, y);
  }
  Kernel scaled(double factor) const;

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  PairFunction fn_;
};

using Beta = std::array<double, 2>;

// Kernel matrices restricted to the vertices of one graph, after folding the
// cross-kernel ratio into beta so that K12 == K21.
class KernelSet {
 public:
  // K12 must equal c K21 on all vertex pairs for some c > 0 (or both vanish);
  // c is folded into beta[0] and K11 is divided by c.
  KernelSet(const FiniteGraph& graph, const Kernel& k11, const Kernel& k12, const Kernel& k21,
            const Kernel& k22, Beta beta, double growth_exponent = 2.0);

  static KernelSet zero(const FiniteGraph& graph, Beta beta = {1.0, 1.0});

  std::size_t size() const noexcept { return n_; }
  // Folded kernel value between vertices l and h for species pair (i, k).
  double operator()(int i, int k, std::size_t l, std::size_t h) const {
    return matrices_[static_cast<std::size_t>(2 * i + k)][l * n_ + h];
  }
  const Beta& beta() const noexcept { return beta_; }
  const Beta& raw_beta() const noexcept { return raw_beta_; }
  double cross_ratio() const noexcept { return cross_ratio_; }
  // Sampled lower estimate of the growth constant L_K.
  double growth_constant_estimate() const noexcept { return growth_estimate_; }
  double max_abs() const noexcept { return max_abs_; }
  bool all_zero() const noexcept { return max_abs_ == 0.0; }

 private:
  KernelSet() = default;

  std::size_t n_ = 0;
  std::array<std::vector<double>, 4> matrices_;
  Beta beta_{1.0, 1.0};
  Beta raw_beta_{1.0, 1.0};
  double cross_ratio_ = 1.0;
  double growth_estimate_ = 0.0;
  double max_abs_ = 0.0;
};

// sum_h K(x_l, x_h) rho(h) mu_h for a raw kernel
NodeField convolve_potential(const Kernel& kernel, const NodeField& rho, const FiniteGraph& graph);

// delta E / delta rho^(i) = K^(i1) * rho1 + K^(i2) * rho2 (folded kernels)
NodeField variational_derivative(const SpeciesPairState& state, const KernelSet& kernels,
                                 const FiniteGraph& graph, int species);

double energy(const SpeciesPairState& state, const KernelSet& kernels, const FiniteGraph& graph);

// -grad(delta E / delta rho^(i))
EdgeField edge_velocity(const SpeciesPairState& state, const KernelSet& kernels,
                        const FiniteGraph& graph, int species);

// C such that |E(rho + d) - E(rho)| <= C ||d||_1 for unit-mass species and
// perturbations of total size delta_l1.
double energy_continuity_constant(const KernelSet& kernels, double delta_l1);

}  // namespace graphflow
