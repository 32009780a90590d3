#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "graphflow/fields.hpp"

namespace graphflow {

// Exponent pair with 1/p + 1/q = 1. q is always derived from p.
class Exponents {
 public:
  static Exponents from_p(double p);

  double p() const noexcept { return p_; }
  double q() const noexcept { return q_; }

 private:
  Exponents(double p, double q) : p_(p), q_(q) {}
  double p_;
  double q_;
};

using Point = std::vector<double>;

double distance(std::span<const double> x, std::span<const double> y);

struct BaseMeasure {
  std::vector<Point> points;
  std::vector<double> weights;
  std::size_t dimension = 0;

  std::size_t size() const noexcept { return weights.size(); }
};

using DenseMatrix = std::vector<std::vector<double>>;
using PairFunction =
    std::function<double(std::span<const double>, std::span<const double>)>;

// Either an explicit matrix (checked for symmetry) or a function of two
// points (symmetrized).
using EtaSpec = std::variant<DenseMatrix, PairFunction>;

namespace eta_presets {
PairFunction constant(double value = 1.0);
// exp(-|x-y|^2 / sigma^2)
PairFunction gaussian(double sigma);
// value on 0 < |x-y| < radius, zero beyond
PairFunction cutoff(double radius, double value = 1.0);
}  // namespace eta_presets

struct Edge {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  double eta = 0.0;
  std::size_t reverse = 0;  // id of (to, from)
};

// The discrete (mu, eta, G) triple. Edges are ordered pairs stored in CSR
// order (sorted by source, then target); both orientations are present.
class FiniteGraph {
 public:
  FiniteGraph(BaseMeasure base, std::vector<Edge> edges);

  std::size_t num_vertices() const noexcept { return base_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t dimension() const noexcept { return base_.dimension; }

  const BaseMeasure& base() const noexcept { return base_; }
  double weight(std::size_t l) const { return base_.weights[l]; }
  std::span<const double> point(std::size_t l) const { return base_.points[l]; }

  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  // Edge ids leaving vertex l are [offset(l), offset(l+1)).
  std::size_t offset(std::size_t l) const { return offsets_[l]; }
  std::span<const Edge> edges_from(std::size_t l) const;

  // Returns num_edges() when (l, k) is not an edge.
  std::size_t find_edge(std::size_t l, std::size_t k) const;
  double eta(std::size_t l, std::size_t k) const;
  double edge_length(std::size_t e) const { return lengths_[e]; }

  double min_weight() const;
  double total_weight() const;

 private:
  BaseMeasure base_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<double> lengths_;
};

FiniteGraph build_graph(std::vector<Point> points, std::vector<double> weights,
                        const EtaSpec& eta);

struct BcSample {
  double epsilon;
  double value;
};

struct AssumptionReport {
  double c_mu = 0.0;         // sum (1 + |x|^p) mu_l
  double c_eta = 0.0;        // max_l sum_k (d^q v d^pq) eta mu_k
  double c_eta_prime = 0.0;  // max over edges of (d^q v d^pq) eta
  std::size_t num_edges = 0;
  // Blow-up control profile evaluated just above every distinct edge length.
  std::vector<BcSample> bc_profile;
};

AssumptionReport check_assumptions(const FiniteGraph& graph, const Exponents& exponents);
// max_l sum_{0 < |x_l - x_k| < eps} |x_l - x_k|^q eta(l,k) mu_k
double bc_profile(const FiniteGraph& graph, const Exponents& exponents, double epsilon);

EdgeField nonlocal_gradient(const NodeField& phi, const FiniteGraph& graph);
NodeField nonlocal_divergence(const EdgeField& flux, const FiniteGraph& graph);
EdgeField antisymmetrize_flux(const EdgeField& flux, const FiniteGraph& graph);
EdgeField transpose(const EdgeField& flux, const FiniteGraph& graph);

// -(1/2) sum_{(l,k) in G} (phi(k) - phi(l)) eta(l,k) j(l,k) mu_l mu_k
double divergence_pairing(const NodeField& phi, const EdgeField& flux,
                          const FiniteGraph& graph);

bool is_antisymmetric(const EdgeField& flux, const FiniteGraph& graph, double tol = 0.0);

}  // namespace graphflow
