#pragma once

#include <array>

#include "graphflow/graph.hpp"

namespace graphflow {

// Densities of the two species with respect to mu; masses are rho(l) mu_l.
struct SpeciesPairState {
  std::array<NodeField, 2> rho;

  const NodeField& operator[](int i) const { return rho[static_cast<std::size_t>(i)]; }
  NodeField& operator[](int i) { return rho[static_cast<std::size_t>(i)]; }
};

struct EdgeFluxPair {
  std::array<EdgeField, 2> j;

  const EdgeField& operator[](int i) const { return j[static_cast<std::size_t>(i)]; }
  EdgeField& operator[](int i) { return j[static_cast<std::size_t>(i)]; }
};

double mass(const NodeField& rho, const FiniteGraph& graph);

// Nonnegative, unit mass per species, within [0, threshold]. Throws
// SizeMismatch / MassMismatch / ThresholdExceeded.
void validate_state(const SpeciesPairState& state, const FiniteGraph& graph, double threshold,
                    double mass_tol = 1e-10);

}  // namespace graphflow
