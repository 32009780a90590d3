#include "graphflow/state.hpp"

#include <cmath>
#include <sstream>

#include "graphflow/error.hpp"

namespace graphflow {

double mass(const NodeField& rho, const FiniteGraph& graph) {
  double s = 0.0;
  for (std::size_t l = 0; l < rho.size(); ++l) s += rho[l] * graph.weight(l);
  return s;
}

void validate_state(const SpeciesPairState& state, const FiniteGraph& graph, double threshold,
                    double mass_tol) {
  for (int i = 0; i < 2; ++i) {
    const NodeField& rho = state[i];
    if (rho.size() != graph.num_vertices()) {
      fail(ErrorCode::kSizeMismatch, "species " + std::to_string(i + 1) + " has wrong length");
    }
    for (std::size_t l = 0; l < rho.size(); ++l) {
      if (!std::isfinite(rho[l]) || rho[l] < 0.0 || rho[l] > threshold) {
        std::ostringstream os;
        os << "species " << i + 1 << " density " << rho[l] << " at vertex " << l
           << " outside [0, " << threshold << "]";
        fail(ErrorCode::kThresholdExceeded, os.str());
      }
    }
    const double m = mass(rho, graph);
    if (std::abs(m - 1.0) > mass_tol) {
      std::ostringstream os;
      os << "species " << i + 1 << " has mass " << m << ", expected 1";
      fail(ErrorCode::kMassMismatch, os.str());
    }
  }
}

}  // namespace graphflow
