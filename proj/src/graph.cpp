#include "graphflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "graphflow/error.hpp"

namespace graphflow {

Exponents Exponents::from_p(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    std::ostringstream os;
    os << "exponent p must lie in (1, inf), got " << p;
    fail(ErrorCode::kInvalidArgument, os.str());
  }
  return Exponents(p, p / (p - 1.0));
}

double distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace eta_presets {

PairFunction constant(double value) {
  return [value](std::span<const double>, std::span<const double>) { return value; };
}

PairFunction gaussian(double sigma) {
  if (!(sigma > 0.0)) fail(ErrorCode::kInvalidArgument, "gaussian sigma must be positive");
  return [sigma](std::span<const double> x, std::span<const double> y) {
    const double d = distance(x, y);
    return std::exp(-d * d / (sigma * sigma));
  };
}

PairFunction cutoff(double radius, double value) {
  if (!(radius > 0.0)) fail(ErrorCode::kInvalidArgument, "cutoff radius must be positive");
  return [radius, value](std::span<const double> x, std::span<const double> y) {
    return distance(x, y) < radius ? value : 0.0;
  };
}

}  // namespace eta_presets

FiniteGraph::FiniteGraph(BaseMeasure base, std::vector<Edge> edges)
    : base_(std::move(base)), edges_(std::move(edges)) {
  const std::size_t n = base_.size();
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });
  offsets_.assign(n + 1, 0);
  for (const Edge& e : edges_) {
    if (e.from >= n || e.to >= n || e.from == e.to) {
      fail(ErrorCode::kInvalidArgument, "edge endpoint out of range or self-loop");
    }
    ++offsets_[e.from + 1];
  }
  for (std::size_t l = 0; l < n; ++l) offsets_[l + 1] += offsets_[l];

  lengths_.resize(edges_.size());
  for (std::size_t id = 0; id < edges_.size(); ++id) {
    Edge& e = edges_[id];
    const std::size_t rev = find_edge(e.to, e.from);
    if (rev == edges_.size()) {
      fail(ErrorCode::kNonSymmetricWeights, "edge list is missing a reverse orientation");
    }
    e.reverse = rev;
    lengths_[id] = distance(base_.points[e.from], base_.points[e.to]);
  }
}

std::span<const Edge> FiniteGraph::edges_from(std::size_t l) const {
  return std::span<const Edge>(edges_).subspan(offsets_[l], offsets_[l + 1] - offsets_[l]);
}

std::size_t FiniteGraph::find_edge(std::size_t l, std::size_t k) const {
  auto row = edges_from(l);
  auto it = std::lower_bound(row.begin(), row.end(), k,
                             [](const Edge& e, std::size_t key) { return e.to < key; });
  if (it == row.end() || it->to != k) return edges_.size();
  return offsets_[l] + static_cast<std::size_t>(it - row.begin());
}

double FiniteGraph::eta(std::size_t l, std::size_t k) const {
  const std::size_t e = find_edge(l, k);
  return e == edges_.size() ? 0.0 : edges_[e].eta;
}

double FiniteGraph::min_weight() const {
  return *std::min_element(base_.weights.begin(), base_.weights.end());
}

double FiniteGraph::total_weight() const {
  double s = 0.0;
  for (double w : base_.weights) s += w;
  return s;
}

FiniteGraph build_graph(std::vector<Point> points, std::vector<double> weights,
                        const EtaSpec& eta) {
  const std::size_t n = points.size();
  if (weights.size() != n) {
    fail(ErrorCode::kSizeMismatch, "points and weights have different lengths");
  }
  if (n == 0) fail(ErrorCode::kSizeMismatch, "graph needs at least one vertex");
  const std::size_t dim = points.front().size();
  if (dim == 0) fail(ErrorCode::kSizeMismatch, "points must have positive dimension");
  for (std::size_t l = 0; l < n; ++l) {
    if (points[l].size() != dim) {
      fail(ErrorCode::kSizeMismatch, "point " + std::to_string(l) + " has wrong dimension");
    }
    for (double c : points[l]) {
      if (!std::isfinite(c)) fail(ErrorCode::kInvalidArgument, "non-finite coordinate");
    }
    if (!(weights[l] > 0.0) || !std::isfinite(weights[l])) {
      fail(ErrorCode::kNonPositiveWeight,
           "vertex weight " + std::to_string(l) + " must be positive and finite");
    }
  }
  {
    std::set<Point> seen;
    for (std::size_t l = 0; l < n; ++l) {
      if (!seen.insert(points[l]).second) {
        fail(ErrorCode::kDuplicatePoint, "point " + std::to_string(l) + " repeats an earlier point");
      }
    }
  }

  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  if (const auto* matrix = std::get_if<DenseMatrix>(&eta)) {
    if (matrix->size() != n) fail(ErrorCode::kSizeMismatch, "eta matrix has wrong row count");
    for (std::size_t l = 0; l < n; ++l) {
      if ((*matrix)[l].size() != n) fail(ErrorCode::kSizeMismatch, "eta matrix is not square");
    }
    for (std::size_t l = 0; l < n; ++l) {
      for (std::size_t k = 0; k < n; ++k) {
        const double a = (*matrix)[l][k];
        const double b = (*matrix)[k][l];
        if (!std::isfinite(a)) fail(ErrorCode::kInvalidArgument, "non-finite eta entry");
        if (std::abs(a - b) > 1e-12) {
          std::ostringstream os;
          os << "eta(" << l << "," << k << ")=" << a << " but eta(" << k << "," << l << ")=" << b;
          fail(ErrorCode::kNonSymmetricWeights, os.str());
        }
        w[l][k] = 0.5 * (a + b);
      }
    }
  } else {
    const auto& fn = std::get<PairFunction>(eta);
    for (std::size_t l = 0; l < n; ++l) {
      for (std::size_t k = l + 1; k < n; ++k) {
        const double v = 0.5 * (fn(points[l], points[k]) + fn(points[k], points[l]));
        if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "eta function returned non-finite value");
        w[l][k] = w[k][l] = v;
      }
    }
  }

  std::vector<Edge> edges;
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t k = 0; k < n; ++k) {
      if (l == k) continue;
      if (w[l][k] < 0.0) {
        fail(ErrorCode::kNonPositiveWeight, "edge weights must be nonnegative");
      }
      if (w[l][k] > 0.0) {
        edges.push_back(Edge{static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(k), w[l][k], 0});
      }
    }
  }

  BaseMeasure base{std::move(points), std::move(weights), dim};
  return FiniteGraph(std::move(base), std::move(edges));
}

namespace {

double moment_weight(double d, const Exponents& ex) {
  return std::max(std::pow(d, ex.q()), std::pow(d, ex.p() * ex.q()));
}

}  // namespace

double bc_profile(const FiniteGraph& graph, const Exponents& exponents, double epsilon) {
  double best = 0.0;
  for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
    double s = 0.0;
    for (std::size_t e = graph.offset(l); e < graph.offset(l + 1); ++e) {
      const double d = graph.edge_length(e);
      if (d > 0.0 && d < epsilon) {
        s += std::pow(d, exponents.q()) * graph.edge(e).eta * graph.weight(graph.edge(e).to);
      }
    }
    best = std::max(best, s);
  }
  return best;
}

AssumptionReport check_assumptions(const FiniteGraph& graph, const Exponents& exponents) {
  AssumptionReport report;
  report.num_edges = graph.num_edges();
  for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
    double norm = 0.0;
    for (double c : graph.point(l)) norm += c * c;
    report.c_mu += (1.0 + std::pow(std::sqrt(norm), exponents.p())) * graph.weight(l);
  }
  for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
    double row = 0.0;
    for (std::size_t e = graph.offset(l); e < graph.offset(l + 1); ++e) {
      const Edge& edge = graph.edge(e);
      const double mw = moment_weight(graph.edge_length(e), exponents) * edge.eta;
      row += mw * graph.weight(edge.to);
      report.c_eta_prime = std::max(report.c_eta_prime, mw);
    }
    report.c_eta = std::max(report.c_eta, row);
  }

  std::vector<double> lengths;
  for (std::size_t e = 0; e < graph.num_edges(); ++e) lengths.push_back(graph.edge_length(e));
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  for (double d : lengths) {
    const double eps = std::nextafter(d, std::numeric_limits<double>::infinity());
    report.bc_profile.push_back({eps, bc_profile(graph, exponents, eps)});
  }
  return report;
}

EdgeField nonlocal_gradient(const NodeField& phi, const FiniteGraph& graph) {
  if (phi.size() != graph.num_vertices()) {
    fail(ErrorCode::kSizeMismatch, "node field does not match vertex count");
  }
  EdgeField out(graph.num_edges());
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const Edge& edge = graph.edge(e);
    out[e] = phi[edge.to] - phi[edge.from];
  }
  return out;
}

NodeField nonlocal_divergence(const EdgeField& flux, const FiniteGraph& graph) {
  if (flux.size() != graph.num_edges()) {
    fail(ErrorCode::kSizeMismatch, "edge field does not match edge count");
  }
  NodeField out(graph.num_vertices());
  for (std::size_t l = 0; l < graph.num_vertices(); ++l) {
    double s = 0.0;
    for (std::size_t e = graph.offset(l); e < graph.offset(l + 1); ++e) {
      const Edge& edge = graph.edge(e);
      s += edge.eta * graph.weight(edge.to) * (flux[e] - flux[edge.reverse]);
    }
    out[l] = 0.5 * s;
  }
  return out;
}

EdgeField transpose(const EdgeField& flux, const FiniteGraph& graph) {
  if (flux.size() != graph.num_edges()) {
    fail(ErrorCode::kSizeMismatch, "edge field does not match edge count");
  }
  EdgeField out(graph.num_edges());
  for (std::size_t e = 0; e < graph.num_edges(); ++e) out[e] = flux[graph.edge(e).reverse];
  return out;
}

EdgeField antisymmetrize_flux(const EdgeField& flux, const FiniteGraph& graph) {
  EdgeField out = transpose(flux, graph);
  for (std::size_t e = 0; e < graph.num_edges(); ++e) out[e] = 0.5 * (flux[e] - out[e]);
  return out;
}

double divergence_pairing(const NodeField& phi, const EdgeField& flux, const FiniteGraph& graph) {
  double s = 0.0;
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const Edge& edge = graph.edge(e);
    s += (phi[edge.to] - phi[edge.from]) * edge.eta * flux[e] * graph.weight(edge.from) *
         graph.weight(edge.to);
  }
  return -0.5 * s;
}

bool is_antisymmetric(const EdgeField& flux, const FiniteGraph& graph, double tol) {
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const double a = flux[e];
    const double b = flux[graph.edge(e).reverse];
    if (std::abs(a + b) > tol * std::max({1.0, std::abs(a), std::abs(b)})) return false;
  }
  return true;
}

}  // namespace graphflow
