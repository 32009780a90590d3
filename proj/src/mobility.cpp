#include "graphflow/mobility.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "graphflow/error.hpp"
#include "graphflow/expression.hpp"

namespace graphflow {

Mobility::Mobility(std::string name, Function eval, double r_max, double s_max, Gradient gradient,
                   Function recession)
    : name_(std::move(name)),
      eval_(std::move(eval)),
      r_max_(r_max),
      s_max_(s_max),
      gradient_(std::move(gradient)),
      recession_(std::move(recession)) {
  if (!eval_) fail(ErrorCode::kInvalidArgument, "mobility needs an evaluation function");
  if (!(r_max_ > 0.0) || !(s_max_ > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "mobility thresholds must be positive");
  }
}

Mobility Mobility::linear() {
  return Mobility(
      "linear", [](double r, double) { return r; }, kInfinity, kInfinity,
      [](double, double) { return std::array<double, 2>{1.0, 0.0}; },
      [](double r, double) { return r; });
}

Mobility Mobility::volume_filling(double s_max) {
  if (!(s_max > 0.0) || !std::isfinite(s_max)) {
    fail(ErrorCode::kInvalidArgument, "volume_filling needs a finite positive S");
  }
  return Mobility(
      "volume_filling", [s_max](double r, double s) { return r * (s_max - s) / s_max; }, kInfinity,
      s_max, [s_max](double r, double s) {
        return std::array<double, 2>{(s_max - s) / s_max, -r / s_max};
      });
}

Mobility Mobility::saturating() {
  return Mobility(
      "saturating", [](double r, double) { return r / (1.0 + r); }, kInfinity, kInfinity,
      [](double r, double) { return std::array<double, 2>{1.0 / ((1.0 + r) * (1.0 + r)), 0.0}; },
      [](double, double) { return 0.0; });
}

Mobility Mobility::geometric() {
  return Mobility(
      "geometric", [](double r, double s) { return std::sqrt(r * s); }, kInfinity, kInfinity,
      [](double r, double s) {
        const double g = std::sqrt(r * s);
        if (g == 0.0) return std::array<double, 2>{0.0, 0.0};
        return std::array<double, 2>{0.5 * s / g, 0.5 * r / g};
      },
      [](double r, double s) { return std::sqrt(r * s); });
}

Mobility Mobility::from_expression(const std::string& text, double r_max, double s_max) {
  auto expr = std::make_shared<Expression>(Expression::parse(text, {"r", "s"}));
  return Mobility(
      "expression:" + text,
      [expr](double r, double s) {
        const double v[2] = {r, s};
        return expr->evaluate(v);
      },
      r_max, s_max, [expr](double r, double s) {
        const auto g = expr->evaluate_with_gradient(r, s);
        return std::array<double, 2>{g[1], g[2]};
      });
}

std::array<double, 2> Mobility::gradient(double r, double s) const {
  if (gradient_) return gradient_(r, s);
  auto partial = [&](double x, double upper, auto&& f) {
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    const bool back_ok = x - h >= 0.0;
    const bool fwd_ok = x + h <= upper;
    if (back_ok && fwd_ok) return (f(x + h) - f(x - h)) / (2.0 * h);
    if (fwd_ok) return (f(x + h) - f(x)) / h;
    return (f(x) - f(x - h)) / h;
  };
  const double dr = partial(r, r_max_, [&](double x) { return eval_(x, s); });
  const double ds = partial(s, s_max_, [&](double x) { return eval_(r, x); });
  return {dr, ds};
}

double alpha_density(double j, double r, double s, const Mobility& mobility,
                     const Exponents& exponents) {
  if (!mobility.in_box(r, s)) return kInfinity;
  const double jp = j > 0.0 ? j : 0.0;
  if (jp == 0.0) return 0.0;
  const double m = mobility(r, s);
  if (m <= 0.0) return kInfinity;
  return std::pow(jp, exponents.p()) / std::pow(m, exponents.p() - 1.0);
}

double alpha_tilde_density(double v, double r, double s, const Mobility& mobility,
                           const Exponents& exponents) {
  if (!mobility.in_box(r, s)) return kInfinity;
  const double vp = v > 0.0 ? v : 0.0;
  if (vp == 0.0) return 0.0;
  return mobility(r, s) * std::pow(vp, exponents.q());
}

Recession::Recession(const Mobility& mobility)
    : base_([mobility](double r, double s) { return mobility(r, s); }),
      closed_(mobility.closed_form_recession()) {}

double Recession::operator()(double r, double s) const {
  if (closed_) return closed_(r, s);
  auto scaled = [&](double lambda) { return base_(lambda * r, lambda * s) / lambda; };
  const double f10 = scaled(std::ldexp(1.0, 10));
  const double f12 = scaled(std::ldexp(1.0, 12));
  const double f14 = scaled(std::ldexp(1.0, 14));
  // Error model f(lambda) = L + c / lambda; lambda ratio 4 per level.
  const double coarse = (4.0 * f12 - f10) / 3.0;
  const double fine = (4.0 * f14 - f12) / 3.0;
  const double scale = std::max({1.0, std::abs(coarse), std::abs(fine)});
  if (!std::isfinite(fine) || std::abs(fine - coarse) > 1e-6 * scale) {
    std::ostringstream os;
    os << "recession at (" << r << "," << s << ") does not settle: " << coarse << " vs " << fine;
    fail(ErrorCode::kNonConvergent, os.str());
  }
  return fine;
}

Recession recession(const Mobility& mobility) {
  if (std::isfinite(mobility.r_max()) || std::isfinite(mobility.s_max())) {
    fail(ErrorCode::kNotApplicable, "recession needs R = S = inf for mobility " + mobility.name());
  }
  return Recession(mobility);
}

namespace {

std::vector<double> sample_axis(double threshold, double box, int n) {
  std::vector<double> axis(static_cast<std::size_t>(n));
  if (std::isfinite(threshold)) {
    for (int i = 0; i < n; ++i) axis[static_cast<std::size_t>(i)] = threshold * i / n;
  } else {
    for (int i = 0; i < n; ++i) axis[static_cast<std::size_t>(i)] = box * i / (n - 1);
  }
  return axis;
}

std::string at(double r, double s) {
  std::ostringstream os;
  os << "(" << r << ", " << s << ")";
  return os.str();
}

}  // namespace

ValidationReport validate_mobility(const Mobility& mobility, int grid_size, double box) {
  if (grid_size < 8) fail(ErrorCode::kInvalidArgument, "grid_size must be at least 8");
  ValidationReport report;
  const auto rs = sample_axis(mobility.r_max(), box, grid_size);
  const auto ss = sample_axis(mobility.s_max(), box, grid_size);
  report.box_r = std::isfinite(mobility.r_max()) ? mobility.r_max() : box;
  report.box_s = std::isfinite(mobility.s_max()) ? mobility.s_max() : box;

  struct Sample {
    double r, s, m;
  };
  std::vector<Sample> grid;
  for (double r : rs) {
    for (double s : ss) grid.push_back({r, s, mobility(r, s)});
  }
  report.samples = grid.size();

  for (const Sample& g : grid) {
    if (g.r == 0.0 && std::abs(g.m) > 1e-12) {
      fail(ErrorCode::kNotUpwindAdmissible,
           "m" + at(g.r, g.s) + " = " + std::to_string(g.m) + " but must vanish when r = 0");
    }
  }
  for (const Sample& g : grid) {
    if (!std::isfinite(g.m) || g.m < 0.0 || (g.r > 0.0 && g.s > 0.0 && !(g.m > 0.0))) {
      fail(ErrorCode::kNotPositive, "m" + at(g.r, g.s) + " = " + std::to_string(g.m));
    }
  }

  const std::size_t n = grid.size();
  const std::size_t all_pairs = n * (n - 1) / 2;
  constexpr std::size_t kMaxPairs = 2'000'000;
  auto check_pair = [&](const Sample& a, const Sample& b) {
    const double mid = mobility(0.5 * (a.r + b.r), 0.5 * (a.s + b.s));
    if (mid < 0.5 * (a.m + b.m) - 1e-10) {
      std::ostringstream os;
      os << "midpoint of " << at(a.r, a.s) << " and " << at(b.r, b.s) << " gives " << mid
         << " < average " << 0.5 * (a.m + b.m);
      fail(ErrorCode::kNotConcave, os.str());
    }
  };
  if (all_pairs <= kMaxPairs) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = i + 1; k < n; ++k) check_pair(grid[i], grid[k]);
    }
    report.concavity_pairs = all_pairs;
  } else {
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t t = 0; t < kMaxPairs; ++t) check_pair(grid[pick(rng)], grid[pick(rng)]);
    report.concavity_pairs = kMaxPairs;
  }

  MobilityClass& cls = report.classification;
  cls.bounded_thresholds =
      std::isfinite(mobility.r_max()) || std::isfinite(mobility.s_max());
  cls.vanishing_iff_source_zero = true;
  for (const Sample& g : grid) {
    if (g.r > 0.0 && !(g.m > 0.0)) cls.vanishing_iff_source_zero = false;
  }
  if (!cls.bounded_thresholds) {
    cls.uniformly_sublinear = true;
    try {
      const Recession rec = recession(mobility);
      for (const Sample& g : grid) {
        if (std::abs(rec(g.r, g.s)) > 1e-6 * (1.0 + g.r + g.s)) {
          cls.uniformly_sublinear = false;
          break;
        }
      }
    } catch (const Error&) {
      cls.uniformly_sublinear = false;
    }
  }
  return report;
}

}  // namespace graphflow
