#pragma once

#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "graphflow/graph.hpp"

namespace graphflow {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Concave mobility m(r, s) on [0,R) x [0,S), extended by continuity to the
// closed box. r is the density at the source vertex of a flow, s the density
// at the target.
class Mobility {
 public:
  using Function = std::function<double(double, double)>;
  using Gradient = std::function<std::array<double, 2>(double, double)>;

  Mobility(std::string name, Function eval, double r_max = kInfinity, double s_max = kInfinity,
           Gradient gradient = {}, Function recession = {});

  static Mobility linear();
  // r (S - s) / S
  static Mobility volume_filling(double s_max);
  // r / (1 + r)
  static Mobility saturating();
  // sqrt(r s)
  static Mobility geometric();
  static Mobility from_expression(const std::string& text, double r_max = kInfinity,
                                  double s_max = kInfinity);

  double operator()(double r, double s) const { return eval_(r, s); }
  // Partial derivatives in (r, s); central differences when no closed form
  // was supplied.
  std::array<double, 2> gradient(double r, double s) const;

  double r_max() const noexcept { return r_max_; }
  double s_max() const noexcept { return s_max_; }
  // Densities must stay in [0, threshold] since each vertex plays both roles.
  double density_threshold() const noexcept { return std::min(r_max_, s_max_); }
  bool in_box(double r, double s) const noexcept {
    return r >= 0.0 && s >= 0.0 && r <= r_max_ && s <= s_max_;
  }

  const std::string& name() const noexcept { return name_; }
  bool has_closed_form_recession() const noexcept { return static_cast<bool>(recession_); }
  const Function& closed_form_recession() const noexcept { return recession_; }

 private:
  std::string name_;
  Function eval_;
  double r_max_;
  double s_max_;
  Gradient gradient_;
  Function recession_;
};

// (j_+)^p / m(r,s)^(p-1) with 0/0 = 0, a/0 = inf; inf outside [0,R]x[0,S].
double alpha_density(double j, double r, double s, const Mobility& mobility,
                     const Exponents& exponents);
// m(r,s) (v_+)^q; inf outside the box.
double alpha_tilde_density(double v, double r, double s, const Mobility& mobility,
                           const Exponents& exponents);

// Positively 1-homogeneous limit of m(lambda r, lambda s) / lambda.
class Recession {
 public:
  explicit Recession(const Mobility& mobility);

  double operator()(double r, double s) const;
  bool closed_form() const noexcept { return static_cast<bool>(closed_); }

 private:
  Mobility::Function base_;
  Mobility::Function closed_;
};

// Throws NotApplicable when R or S is finite.
Recession recession(const Mobility& mobility);

struct MobilityClass {
  bool uniformly_sublinear = false;
  bool bounded_thresholds = false;
  bool vanishing_iff_source_zero = false;

  // Support-preservation condition: at least one of the flags holds.
  bool condition_a() const noexcept {
    return uniformly_sublinear || bounded_thresholds || vanishing_iff_source_zero;
  }
};

struct ValidationReport {
  MobilityClass classification;
  std::size_t samples = 0;
  std::size_t concavity_pairs = 0;
  double box_r = 0.0;
  double box_s = 0.0;
};

// Sampled (not proven) check of upwind admissibility, interior positivity and
// midpoint concavity. Infinite thresholds are truncated at `box`.
ValidationReport validate_mobility(const Mobility& mobility, int grid_size, double box = 10.0);

}  // namespace graphflow
