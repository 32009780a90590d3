#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace graphflow {

// Small arithmetic expression language for user-supplied mobilities and
// kernels: numbers, named variables, + - * / ^, parentheses, unary minus,
// min(a,b), max(a,b), sqrt, exp, log, abs.
class Expression {
 public:
  static Expression parse(const std::string& text, std::vector<std::string> variables);

  double evaluate(std::span<const double> values) const;
  // Value and first derivatives with respect to the first two variables
  // (forward-mode dual numbers).
  std::array<double, 3> evaluate_with_gradient(double x, double y) const;

  const std::string& text() const noexcept { return text_; }
  const std::vector<std::string>& variables() const noexcept { return variables_; }

  enum class Op { kConst, kVar, kAdd, kSub, kMul, kDiv, kPow, kNeg, kMin, kMax, kSqrt, kExp, kLog, kAbs };
  struct Node {
    Op op;
    double value = 0.0;
    int var = -1;
    int lhs = -1;
    int rhs = -1;
  };

 private:
  template <class T>
  T eval(int node, const T* vars) const;

  std::string text_;
  std::vector<std::string> variables_;
  std::vector<Node> nodes_;
  int root_ = -1;

  friend class ExpressionParser;
};

}  // namespace graphflow
