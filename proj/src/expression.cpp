#include "graphflow/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "graphflow/error.hpp"

namespace graphflow {

namespace {

struct Dual {
  double v = 0.0;
  double d0 = 0.0;
  double d1 = 0.0;
};

Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d0 + b.d0, a.d1 + b.d1}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d0 - b.d0, a.d1 - b.d1}; }
Dual operator-(Dual a) { return {-a.v, -a.d0, -a.d1}; }
Dual operator*(Dual a, Dual b) {
  return {a.v * b.v, a.d0 * b.v + a.v * b.d0, a.d1 * b.v + a.v * b.d1};
}
Dual operator/(Dual a, Dual b) {
  const double inv = 1.0 / b.v;
  return {a.v * inv, (a.d0 * b.v - a.v * b.d0) * inv * inv, (a.d1 * b.v - a.v * b.d1) * inv * inv};
}
Dual chain(Dual a, double value, double slope) { return {value, slope * a.d0, slope * a.d1}; }

Dual dpow(Dual a, Dual b) {
  const double value = std::pow(a.v, b.v);
  const bool const_exponent = b.d0 == 0.0 && b.d1 == 0.0;
  if (const_exponent) {
    const double slope = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
    const double d0 = a.d0 == 0.0 ? 0.0 : slope * a.d0;
    const double d1 = a.d1 == 0.0 ? 0.0 : slope * a.d1;
    return {value, d0, d1};
  }
  const double la = std::log(a.v);
  return {value, value * (b.d0 * la + b.v * a.d0 / a.v), value * (b.d1 * la + b.v * a.d1 / a.v)};
}

double apply(Expression::Op op, double a, double b) {
  using Op = Expression::Op;
  switch (op) {
    case Op::kAdd: return a + b;
    case Op::kSub: return a - b;
    case Op::kMul: return a * b;
    case Op::kDiv: return a / b;
    case Op::kPow: return std::pow(a, b);
    case Op::kNeg: return -a;
    case Op::kMin: return std::min(a, b);
    case Op::kMax: return std::max(a, b);
    case Op::kSqrt: return std::sqrt(a);
    case Op::kExp: return std::exp(a);
    case Op::kLog: return std::log(a);
    case Op::kAbs: return std::abs(a);
    default: return 0.0;
  }
}

Dual apply(Expression::Op op, Dual a, Dual b) {
  using Op = Expression::Op;
  switch (op) {
    case Op::kAdd: return a + b;
    case Op::kSub: return a - b;
    case Op::kMul: return a * b;
    case Op::kDiv: return a / b;
    case Op::kPow: return dpow(a, b);
    case Op::kNeg: return -a;
    case Op::kMin: return a.v <= b.v ? a : b;
    case Op::kMax: return a.v >= b.v ? a : b;
    case Op::kSqrt: {
      const double s = std::sqrt(a.v);
      return chain(a, s, s > 0.0 ? 0.5 / s : 0.0);
    }
    case Op::kExp: {
      const double e = std::exp(a.v);
      return chain(a, e, e);
    }
    case Op::kLog: return chain(a, std::log(a.v), 1.0 / a.v);
    case Op::kAbs: return chain(a, std::abs(a.v), a.v >= 0.0 ? 1.0 : -1.0);
    default: return {};
  }
}

}  // namespace

class ExpressionParser {
 public:
  ExpressionParser(Expression& out, const std::string& text) : out_(out), text_(text) {}

  int parse() {
    const int root = parse_expr();
    skip_space();
    if (pos_ != text_.size()) error("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kExpressionError,
         what + " at position " + std::to_string(pos_) + " in \"" + text_ + "\"");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) error(std::string("expected '") + c + "'");
  }

  int add(Expression::Node node) {
    out_.nodes_.push_back(node);
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

  int binary(Op op, int lhs, int rhs) { return add({op, 0.0, -1, lhs, rhs}); }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(Op::kAdd, lhs, parse_term());
      } else if (accept('-')) {
        lhs = binary(Op::kSub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary(Op::kMul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = binary(Op::kDiv, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    if (accept('-')) return add({Op::kNeg, 0.0, -1, parse_unary(), -1});
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  int parse_power() {
    const int base = parse_primary();
    if (accept('^')) return binary(Op::kPow, base, parse_unary());
    return base;
  }

  int parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) error("unexpected end of expression");
    const char c = text_[pos_];
    if (accept('(')) {
      const int inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      const double value = std::strtod(begin, &end);
      if (end == begin) error("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      return add({Op::kConst, value, -1, -1, -1});
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string name = text_.substr(start, pos_ - start);
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') return parse_call(name);
      const auto& vars = out_.variables_;
      const auto it = std::find(vars.begin(), vars.end(), name);
      if (it != vars.end()) {
        return add({Op::kVar, 0.0, static_cast<int>(it - vars.begin()), -1, -1});
      }
      if (name == "pi") return add({Op::kConst, 3.14159265358979323846, -1, -1, -1});
      error("unknown variable '" + name + "'");
    }
    error(std::string("unexpected character '") + c + "'");
  }

  int parse_call(const std::string& name) {
    expect('(');
    const int a = parse_expr();
    if (name == "min" || name == "max") {
      expect(',');
      const int b = parse_expr();
      expect(')');
      return binary(name == "min" ? Op::kMin : Op::kMax, a, b);
    }
    expect(')');
    Op op;
    if (name == "sqrt") {
      op = Op::kSqrt;
    } else if (name == "exp") {
      op = Op::kExp;
    } else if (name == "log") {
      op = Op::kLog;
    } else if (name == "abs") {
      op = Op::kAbs;
    } else {
      error("unknown function '" + name + "'");
    }
    return add({op, 0.0, -1, a, -1});
  }

  Expression& out_;
  const std::string& text_;
  std::size_t pos_ = 0;
};

Expression Expression::parse(const std::string& text, std::vector<std::string> variables) {
  Expression expr;
  expr.text_ = text;
  expr.variables_ = std::move(variables);
  ExpressionParser parser(expr, expr.text_);
  expr.root_ = parser.parse();
  return expr;
}

template <class T>
T Expression::eval(int index, const T* vars) const {
  const Node& n = nodes_[static_cast<std::size_t>(index)];
  switch (n.op) {
    case Op::kConst:
      return T{n.value};
    case Op::kVar:
      return vars[n.var];
    default: {
      const T a = eval(n.lhs, vars);
      const T b = n.rhs >= 0 ? eval(n.rhs, vars) : T{};
      return apply(n.op, a, b);
    }
  }
}

double Expression::evaluate(std::span<const double> values) const {
  if (values.size() != variables_.size()) {
    fail(ErrorCode::kSizeMismatch, "expression expects " + std::to_string(variables_.size()) + " variables");
  }
  return eval<double>(root_, values.data());
}

std::array<double, 3> Expression::evaluate_with_gradient(double x, double y) const {
  std::vector<Dual> vars(variables_.size());
  if (!vars.empty()) vars[0] = Dual{x, 1.0, 0.0};
  if (vars.size() > 1) vars[1] = Dual{y, 0.0, 1.0};
  const Dual r = eval<Dual>(root_, vars.data());
  return {r.v, r.d0, r.d1};
}

}  // namespace graphflow
