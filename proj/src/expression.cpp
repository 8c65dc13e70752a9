#include "kanfric/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "kanfric/errors.hpp"

namespace kanfric {

namespace {

ExprPtr make(Expr::Kind kind, std::vector<ExprPtr> args, double value = 0.0, std::string name = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->args = std::move(args);
  e->value = value;
  e->name = std::move(name);
  return e;
}

bool is_number(const ExprPtr& e, double v) { return e->kind == Expr::Kind::number && e->value == v; }
bool is_number(const ExprPtr& e) { return e->kind == Expr::Kind::number; }

const std::set<std::string>& function_names() {
  static const std::set<std::string> names{"sin", "cos", "tan", "tanh", "atan", "exp", "sqrt", "log", "abs"};
  return names;
}

double apply_function(const std::string& name, double x, const ExprPtr& node) {
  if (name == "sin") return std::sin(x);
  if (name == "cos") return std::cos(x);
  if (name == "tan") return std::tan(x);
  if (name == "tanh") return std::tanh(x);
  if (name == "atan") return std::atan(x);
  if (name == "exp") return std::exp(x);
  if (name == "abs") return std::abs(x);
  if (name == "sqrt") {
    if (x < 0) throw DomainError(render(node), "sqrt of negative value");
    return std::sqrt(x);
  }
  if (name == "log") {
    if (!(x > 0)) throw DomainError(render(node), "log of non-positive value");
    return std::log(x);
  }
  throw DomainError(render(node), "unknown function '" + name + "'");
}

}  // namespace

namespace expr {

ExprPtr number(double value) { return make(Expr::Kind::number, {}, value); }
ExprPtr variable(const std::string& name) { return make(Expr::Kind::variable, {}, 0.0, name); }
ExprPtr negate(ExprPtr a) {
  if (is_number(a)) return number(-a->value);
  return make(Expr::Kind::negate, {std::move(a)});
}
ExprPtr call(const std::string& function, ExprPtr arg) { return make(Expr::Kind::call, {std::move(arg)}, 0.0, function); }
ExprPtr power(ExprPtr base, ExprPtr exponent) { return make(Expr::Kind::power, {std::move(base), std::move(exponent)}); }

ExprPtr add(ExprPtr a, ExprPtr b) {
  if (is_number(a) && is_number(b)) return number(a->value + b->value);
  if (is_number(a, 0.0)) return b;
  if (is_number(b, 0.0)) return a;
  return make(Expr::Kind::add, {std::move(a), std::move(b)});
}
ExprPtr subtract(ExprPtr a, ExprPtr b) {
  if (is_number(a) && is_number(b)) return number(a->value - b->value);
  if (is_number(b, 0.0)) return a;
  return make(Expr::Kind::subtract, {std::move(a), std::move(b)});
}
ExprPtr multiply(ExprPtr a, ExprPtr b) {
  if (is_number(a) && is_number(b)) return number(a->value * b->value);
  if (is_number(a, 1.0)) return b;
  if (is_number(b, 1.0)) return a;
  return make(Expr::Kind::multiply, {std::move(a), std::move(b)});
}
ExprPtr divide(ExprPtr a, ExprPtr b) {
  if (is_number(a) && is_number(b) && b->value != 0.0) return number(a->value / b->value);
  if (is_number(b, 1.0)) return a;
  return make(Expr::Kind::divide, {std::move(a), std::move(b)});
}

}  // namespace expr

bool is_known_function(const std::string& name) { return function_names().count(name) > 0; }

double evaluate(const ExprPtr& e, const std::map<std::string, double>& vars) {
  double result = 0.0;
  switch (e->kind) {
    case Expr::Kind::number:
      return e->value;
    case Expr::Kind::variable: {
      const auto it = vars.find(e->name);
      if (it == vars.end()) throw DomainError(e->name, "unbound variable");
      return it->second;
    }
    case Expr::Kind::negate:
      return -evaluate(e->args[0], vars);
    case Expr::Kind::add:
      result = evaluate(e->args[0], vars) + evaluate(e->args[1], vars);
      break;
    case Expr::Kind::subtract:
      result = evaluate(e->args[0], vars) - evaluate(e->args[1], vars);
      break;
    case Expr::Kind::multiply:
      result = evaluate(e->args[0], vars) * evaluate(e->args[1], vars);
      break;
    case Expr::Kind::divide: {
      const double num = evaluate(e->args[0], vars), den = evaluate(e->args[1], vars);
      if (den == 0.0) throw DomainError(render(e), "division by zero");
      result = num / den;
      break;
    }
    case Expr::Kind::power: {
      const double base = evaluate(e->args[0], vars), exponent = evaluate(e->args[1], vars);
      if (base < 0 && std::floor(exponent) != exponent) throw DomainError(render(e), "fractional power of negative value");
      if (base == 0 && exponent < 0) throw DomainError(render(e), "division by zero");
      result = std::pow(base, exponent);
      break;
    }
    case Expr::Kind::call:
      result = apply_function(e->name, evaluate(e->args[0], vars), e);
      break;
  }
  if (!std::isfinite(result)) throw DomainError(render(e), "non-finite result");
  return result;
}

double evaluate(const ExprPtr& e, double v) { return evaluate(e, std::map<std::string, double>{{"v", v}}); }

std::string render(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::number: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", e->value);
      return e->value < 0 || std::signbit(e->value) ? "(" + std::string(buf) + ")" : std::string(buf);
    }
    case Expr::Kind::variable:
      return e->name;
    case Expr::Kind::negate:
      return "(-" + render(e->args[0]) + ")";
    case Expr::Kind::add:
      return "(" + render(e->args[0]) + " + " + render(e->args[1]) + ")";
    case Expr::Kind::subtract:
      return "(" + render(e->args[0]) + " - " + render(e->args[1]) + ")";
    case Expr::Kind::multiply:
      return "(" + render(e->args[0]) + "*" + render(e->args[1]) + ")";
    case Expr::Kind::divide:
      return "(" + render(e->args[0]) + "/" + render(e->args[1]) + ")";
    case Expr::Kind::power:
      return "(" + render(e->args[0]) + "**" + render(e->args[1]) + ")";
    case Expr::Kind::call:
      return e->name + "(" + render(e->args[0]) + ")";
  }
  return "?";
}

namespace {

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  ExprPtr parse() {
    ExprPtr e = expression();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("parse_expression: " + what + " at offset " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(const std::string& token) {
    skip();
    if (s_.compare(pos_, token.size(), token) == 0) {
      pos_ += token.size();
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(std::string(1, c))) fail(std::string("expected '") + c + "'");
  }

  // Operators build raw nodes (no folding) so parse(render(e)) keeps e's shape.
  ExprPtr expression() {
    ExprPtr lhs = term();
    while (true) {
      if (accept("+"))
        lhs = make(Expr::Kind::add, {lhs, term()});
      else if (peek_minus())
        lhs = make(Expr::Kind::subtract, {lhs, term()});
      else
        return lhs;
    }
  }
  bool peek_minus() {
    skip();
    if (pos_ < s_.size() && s_[pos_] == '-') {
      ++pos_;
      return true;
    }
    return false;
  }
  ExprPtr term() {
    ExprPtr lhs = unary();
    while (true) {
      skip();
      if (s_.compare(pos_, 2, "**") == 0) return lhs;
      if (accept("*"))
        lhs = make(Expr::Kind::multiply, {lhs, unary()});
      else if (accept("/"))
        lhs = make(Expr::Kind::divide, {lhs, unary()});
      else
        return lhs;
    }
  }
  ExprPtr unary() {
    if (accept("-")) {
      ExprPtr operand = unary();
      if (operand->kind == Expr::Kind::number) return expr::number(-operand->value);
      return make(Expr::Kind::negate, {operand});
    }
    return power();
  }
  ExprPtr power() {
    ExprPtr base = primary();
    if (accept("**")) return make(Expr::Kind::power, {base, unary()});
    return base;
  }
  ExprPtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr inner = expression();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number_literal();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        ++pos_;
        ExprPtr arg = expression();
        expect(')');
        return expr::call(name, arg);
      }
      return expr::variable(name);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
  ExprPtr number_literal() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin) fail("bad number");
    pos_ += static_cast<std::size_t>(end - begin);
    return expr::number(value);
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

void collect_variables(const ExprPtr& e, std::set<std::string>& out) {
  if (e->kind == Expr::Kind::variable) out.insert(e->name);
  for (const auto& a : e->args) collect_variables(a, out);
}

}  // namespace

ExprPtr parse_expression(const std::string& text) { return Parser(text).parse(); }

std::vector<std::string> variables_of(const ExprPtr& e) {
  std::set<std::string> names;
  collect_variables(e, names);
  return {names.begin(), names.end()};
}

}  // namespace kanfric
