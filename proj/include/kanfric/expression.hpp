#pragma once

/// @file expression.hpp
/// @brief Scalar expression trees: build, evaluate, render and parse.
///
/// Grammar of the rendered form (fully parenthesized):
///
///     expr    := term (("+" | "-") term)*
///     term    := unary (("*" | "/") unary)*
///     unary   := "-" unary | power
///     power   := primary ("**" unary)?
///     primary := number | name "(" expr ")" | name | "(" expr ")"
///
/// Functions: sin cos tan tanh atan exp sqrt log abs.

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace kanfric {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { number, variable, negate, add, subtract, multiply, divide, power, call };
  Kind kind = Kind::number;
  double value = 0.0;  // number
  std::string name;    // variable or function
  std::vector<ExprPtr> args;
};

namespace expr {

ExprPtr number(double value);
ExprPtr variable(const std::string& name);
ExprPtr negate(ExprPtr a);
ExprPtr call(const std::string& function, ExprPtr arg);
ExprPtr power(ExprPtr base, ExprPtr exponent);

// Binary constructors fold number-number operands and drop additive zeros
// and multiplicative ones.
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr subtract(ExprPtr a, ExprPtr b);
ExprPtr multiply(ExprPtr a, ExprPtr b);
ExprPtr divide(ExprPtr a, ExprPtr b);

}  // namespace expr

bool is_known_function(const std::string& name);

/// Evaluates with variables bound by name. Throws DomainError naming the
/// failing subexpression (sqrt/log of out-of-range values, division by
/// zero, non-finite results, unknown functions or unbound variables).
double evaluate(const ExprPtr& e, const std::map<std::string, double>& variables);

/// Convenience for single-variable expressions in `v`.
double evaluate(const ExprPtr& e, double v);

std::string render(const ExprPtr& e);

/// Throws std::invalid_argument with the character offset on syntax errors.
ExprPtr parse_expression(const std::string& text);

/// Names of all variables referenced, sorted.
std::vector<std::string> variables_of(const ExprPtr& e);

}  // namespace kanfric
