#pragma once

#include <stdexcept>
#include <string>

namespace kanfric {

/// Malformed or schema-mismatched input file. `field()` holds the offending
/// field path (e.g. "layers[1].base_weight").
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Pruning removed every path from the inputs to some output.
class OverPrunedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation left a function's domain. `subexpression()` is the rendered
/// term that failed.
class DomainError : public std::runtime_error {
 public:
  DomainError(std::string subexpression, const std::string& what)
      : std::runtime_error(what + " in " + subexpression),
        subexpression_(std::move(subexpression)) {}
  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string subexpression_;
};

}  // namespace kanfric
