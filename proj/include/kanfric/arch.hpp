#pragma once

#include <string>
#include <vector>

namespace kanfric {

/// One node layer: `additive` summing nodes followed by `multiplicative`
/// nodes, each of which multiplies two consecutive pre-node outputs.
struct NodeSpec {
  int additive = 1;
  int multiplicative = 0;

  int nodes() const { return additive + multiplicative; }
  int pre_nodes() const { return additive + 2 * multiplicative; }
  bool operator==(const NodeSpec&) const = default;
};

/// Network shape in the bracket notation, e.g. "[1,[5,2],1]" with a shared
/// grid size and spline degree.
struct ArchSpec {
  std::vector<NodeSpec> layers;
  int grid = 10;
  int order = 3;

  int depth() const { return static_cast<int>(layers.size()) - 1; }
  int inputs() const { return layers.front().nodes(); }
  int outputs() const { return layers.back().nodes(); }

  /// Throws std::invalid_argument describing the first violation.
  void validate() const;

  bool operator==(const ArchSpec&) const = default;
};

/// Parses "[1,5,1]" or "[1,[5,2],1]". Throws std::invalid_argument.
ArchSpec parse_arch(const std::string& text, int grid = 10, int order = 3);

std::string format_arch(const ArchSpec& arch);

}  // namespace kanfric
