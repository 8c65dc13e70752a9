#pragma once

/// @file symbolic.hpp
/// @brief Closed-form replacement of spline edges.
///
/// Every edge hypothesis has the form y = c * f(a * x + b) + d with f taken
/// from a FunctionLibrary. A SymbolicModel keeps the pruned topology of the
/// network it came from; each active edge is either symbolic or still the
/// original spline.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kanfric/expression.hpp"
#include "kanfric/network.hpp"
#include "kanfric/optimizers.hpp"

namespace kanfric {

struct LibraryFunction {
  std::string name;
  int complexity = 1;
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<ExprPtr(ExprPtr)> build;  // expression for f(arg)
};

class FunctionLibrary {
 public:
  /// Throws std::invalid_argument on a duplicate or empty name.
  void add(LibraryFunction fn);
  bool contains(const std::string& name) const;
  const LibraryFunction& at(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<LibraryFunction> entries_;
};

/// x, x^2, x^3, x^4, x^5, 1/x, 1/x^2, 1/x^5, sqrt, log, exp, gaussian
/// (exp(-x^2)), sin, cos, tan, tanh, arctan, abs.
FunctionLibrary default_library();

/// The entries of `lib` named in `names`, in that order.
FunctionLibrary library_subset(const FunctionLibrary& lib, const std::vector<std::string>& names);

/// Name used for edges collapsed to their mean (f = 0, only d remains).
inline const std::string kConstantEdge = "const";

struct SymbolicEdge {
  std::string function;
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double r2 = 0.0;
  int complexity = 0;
};

struct FitEdgeOptions {
  int a_points = 41;  // per sign
  int b_points = 41;
  double a_min = 1e-2;
  double a_max = 1e2;
  int grid_samples = 256;  // rows used during the grid search
  int refine_steps = 50;
};

/// Grid search over (a, b) with (c, d) from linear least squares, then
/// L-BFGS refinement of all four parameters on every sample. The shift grid
/// is b = -a * x0 with x0 spread over the sample range widened by half its
/// width on each side. A constant target yields c = 0, d = mean and R² = 0.
SymbolicEdge fit_edge(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LibraryFunction& fn,
                      const FitEdgeOptions& options = {});

/// Every library entry fitted to (x, y), best R² first, ties to lower
/// complexity.
std::vector<SymbolicEdge> rank_candidates(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                          const FunctionLibrary& lib, const FitEdgeOptions& options = {});

/// rank_candidates on the activations of edge (i, j) of `layer` over `inputs`.
std::vector<SymbolicEdge> suggest_symbolic(const KanNetworkd& net, int layer, int i, int j,
                                           const FunctionLibrary& lib, const Eigen::MatrixXd& inputs,
                                           const FitEdgeOptions& options = {});

struct SymbolicSlot {
  enum class Kind { inactive, symbolic, spline };
  Kind kind = Kind::inactive;
  SymbolicEdge symbol;
  // spline fallback, mask folded in
  SplineGrid<double> grid;
  Eigen::RowVectorXd coeffs;
  double scaler = 0.0;
  double base_weight = 0.0;
};

struct SymbolicLayer {
  int in_width = 0;
  int out_width = 0;
  bool squash = false;
  std::vector<SymbolicSlot> edges;  // row-major: edges[i * in_width + j]

  SymbolicSlot& edge(int i, int j) { return edges[static_cast<std::size_t>(i) * in_width + j]; }
  const SymbolicSlot& edge(int i, int j) const { return edges[static_cast<std::size_t>(i) * in_width + j]; }
};

class SymbolicModel {
 public:
  ArchSpec arch;
  std::vector<SymbolicLayer> layers;
  std::vector<Eigen::VectorXd> node_masks;
  std::vector<AffineMap<double>> input_norm;
  std::vector<AffineMap<double>> output_norm;
  std::shared_ptr<const FunctionLibrary> library;

  /// Every active edge of `net` becomes a spline slot.
  static SymbolicModel from_network(const KanNetworkd& net, std::shared_ptr<const FunctionLibrary> library);

  int inputs() const { return arch.inputs(); }
  int outputs() const { return arch.outputs(); }
  int count(SymbolicSlot::Kind kind) const;
  bool fully_symbolic() const { return count(SymbolicSlot::Kind::spline) == 0; }

  /// Physical-unit predictions, one row per input row. Throws DomainError
  /// if an edge leaves its function's domain.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& v) const;

  /// Node values per node layer in the normalized domain.
  std::vector<Eigen::MatrixXd> node_values(const Eigen::MatrixXd& v) const;

  /// Output of one active edge over a column of layer inputs.
  Eigen::VectorXd edge_output(int layer, int i, int j, const Eigen::VectorXd& x) const;

  /// (a, b, c, d) of every symbolic edge in layer, row, column order.
  Eigen::VectorXd affine_parameters() const;
  void set_affine_parameters(const Eigen::VectorXd& params);

  /// MSE against `targets` and its gradient over affine_parameters().
  /// Returns NaN (no throw) when an edge leaves its domain.
  double loss_and_gradient(const Eigen::MatrixXd& v, const Eigen::MatrixXd& targets, Eigen::VectorXd& grad) const;

  /// One expression per output in the input variables (v, or v1..vn).
  /// Normalization maps are folded into constants. Spline slots appear as
  /// calls to spline_<layer>_<i>_<j>, which evaluate() does not know.
  std::vector<ExprPtr> to_expressions() const;

  /// Rendered output expressions, one per line.
  std::string render() const;

  std::vector<std::string> variable_names() const;
};

/// Single-input, single-output evaluation.
double eval_symbolic(const SymbolicModel& model, double v);
std::string render(const SymbolicModel& model);

struct EdgeDecision {
  int layer = 0;
  int i = 0;
  int j = 0;
  bool accepted = false;
  SymbolicEdge chosen;                  // top candidate (or the constant fit)
  std::vector<SymbolicEdge> runners_up;  // next candidates, best first
};

struct SymbolifyOptions {
  double accept_threshold = 0.9;
  int refit_steps = 50;
  int report_candidates = 3;
  FitEdgeOptions fit;
};

struct SymbolifyResult {
  SymbolicModel model;
  FitTrace refit;
  std::vector<EdgeDecision> decisions;
  std::string expression;
  double agreement_r2 = 0.0;  // model vs. the replaced network on the training inputs

  bool partial() const { return !model.fully_symbolic(); }
};

/// Replaces every spline slot whose top candidate reaches accept_threshold
/// (edges with constant output become constants), then refits the affine
/// parameters of all symbolic edges against (inputs, targets) with L-BFGS.
/// The refit is skipped when no edge changed, so a fully symbolic model is
/// a fixed point.
SymbolifyResult symbolify(const SymbolicModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          const SymbolifyOptions& options = {});

SymbolifyResult symbolify(const KanNetworkd& net, const FunctionLibrary& lib, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, const SymbolifyOptions& options = {});

}  // namespace kanfric
