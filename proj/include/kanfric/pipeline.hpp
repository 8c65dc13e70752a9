#pragma once

/// @file pipeline.hpp
/// @brief fit -> prune -> refit -> symbolify -> refit on one dataset.

#include <string>
#include <vector>

#include "kanfric/friction.hpp"
#include "kanfric/pruning.hpp"
#include "kanfric/symbolic.hpp"

namespace kanfric {

/// Input matrix built from named columns ("velocity" or channel names).
Eigen::MatrixXd input_matrix(const FrictionDataset& data, const std::vector<std::string>& names);

struct PipelineOptions {
  ArchSpec arch = default_arch();
  int fit_steps = 50;
  int refit_steps = 50;  // after pruning; the symbolic refit uses symbolic.refit_steps
  PruneConfig prune;
  SymbolifyOptions symbolic;
  std::vector<std::string> library;  // empty: full default library
  std::vector<std::string> inputs{"velocity"};
  std::uint64_t seed = 0;

  /// [1,[5,2],1] with G = 3, r = 3.
  static ArchSpec default_arch();
};

struct PipelineResult {
  KanNetworkd fitted;
  KanNetworkd pruned;
  FitTrace fit_trace;
  FitTrace prune_refit_trace;
  PruneReport prune_report;
  SymbolifyResult symbolic;
  double r2_fit = 0.0;
  double r2_pruned = 0.0;
  double r2_symbolic = 0.0;
};

PipelineResult run_pipeline(const FrictionDataset& data, const PipelineOptions& options);

}  // namespace kanfric
