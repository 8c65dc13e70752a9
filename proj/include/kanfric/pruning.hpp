#pragma once

/// @file pruning.hpp
/// @brief Attribution scores and bottom-up node/edge/input pruning.
///
/// Edge activity is the batch standard deviation of an edge's masked output.
/// Scores flow from the outputs (score 1) towards the inputs: a pre-node
/// splits its score over incoming edges in proportion to their activity, a
/// multiplicative node hands its full score to both of its pre-nodes, and a
/// node's score is the sum of its outgoing edge scores.

#include <string>
#include <vector>

#include "kanfric/network.hpp"

namespace kanfric {

struct AttributionScores {
  std::vector<Eigen::MatrixXd> edge_scores;  // per layer, [l_o x l_i]
  std::vector<Eigen::VectorXd> node_scores;  // per node layer, inputs through outputs
};

struct PruneConfig {
  double node_threshold = 1e-2;
  double edge_threshold = 3e-2;
  double input_threshold = 1e-2;  // used by prune_inputs
};

AttributionScores attribution_scores(const KanNetworkd& net, const Eigen::MatrixXd& inputs);

/// Per-layer division by the layer maximum (layers whose maximum is 0 stay 0).
AttributionScores normalized(const AttributionScores& scores);

struct PruneReport {
  double node_threshold = 0;
  double edge_threshold = 0;
  std::vector<std::vector<int>> surviving_nodes;                  // per node layer
  std::vector<std::vector<std::pair<int, int>>> surviving_edges;  // per layer, (i, j)
  std::vector<int> pruned_inputs;
  AttributionScores scores;  // normalized scores used for edge pruning

  std::string to_json() const;
};

struct PruneResult {
  KanNetworkd net;
  PruneReport report;
};

/// (1) masks hidden nodes whose normalized score is below node_threshold
/// together with their edges, (2) recomputes scores, (3) masks edges below
/// edge_threshold, (4) masks nodes and edges left without an input-to-output
/// path and reports inputs with no surviving outgoing edge. `scores` must
/// come from `net` on `inputs`. Throws OverPrunedError when an output loses
/// every path to the inputs. Masks only ever go from 1 to 0.
PruneResult prune(const KanNetworkd& net, const AttributionScores& scores, const Eigen::MatrixXd& inputs,
                  const PruneConfig& config);

struct InputPruneResult {
  KanNetworkd net;
  std::vector<int> removed_inputs;
};

/// Masks inputs whose normalized score is below `threshold`, including all
/// of their outgoing edges.
InputPruneResult prune_inputs(const KanNetworkd& net, const AttributionScores& scores, double threshold);

}  // namespace kanfric
