#include "kanfric/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "kanfric/errors.hpp"

namespace kanfric {

namespace {

double batch_std(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().mean());
}

// Masks node k of node layer l along with every edge that feeds or reads it.
void mask_node(KanNetworkd& net, int l, int k) {
  net.node_masks[l][k] = 0.0;
  if (l < net.arch.depth()) net.layers[l].edge_mask.col(k).setZero();
  if (l > 0) {
    const auto& spec = net.arch.layers[l];
    auto& mask = net.layers[l - 1].edge_mask;
    if (k < spec.additive) {
      mask.row(k).setZero();
    } else {
      const int m = k - spec.additive;
      mask.row(spec.additive + 2 * m).setZero();
      mask.row(spec.additive + 2 * m + 1).setZero();
    }
  }
}

struct Reachability {
  std::vector<std::vector<bool>> alive;  // per node layer
  std::vector<bool> outputs_fed;
};

Reachability reachability(const KanNetworkd& net) {
  const int depth = net.arch.depth();
  std::vector<std::vector<bool>> forward(depth + 1), backward(depth + 1);
  forward[0].resize(net.inputs());
  for (int j = 0; j < net.inputs(); ++j) forward[0][j] = net.node_masks[0][j] != 0.0;
  for (int l = 0; l < depth; ++l) {
    const auto& layer = net.layers[l];
    const auto& spec = net.arch.layers[l + 1];
    std::vector<bool> pre(layer.out_width, false);
    for (int i = 0; i < layer.out_width; ++i)
      for (int j = 0; j < layer.in_width; ++j) pre[i] = pre[i] || (layer.edge_active(i, j) && forward[l][j]);
    forward[l + 1].resize(spec.nodes());
    for (int k = 0; k < spec.additive; ++k) forward[l + 1][k] = pre[k];
    for (int m = 0; m < spec.multiplicative; ++m)
      forward[l + 1][spec.additive + m] = pre[spec.additive + 2 * m] && pre[spec.additive + 2 * m + 1];
    for (int k = 0; k < spec.nodes(); ++k) forward[l + 1][k] = forward[l + 1][k] && net.node_masks[l + 1][k] != 0.0;
  }
  backward[depth].assign(net.outputs(), true);
  for (int l = depth - 1; l >= 0; --l) {
    const auto& layer = net.layers[l];
    const auto& spec = net.arch.layers[l + 1];
    std::vector<bool> pre(layer.out_width, false);
    for (int k = 0; k < spec.additive; ++k) pre[k] = backward[l + 1][k];
    for (int m = 0; m < spec.multiplicative; ++m)
      pre[spec.additive + 2 * m] = pre[spec.additive + 2 * m + 1] = backward[l + 1][spec.additive + m];
    backward[l].assign(layer.in_width, false);
    for (int j = 0; j < layer.in_width; ++j)
      for (int i = 0; i < layer.out_width; ++i) backward[l][j] = backward[l][j] || (layer.edge_active(i, j) && pre[i]);
  }
  Reachability r;
  r.alive.resize(depth + 1);
  for (int l = 0; l <= depth; ++l) {
    r.alive[l].resize(forward[l].size());
    for (std::size_t k = 0; k < forward[l].size(); ++k) r.alive[l][k] = forward[l][k] && backward[l][k];
  }
  r.outputs_fed = forward[depth];
  return r;
}

// Drops everything off an input-to-output path; throws if an output is cut off.
std::vector<int> remove_dead_structure(KanNetworkd& net) {
  const auto reach = reachability(net);
  for (int o = 0; o < net.outputs(); ++o)
    if (!reach.outputs_fed[o])
      throw OverPrunedError("pruning disconnected output " + std::to_string(o) +
                            " from every input; reduce the node/edge thresholds");
  std::vector<int> pruned_inputs;
  const int depth = net.arch.depth();
  for (int l = 0; l < depth; ++l)
    for (int k = 0; k < net.arch.layers[l].nodes(); ++k)
      if (!reach.alive[l][k]) {
        if (l == 0) pruned_inputs.push_back(k);
        mask_node(net, l, k);
      }
  return pruned_inputs;
}

std::vector<std::vector<int>> surviving_nodes(const KanNetworkd& net) {
  std::vector<std::vector<int>> out;
  for (const auto& mask : net.node_masks) {
    std::vector<int> alive;
    for (Eigen::Index k = 0; k < mask.size(); ++k)
      if (mask[k] != 0.0) alive.push_back(static_cast<int>(k));
    out.push_back(std::move(alive));
  }
  return out;
}

std::vector<std::vector<std::pair<int, int>>> surviving_edges(const KanNetworkd& net) {
  std::vector<std::vector<std::pair<int, int>>> out;
  for (const auto& layer : net.layers) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < layer.out_width; ++i)
      for (int j = 0; j < layer.in_width; ++j)
        if (layer.edge_active(i, j)) edges.emplace_back(i, j);
    out.push_back(std::move(edges));
  }
  return out;
}

}  // namespace

AttributionScores attribution_scores(const KanNetworkd& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() == 0) throw std::invalid_argument("attribution_scores: empty data");
  const auto cache = network_forward_cached(inputs, net);
  const int depth = net.arch.depth();

  AttributionScores scores;
  scores.edge_scores.resize(depth);
  scores.node_scores.resize(depth + 1);
  scores.node_scores[depth] = Eigen::VectorXd::Ones(net.outputs());
  for (int l = depth - 1; l >= 0; --l) {
    const auto& layer = net.layers[l];
    const auto& lc = cache.layers[l];
    const auto& spec = net.arch.layers[l + 1];
    const Eigen::VectorXd node = scores.node_scores[l + 1].cwiseProduct(net.node_masks[l + 1]);

    Eigen::VectorXd pre(layer.out_width);
    pre.head(spec.additive) = node.head(spec.additive);
    for (int m = 0; m < spec.multiplicative; ++m)
      pre[spec.additive + 2 * m] = pre[spec.additive + 2 * m + 1] = node[spec.additive + m];

    Eigen::MatrixXd activity = Eigen::MatrixXd::Zero(layer.out_width, layer.in_width);
    for (int i = 0; i < layer.out_width; ++i)
      for (int j = 0; j < layer.in_width; ++j)
        if (layer.edge_active(i, j))
          activity(i, j) = batch_std(layer.spline_scaler(i, j) * lc.spline[j].col(i) +
                                     layer.base_weight(i, j) * lc.base.col(j));

    Eigen::MatrixXd edge = Eigen::MatrixXd::Zero(layer.out_width, layer.in_width);
    for (int i = 0; i < layer.out_width; ++i) {
      const double total = activity.row(i).sum();
      if (total > 0.0) {
        edge.row(i) = pre[i] * activity.row(i) / total;
      } else {
        // every active incoming edge is constant: split evenly
        const double active = layer.edge_mask.row(i).sum();
        if (active > 0.0) edge.row(i) = pre[i] * layer.edge_mask.row(i) / active;
      }
    }
    scores.edge_scores[l] = edge;
    scores.node_scores[l] = edge.colwise().sum().transpose().cwiseProduct(net.node_masks[l]);
  }
  return scores;
}

AttributionScores normalized(const AttributionScores& scores) {
  AttributionScores out = scores;
  for (auto& m : out.edge_scores)
    if (m.size() && m.maxCoeff() > 0.0) m /= m.maxCoeff();
  for (auto& v : out.node_scores)
    if (v.size() && v.maxCoeff() > 0.0) v /= v.maxCoeff();
  return out;
}

PruneResult prune(const KanNetworkd& net, const AttributionScores& scores, const Eigen::MatrixXd& inputs,
                  const PruneConfig& config) {
  if (config.node_threshold < 0 || config.edge_threshold < 0)
    throw std::invalid_argument("prune: thresholds must be >= 0");
  PruneResult result{net, {}};
  KanNetworkd& out = result.net;
  const int depth = net.arch.depth();

  const auto node_scores = normalized(scores);
  for (int l = 1; l < depth; ++l)
    for (int k = 0; k < net.arch.layers[l].nodes(); ++k)
      if (out.node_masks[l][k] != 0.0 && node_scores.node_scores[l][k] < config.node_threshold) mask_node(out, l, k);

  const auto edge_scores = normalized(attribution_scores(out, inputs));
  for (int l = 0; l < depth; ++l) {
    auto& layer = out.layers[l];
    for (int i = 0; i < layer.out_width; ++i)
      for (int j = 0; j < layer.in_width; ++j)
        if (layer.edge_active(i, j) && edge_scores.edge_scores[l](i, j) < config.edge_threshold)
          layer.edge_mask(i, j) = 0.0;
  }

  result.report.pruned_inputs = remove_dead_structure(out);
  result.report.node_threshold = config.node_threshold;
  result.report.edge_threshold = config.edge_threshold;
  result.report.surviving_nodes = surviving_nodes(out);
  result.report.surviving_edges = surviving_edges(out);
  result.report.scores = edge_scores;
  return result;
}

InputPruneResult prune_inputs(const KanNetworkd& net, const AttributionScores& scores, double threshold) {
  if (threshold < 0) throw std::invalid_argument("prune_inputs: threshold must be >= 0");
  InputPruneResult result{net, {}};
  const auto norm = normalized(scores);
  for (int j = 0; j < net.inputs(); ++j)
    if (result.net.node_masks[0][j] != 0.0 && norm.node_scores[0][j] < threshold) {
      mask_node(result.net, 0, j);
      result.removed_inputs.push_back(j);
    }
  const auto dead = remove_dead_structure(result.net);
  for (int j : dead)
    if (std::find(result.removed_inputs.begin(), result.removed_inputs.end(), j) == result.removed_inputs.end())
      result.removed_inputs.push_back(j);
  std::sort(result.removed_inputs.begin(), result.removed_inputs.end());
  return result;
}

std::string PruneReport::to_json() const {
  nlohmann::json doc;
  doc["node_threshold"] = node_threshold;
  doc["edge_threshold"] = edge_threshold;
  doc["surviving_nodes"] = surviving_nodes;
  nlohmann::json edges = nlohmann::json::array();
  for (std::size_t l = 0; l < surviving_edges.size(); ++l) {
    nlohmann::json layer = nlohmann::json::array();
    for (const auto& [i, j] : surviving_edges[l])
      layer.push_back({{"out", i}, {"in", j}, {"score", l < scores.edge_scores.size() ? scores.edge_scores[l](i, j) : 0.0}});
    edges.push_back(std::move(layer));
  }
  doc["surviving_edges"] = std::move(edges);
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& v : scores.node_scores) nodes.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  doc["node_scores"] = std::move(nodes);
  doc["pruned_inputs"] = pruned_inputs;
  return doc.dump(2) + "\n";
}

}  // namespace kanfric
