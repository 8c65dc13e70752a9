#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <random>

#include "kanfric/errors.hpp"
#include "kanfric/friction.hpp"
#include "kanfric/metrics.hpp"
#include "kanfric/pruning.hpp"
#include "kanfric/training.hpp"

using namespace kanfric;

namespace {

double batch_std(const Eigen::VectorXd& x) { return std::sqrt((x.array() - x.mean()).square().mean()); }

// Straightforward re-derivation of the propagation rule, node by node.
AttributionScores oracle_scores(const KanNetworkd& net, const Eigen::MatrixXd& v) {
  const auto cache = network_forward_cached(v, net);
  const int depth = net.arch.depth();
  AttributionScores s;
  s.edge_scores.resize(depth);
  s.node_scores.resize(depth + 1);
  s.node_scores[depth] = net.node_masks[depth];
  for (int l = depth - 1; l >= 0; --l) {
    const auto& layer = net.layers[l];
    const auto& spec = net.arch.layers[l + 1];
    Eigen::VectorXd pre(spec.pre_nodes());
    for (int k = 0; k < spec.additive; ++k) pre[k] = s.node_scores[l + 1][k];
    for (int k = 0; k < spec.multiplicative; ++k)
      pre[spec.additive + 2 * k] = pre[spec.additive + 2 * k + 1] = s.node_scores[l + 1][spec.additive + k];
    Eigen::MatrixXd act(layer.out_width, layer.in_width);
    for (int i = 0; i < layer.out_width; ++i)
      for (int j = 0; j < layer.in_width; ++j)
        act(i, j) = batch_std(edge_forward<double>(cache.nodes[l].col(j), layer, i, j));
    s.edge_scores[l] = Eigen::MatrixXd::Zero(layer.out_width, layer.in_width);
    for (int i = 0; i < layer.out_width; ++i)
      if (act.row(i).sum() > 0) s.edge_scores[l].row(i) = pre[i] * act.row(i) / act.row(i).sum();
    s.node_scores[l] = s.edge_scores[l].colwise().sum().transpose().cwiseProduct(net.node_masks[l]);
  }
  return s;
}

KanNetworkd fitted_151(int axis, std::uint64_t seed, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  const auto data = generate_axis_dataset(axis, 1000, {}, seed);
  x = data.inputs();
  y = data.targets();
  auto net = init_network(parse_arch("[1,5,1]", 10, 3), seed);
  fit_normalization(net, x, y);
  fit_network(net, x, y, FitConfig::lbfgs(300));
  return net;
}

bool masks_monotone(const KanNetworkd& before, const KanNetworkd& after) {
  for (std::size_t l = 0; l < before.layers.size(); ++l)
    if (((after.layers[l].edge_mask - before.layers[l].edge_mask).array() > 0).any()) return false;
  for (std::size_t l = 0; l < before.node_masks.size(); ++l)
    if (((after.node_masks[l] - before.node_masks[l]).array() > 0).any()) return false;
  return true;
}

bool same_masks(const KanNetworkd& a, const KanNetworkd& b) {
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].edge_mask != b.layers[l].edge_mask) return false;
  for (std::size_t l = 0; l < a.node_masks.size(); ++l)
    if (a.node_masks[l] != b.node_masks[l]) return false;
  return true;
}

const Eigen::MatrixXd kGrid = Eigen::VectorXd::LinSpaced(200, -1.0, 1.0);

}  // namespace

TEST_CASE("scores match the propagation rule") {
  for (const char* text : {"[1,3,1]", "[2,[2,1],1]", "[1,[2,2],2,1]"}) {
    auto net = init_network(parse_arch(text, 5, 3), 4);
    Eigen::MatrixXd v = Eigen::MatrixXd::Random(100, net.inputs());
    const auto got = attribution_scores(net, v), want = oracle_scores(net, v);
    for (std::size_t l = 0; l < want.edge_scores.size(); ++l)
      CHECK((got.edge_scores[l] - want.edge_scores[l]).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t l = 0; l < want.node_scores.size(); ++l)
      CHECK((got.node_scores[l] - want.node_scores[l]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("hidden node with zero outgoing edges scores zero") {
  auto net = init_network(parse_arch("[1,5,1]", 5, 3), 1);
  net.layers[1].coeffs[3].setZero();
  net.layers[1].base_weight(0, 3) = 0.0;
  const auto s = attribution_scores(net, kGrid);
  CHECK(s.node_scores[1][3] == 0.0);
  CHECK(s.edge_scores[0](3, 0) == 0.0);
  CHECK(s.node_scores[1].maxCoeff() > 0);
}

TEST_CASE("identical parallel edges score equally") {
  auto net = init_network(parse_arch("[1,2,1]", 5, 3), 1);
  net.layers[0].coeffs[0].row(1) = net.layers[0].coeffs[0].row(0);
  net.layers[0].base_weight(1, 0) = net.layers[0].base_weight(0, 0);
  net.layers[1].coeffs[1] = net.layers[1].coeffs[0];
  net.layers[1].base_weight(0, 1) = net.layers[1].base_weight(0, 0);
  const auto s = attribution_scores(net, kGrid);
  CHECK(s.edge_scores[0](0, 0) == doctest::Approx(s.edge_scores[0](1, 0)).epsilon(1e-14));
  CHECK(s.edge_scores[1](0, 0) == doctest::Approx(s.edge_scores[1](0, 1)).epsilon(1e-14));
  CHECK(s.edge_scores[1](0, 0) == doctest::Approx(0.5));
}

TEST_CASE("product node hands its full score to both children") {
  // graph: input -> (f, g) -> product -> output
  const auto net = init_network(parse_arch("[1,[0,1],1]", 5, 3), 2);
  const auto s = attribution_scores(net, kGrid);
  CHECK(s.node_scores[2][0] == 1.0);
  CHECK(s.edge_scores[1](0, 0) == doctest::Approx(1.0));
  CHECK(s.node_scores[1][0] == doctest::Approx(1.0));
  CHECK(s.edge_scores[0](0, 0) == doctest::Approx(1.0));
  CHECK(s.edge_scores[0](1, 0) == doctest::Approx(1.0));
  CHECK(s.node_scores[0][0] == doctest::Approx(2.0));
}

TEST_CASE("score conservation and masked elements") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    auto net = init_network(parse_arch("[2,[3,1],2,1]", 4, 3), t);
    net.layers[1].edge_mask(1, 2) = 0.0;
    net.node_masks[1][1] = 0.0;
    Eigen::MatrixXd v = Eigen::MatrixXd::Random(80, 2);
    const auto s = attribution_scores(net, v);
    for (const auto& e : s.edge_scores) CHECK(e.minCoeff() >= 0.0);
    CHECK(s.edge_scores[1](1, 2) == 0.0);
    CHECK(s.node_scores[1][1] == 0.0);
    // additive nodes of layer 2: incoming scores sum to the node score
    for (int k = 0; k < 2; ++k) CHECK(s.edge_scores[1].row(k).sum() == doctest::Approx(s.node_scores[2][k]).epsilon(1e-12));
    CHECK(s.node_scores[3][0] == 1.0);
  }
  const auto net = init_network(parse_arch("[1,2,1]", 4, 3), 1);
  CHECK_THROWS_AS(attribution_scores(net, Eigen::MatrixXd(0, 1)), std::invalid_argument);
}

TEST_CASE("normalized scores peak at one per layer") {
  const auto net = init_network(parse_arch("[1,4,1]", 4, 3), 5);
  const auto n = normalized(attribution_scores(net, kGrid));
  CHECK(n.edge_scores[0].maxCoeff() == doctest::Approx(1.0));
  CHECK(n.node_scores[1].maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("zero thresholds leave the network unchanged") {
  const auto net = init_network(parse_arch("[2,[3,1],1]", 4, 3), 6);
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(50, 2);
  const auto r = prune(net, attribution_scores(net, v), v, {0.0, 0.0, 0.0});
  CHECK(same_masks(net, r.net));
  CHECK(network_forward(v, r.net) == network_forward(v, net));
  CHECK(r.report.pruned_inputs.empty());
  CHECK(prune_inputs(net, attribution_scores(net, v), 0.0).removed_inputs.empty());
}

TEST_CASE("infinite thresholds over-prune") {
  const auto net = init_network(parse_arch("[1,3,1]", 4, 3), 6);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(prune(net, attribution_scores(net, kGrid), kGrid, {inf, inf, 0.0}), OverPrunedError);
  CHECK_THROWS_AS(prune(net, attribution_scores(net, kGrid), kGrid, {-1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("pruning removes exactly the masked contributions") {
  auto net = init_network(parse_arch("[3,2]", 4, 3), 8);
  net.layers[0].coeffs[2].row(1) *= 1e-4;
  net.layers[0].base_weight(1, 2) *= 1e-4;
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(100, 3);
  const auto r = prune(net, attribution_scores(net, v), v, {0.0, 0.05, 0.0});
  CHECK(masks_monotone(net, r.net));
  REQUIRE_FALSE(r.net.layers[0].edge_active(1, 2));
  const Eigen::MatrixXd before = network_forward(v, net), after = network_forward(v, r.net);
  Eigen::MatrixXd removed = Eigen::MatrixXd::Zero(v.rows(), 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      if (!r.net.layers[0].edge_active(i, j)) removed.col(i) += edge_forward<double>(v.col(j), net.layers[0], i, j);
  CHECK((before - removed - after).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("input pruning") {
  auto net = init_network(parse_arch("[2,3,1]", 4, 3), 9);
  net.layers[0].coeffs[1].setZero();
  net.layers[0].base_weight.col(1).setZero();
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(60, 2);
  const auto r = prune_inputs(net, attribution_scores(net, v), 1e-2);
  REQUIRE(r.removed_inputs == std::vector<int>{1});
  CHECK(r.net.node_masks[0][1] == 0.0);
  CHECK(r.net.layers[0].edge_mask.col(1).isZero());
  CHECK(r.net.layers[0].edge_mask.col(0).isOnes());
  CHECK_THROWS_AS(prune_inputs(net, attribution_scores(net, v), -1.0), std::invalid_argument);
}

TEST_CASE("fitted univariate nets: input kept, monotone masks, refit recovers R2") {
  for (int axis : {1, 2}) {
    Eigen::MatrixXd x, y;
    const auto net = fitted_151(axis, 0, x, y);
    const double r2_before = r_squared(y.col(0), network_forward(x, net).col(0));
    const auto scores = attribution_scores(net, x);
    CHECK(prune_inputs(net, scores, PruneConfig{}.input_threshold).removed_inputs.empty());
    auto r = prune(net, scores, x, PruneConfig{});
    CHECK(masks_monotone(net, r.net));
    fit_network(r.net, x, y, FitConfig::lbfgs(50));
    CHECK(masks_monotone(net, r.net));
    const double r2_after = r_squared(y.col(0), network_forward(x, r.net).col(0));
    INFO("axis " << axis << " before " << r2_before << " after " << r2_after);
    CHECK(r2_after >= r2_before - 0.01);
  }
}

TEST_CASE("prune report JSON") {
  const auto net = init_network(parse_arch("[1,3,1]", 4, 3), 6);
  const auto r = prune(net, attribution_scores(net, kGrid), kGrid, PruneConfig{});
  const auto doc = nlohmann::json::parse(r.report.to_json());
  CHECK(doc["node_threshold"] == 1e-2);
  CHECK(doc["edge_threshold"] == 3e-2);
  CHECK(doc["surviving_nodes"].size() == 3);
  CHECK(doc["surviving_edges"].size() == 2);
  CHECK(doc["pruned_inputs"].empty());
}
