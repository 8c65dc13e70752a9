#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kanfric/errors.hpp"
#include "kanfric/expression.hpp"
#include "kanfric/friction.hpp"
#include "kanfric/metrics.hpp"
#include "kanfric/pruning.hpp"
#include "kanfric/symbolic.hpp"
#include "kanfric/training.hpp"

using namespace kanfric;

namespace {

const FunctionLibrary& lib() {
  static const FunctionLibrary l = default_library();
  return l;
}

Eigen::VectorXd grid(int n, double lo, double hi) { return Eigen::VectorXd::LinSpaced(n, lo, hi); }

SymbolicEdge symbol(const std::string& f, double a, double b, double c, double d) {
  SymbolicEdge e;
  e.function = f;
  e.a = a, e.b = b, e.c = c, e.d = d;
  e.r2 = 1.0;
  e.complexity = lib().at(f).complexity;
  return e;
}

void make_symbolic(SymbolicModel& m, int l, int i, int j, const SymbolicEdge& e) {
  auto& slot = m.layers[l].edge(i, j);
  slot.kind = SymbolicSlot::Kind::symbolic;
  slot.symbol = e;
}

// [1,[0,1],1]: v -> (tanh-squashed f, g) -> product -> h -> output
SymbolicModel product_model() {
  auto net = init_network(parse_arch("[1,[0,1],1]", 5, 3), 1);
  auto m = SymbolicModel::from_network(net, std::make_shared<const FunctionLibrary>(lib()));
  make_symbolic(m, 0, 0, 0, symbol("sin", 1.3, 0.2, 0.9, 0.1));
  make_symbolic(m, 0, 1, 0, symbol("exp", -0.7, 0.1, 0.5, -0.2));
  make_symbolic(m, 1, 0, 0, symbol("x^2", 1.1, -0.3, 2.0, 0.4));
  m.input_norm[0] = {1.5, 0.25};
  m.output_norm[0] = {0.1, -0.5};
  return m;
}

double product_model_by_hand(double v) {
  const double x = 1.5 * v + 0.25;
  const double f = std::tanh(0.9 * std::sin(1.3 * x + 0.2) + 0.1);
  const double g = std::tanh(0.5 * std::exp(-0.7 * x + 0.1) - 0.2);
  const double u = 1.1 * (f * g) - 0.3;
  return (2.0 * u * u + 0.4 - (-0.5)) / 0.1;
}

}  // namespace

TEST_CASE("default library vocabulary") {
  for (const char* name : {"x", "x^2", "x^3", "x^4", "x^5", "1/x", "1/x^2", "1/x^5", "sqrt", "log", "exp", "gaussian",
                           "sin", "cos", "tan", "tanh", "arctan", "abs"})
    CHECK(lib().contains(name));
  CHECK(lib().size() == 18);
  CHECK_FALSE(lib().contains("sinh"));
  CHECK_THROWS_AS(lib().at("sinh"), std::invalid_argument);
  for (const auto& f : lib()) {
    CHECK(f.complexity >= 1);
    CHECK(std::isfinite(f.f(0.5)));
    CHECK(f.df(0.5) == doctest::Approx((f.f(0.5 + 1e-6) - f.f(0.5 - 1e-6)) / 2e-6).epsilon(1e-6));
    CHECK(evaluate(f.build(expr::variable("v")), 0.5) == doctest::Approx(f.f(0.5)).epsilon(1e-15));
  }
  CHECK(render(lib().at("gaussian").build(expr::variable("v"))).find("exp") != std::string::npos);
}

TEST_CASE("library rejects duplicates and incomplete entries") {
  FunctionLibrary l = default_library();
  CHECK_THROWS_AS(l.add(l.at("sin")), std::invalid_argument);
  CHECK_THROWS_AS(l.add(LibraryFunction{"", 1, l.at("sin").f, l.at("sin").df, l.at("sin").build}), std::invalid_argument);
  CHECK_THROWS_AS(l.add(LibraryFunction{"mine", 1, {}, {}, {}}), std::invalid_argument);
  const auto sub = library_subset(l, {"x", "tanh"});
  CHECK(sub.size() == 2);
  CHECK_THROWS_AS(library_subset(l, {"nope"}), std::invalid_argument);
}

TEST_CASE("identity recovers an affine target exactly") {
  const Eigen::VectorXd x = grid(100, -1, 1);
  const auto e = fit_edge(x, (2 * x.array() + 1).matrix(), lib().at("x"));
  CHECK(e.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.c * e.a == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(e.c * e.b + e.d == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sin self-recovery") {
  const Eigen::VectorXd x = grid(300, -1, 1);
  const Eigen::VectorXd y = (3 * (2 * x.array() - 1).sin() + 0.5).matrix();
  const auto e = fit_edge(x, y, lib().at("sin"));
  CHECK(e.r2 >= 1 - 1e-6);
}

TEST_CASE("tanh recovers the smoothing factor") {
  const Eigen::VectorXd x = grid(400, -1, 1);
  const Eigen::VectorXd y = (50 * x.array()).tanh().matrix();
  const auto e = fit_edge(x, y, lib().at("tanh"));
  CHECK(std::abs(std::abs(e.a) - 50) <= 5);
  CHECK(e.r2 >= 0.999);
}

TEST_CASE("constant target has R2 zero") {
  const Eigen::VectorXd x = grid(50, -1, 1);
  for (const char* f : {"x", "sin", "exp"}) {
    const auto e = fit_edge(x, Eigen::VectorXd::Constant(50, 4.2), lib().at(f));
    CHECK(e.r2 == 0.0);
    CHECK(std::abs(e.c) <= 1e-12);
    CHECK(e.d == doctest::Approx(4.2));
  }
}

TEST_CASE("fit_edge rejects degenerate samples") {
  CHECK_THROWS_AS(fit_edge(grid(5, -1, 1), grid(5, 0, 1), lib().at("x")), std::invalid_argument);
  CHECK_THROWS_AS(fit_edge(Eigen::VectorXd::Ones(20), grid(20, 0, 1), lib().at("x")), std::invalid_argument);
  Eigen::VectorXd bad = grid(20, 0, 1);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(fit_edge(grid(20, -1, 1), bad, lib().at("x")), std::invalid_argument);
}

TEST_CASE("every candidate beats the identity fit when identity is available") {
  const Eigen::VectorXd x = grid(200, -1, 1);
  const Eigen::VectorXd y = ((0.3 - 1.7 * x.array()).exp() + 0.1 * x.array()).matrix();
  const auto identity = fit_edge(x, y, lib().at("x"));
  const auto ranked = rank_candidates(x, y, lib());
  REQUIRE(!ranked.empty());
  CHECK(ranked.front().r2 >= identity.r2);
  for (std::size_t k = 1; k < ranked.size(); ++k) {
    CHECK(ranked[k].r2 <= ranked[k - 1].r2 + 1e-12);
    CHECK(ranked[k].r2 <= 1.0);
  }
  // any family containing an affine image of x can do at least as well
  for (const char* f : {"x^2", "exp", "x^3"}) CHECK(fit_edge(x, y, lib().at(f)).r2 >= identity.r2 - 1e-9);
}

TEST_CASE("suggest_symbolic on an edge trained on exp(-|x|)") {
  const Eigen::MatrixXd x = grid(400, -1, 1);
  const Eigen::MatrixXd y = (-x.array().abs()).exp().matrix();
  auto net = init_network(parse_arch("[1,1]", 10, 3), 2);
  fit_normalization(net, x, y);
  fit_network(net, x, y, FitConfig::lbfgs(200));
  const auto ranked = suggest_symbolic(net, 0, 0, 0, lib(), x);
  REQUIRE(ranked.size() >= 2);
  const bool hit = ranked[0].function == "gaussian" || ranked[0].function == "exp" || ranked[1].function == "gaussian" ||
                   ranked[1].function == "exp";
  INFO("top two: " << ranked[0].function << " " << ranked[1].function);
  CHECK(hit);
  for (const auto& c : ranked) CHECK(c.r2 <= 1.0);
  const auto again = suggest_symbolic(net, 0, 0, 0, lib(), x);
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    CHECK(again[k].function == ranked[k].function);
    CHECK(again[k].r2 == ranked[k].r2);
  }
  auto masked = net;
  masked.layers[0].edge_mask(0, 0) = 0.0;
  CHECK_THROWS_AS(suggest_symbolic(masked, 0, 0, 0, lib(), x), std::invalid_argument);
}

TEST_CASE("expression render, parse and evaluate round trip") {
  const auto v = expr::variable("v");
  const ExprPtr e = expr::add(expr::multiply(expr::number(2.5), expr::call("tanh", expr::subtract(expr::multiply(expr::number(9.4543), v), expr::number(1.1825)))),
                              expr::multiply(expr::number(-0.75), expr::call("exp", expr::negate(expr::power(expr::subtract(expr::number(0.0783), v), expr::number(2))))));
  const std::string text = render(e);
  const auto back = parse_expression(text);
  CHECK(render(back) == text);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int s = 0; s < 100; ++s) {
    const double x = u(rng);
    CHECK(evaluate(back, x) == evaluate(e, x));
    CHECK(evaluate(e, x) == doctest::Approx(2.5 * std::tanh(9.4543 * x - 1.1825) - 0.75 * std::exp(-std::pow(0.0783 - x, 2))).epsilon(1e-14));
  }
  CHECK(variables_of(e) == std::vector<std::string>{"v"});
  CHECK(render(expr::number(-3.0)) == "(-3)");
  CHECK(evaluate(parse_expression("((-2)**2)"), 0.0) == 4.0);
  CHECK(evaluate(parse_expression("(v1*v2)"), {{"v1", 3.0}, {"v2", 4.0}}) == 12.0);
}

TEST_CASE("expression errors") {
  CHECK_THROWS_AS(parse_expression("(v +"), std::invalid_argument);
  CHECK_THROWS_AS(parse_expression("v v"), std::invalid_argument);
  auto domain = [](const std::string& text, double v, const std::string& sub) {
    try {
      evaluate(parse_expression(text), v);
      FAIL("expected DomainError for " << text);
    } catch (const DomainError& e) {
      CHECK(e.subexpression() == sub);
    }
  };
  domain("(1 + sqrt(v))", -1.0, "sqrt(v)");
  domain("log((v - 1))", 0.5, "log((v - 1))");
  domain("(2/v)", 0.0, "(2/v)");
  domain("(v**0.5)", -4.0, "(v**0.5)");
  domain("spline_0_0_0(v)", 0.3, "spline_0_0_0(v)");
  domain("(w + 1)", 0.3, "w");
  domain("exp(exp(v))", 10.0, "exp(exp(v))");
}

TEST_CASE("symbolic tree equals direct arithmetic and composition") {
  const auto m = product_model();
  CHECK(m.fully_symbolic());
  CHECK(m.count(SymbolicSlot::Kind::symbolic) == 3);
  const auto e = m.to_expressions().front();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst_tree = 0, worst_render = 0;
  for (int s = 0; s < 100; ++s) {
    const double v = u(rng);
    const double by_hand = product_model_by_hand(v);
    const double direct = eval_symbolic(m, v);
    CHECK(direct == doctest::Approx(by_hand).epsilon(1e-12));
    worst_tree = std::max(worst_tree, std::abs(evaluate(e, v) - direct) / std::max(1.0, std::abs(direct)));
    worst_render = std::max(worst_render, std::abs(evaluate(parse_expression(render(m)), v) - evaluate(e, v)));
  }
  CHECK(worst_tree <= 1e-12);
  CHECK(worst_render <= 1e-12);
  const std::string text = render(m);
  CHECK(text.find("sin(") != std::string::npos);
  CHECK(text.find("exp(") != std::string::npos);
  CHECK(text.find('*') != std::string::npos);
  CHECK_THROWS_AS(eval_symbolic(m, std::nan("")), std::invalid_argument);
}

TEST_CASE("spline slots evaluate like the network") {
  auto net = init_network(parse_arch("[2,[2,1],1]", 6, 3), 4);
  net.layers[0].edge_mask(1, 0) = 0.0;
  net.node_masks[1][2] = 0.0;
  net.input_norm[1] = {0.5, 0.1};
  net.output_norm[0] = {0.2, 0.3};
  const auto m = SymbolicModel::from_network(net, std::make_shared<const FunctionLibrary>(lib()));
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(100, 2);
  const Eigen::MatrixXd a = m.forward(v), b = network_forward(v, net);
  CHECK(((a - b).array().abs() / b.array().abs().max(1.0)).maxCoeff() <= 1e-12);
  CHECK(m.layers[0].edge(1, 0).kind == SymbolicSlot::Kind::inactive);
  CHECK(m.variable_names() == std::vector<std::string>{"v1", "v2"});
  CHECK(render(m).find("spline_") != std::string::npos);
  CHECK_FALSE(m.fully_symbolic());
}

TEST_CASE("affine gradient matches finite differences") {
  auto m = product_model();
  const Eigen::MatrixXd v = grid(60, -1, 1);
  const Eigen::MatrixXd t = (v.array() * 3).sin().matrix();
  Eigen::VectorXd g, scratch;
  m.loss_and_gradient(v, t, g);
  const Eigen::VectorXd p = m.affine_parameters();
  REQUIRE(p.size() == 12);
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    Eigen::VectorXd up = p, down = p;
    up[k] += 1e-6;
    down[k] -= 1e-6;
    m.set_affine_parameters(up);
    const double fu = m.loss_and_gradient(v, t, scratch);
    m.set_affine_parameters(down);
    const double fd = m.loss_and_gradient(v, t, scratch);
    const double num = (fu - fd) / 2e-6;
    CHECK(std::abs(g[k] - num) <= 1e-8 + 1e-5 * std::max(std::abs(g[k]), std::abs(num)));
  }
  m.set_affine_parameters(p);
  // out-of-domain parameters give NaN rather than throwing
  auto log_model = product_model();
  make_symbolic(log_model, 1, 0, 0, symbol("log", 1.0, -5.0, 1.0, 0.0));
  CHECK(std::isnan(log_model.loss_and_gradient(v, t, scratch)));
}

TEST_CASE("symbolify on a fitted product network") {
  const auto data = generate_axis_dataset(1, 600, {}, 3);
  auto net = init_network(parse_arch("[1,[5,2],1]", 3, 3), 0);
  fit_normalization(net, data.inputs(), data.targets());
  fit_network(net, data.inputs(), data.targets(), FitConfig::lbfgs(50));
  auto pruned = prune(net, attribution_scores(net, data.inputs()), data.inputs(), PruneConfig{}).net;
  fit_network(pruned, data.inputs(), data.targets(), FitConfig::lbfgs(50));

  const auto result = symbolify(pruned, lib(), data.inputs(), data.targets());
  CHECK(result.agreement_r2 >= 0.9);
  const Eigen::VectorXd pred = result.model.forward(data.inputs()).col(0);
  CHECK(r_squared(data.torque, pred) >= 0.99);
  for (const auto& d : result.decisions) {
    CHECK(pruned.layers[d.layer].edge_active(d.i, d.j));
    CHECK(d.chosen.r2 <= 1.0);
  }
  // masked topology never appears
  for (int l = 0; l < pruned.arch.depth(); ++l)
    for (int i = 0; i < pruned.layers[l].out_width; ++i)
      for (int j = 0; j < pruned.layers[l].in_width; ++j)
        if (!pruned.layers[l].edge_active(i, j)) CHECK(result.model.layers[l].edge(i, j).kind == SymbolicSlot::Kind::inactive);

  if (!result.partial()) {
    const auto e = parse_expression(result.expression);
    for (Eigen::Index s = 0; s < 50; ++s) {
      const double v = data.velocity[s];
      CHECK(evaluate(e, v) == doctest::Approx(pred[s]).epsilon(1e-9));
    }
  }

  const auto again = symbolify(result.model, data.inputs(), data.targets());
  CHECK(again.expression == result.expression);
  CHECK(again.model.affine_parameters() == result.model.affine_parameters());
  CHECK(again.refit.stop_reason == "no edges replaced");
}

TEST_CASE("low threshold versus impossible threshold") {
  const Eigen::MatrixXd x = grid(200, -1, 1);
  const Eigen::MatrixXd y = (2 * x.array()).sin().matrix();
  auto net = init_network(parse_arch("[1,1]", 5, 3), 2);
  fit_normalization(net, x, y);
  fit_network(net, x, y, FitConfig::lbfgs(100));
  SymbolifyOptions strict;
  strict.accept_threshold = 1.5;
  const auto none = symbolify(net, lib(), x, y, strict);
  CHECK(none.partial());
  CHECK_FALSE(none.decisions.front().accepted);
  CHECK(none.model.count(SymbolicSlot::Kind::spline) == 1);
  const auto all = symbolify(net, lib(), x, y);
  CHECK_FALSE(all.partial());
  CHECK(r_squared(y.col(0), Eigen::VectorXd(all.model.forward(x).col(0))) >= 0.999);
}
