#include "kanfric/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "kanfric/errors.hpp"
#include "kanfric/gradients.hpp"
#include "kanfric/metrics.hpp"

namespace kanfric {

void FunctionLibrary::add(LibraryFunction fn) {
  if (fn.name.empty()) throw std::invalid_argument("FunctionLibrary: empty name");
  if (contains(fn.name)) throw std::invalid_argument("FunctionLibrary: duplicate entry '" + fn.name + "'");
  if (!fn.f || !fn.df || !fn.build) throw std::invalid_argument("FunctionLibrary: incomplete entry '" + fn.name + "'");
  entries_.push_back(std::move(fn));
}

bool FunctionLibrary::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
}

const LibraryFunction& FunctionLibrary::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw std::invalid_argument("FunctionLibrary: no entry '" + name + "'");
}

namespace {

ExprPtr pow_of(ExprPtr u, int k) { return expr::power(std::move(u), expr::number(k)); }

LibraryFunction entry(std::string name, int complexity, double (*f)(double), double (*df)(double),
                      std::function<ExprPtr(ExprPtr)> build) {
  return {std::move(name), complexity, f, df, std::move(build)};
}

LibraryFunction call_entry(std::string name, const std::string& fn, int complexity, double (*f)(double),
                           double (*df)(double)) {
  return entry(std::move(name), complexity, f, df, [fn](ExprPtr u) { return expr::call(fn, std::move(u)); });
}

}  // namespace

FunctionLibrary default_library() {
  FunctionLibrary lib;
  lib.add(entry("x", 1, [](double x) { return x; }, [](double) { return 1.0; }, [](ExprPtr u) { return u; }));
  lib.add(entry("x^2", 2, [](double x) { return x * x; }, [](double x) { return 2 * x; },
                [](ExprPtr u) { return pow_of(u, 2); }));
  lib.add(entry("x^3", 3, [](double x) { return x * x * x; }, [](double x) { return 3 * x * x; },
                [](ExprPtr u) { return pow_of(u, 3); }));
  lib.add(entry("x^4", 3, [](double x) { return std::pow(x, 4); }, [](double x) { return 4 * x * x * x; },
                [](ExprPtr u) { return pow_of(u, 4); }));
  lib.add(entry("x^5", 3, [](double x) { return std::pow(x, 5); }, [](double x) { return 5 * std::pow(x, 4); },
                [](ExprPtr u) { return pow_of(u, 5); }));
  lib.add(entry("1/x", 2, [](double x) { return 1 / x; }, [](double x) { return -1 / (x * x); },
                [](ExprPtr u) { return expr::divide(expr::number(1), u); }));
  lib.add(entry("1/x^2", 3, [](double x) { return 1 / (x * x); }, [](double x) { return -2 / (x * x * x); },
                [](ExprPtr u) { return expr::divide(expr::number(1), pow_of(u, 2)); }));
  lib.add(entry("1/x^5", 4, [](double x) { return 1 / std::pow(x, 5); }, [](double x) { return -5 / std::pow(x, 6); },
                [](ExprPtr u) { return expr::divide(expr::number(1), pow_of(u, 5)); }));
  lib.add(call_entry("sqrt", "sqrt", 2, [](double x) { return std::sqrt(x); },
                     [](double x) { return 0.5 / std::sqrt(x); }));
  lib.add(call_entry("log", "log", 2, [](double x) { return std::log(x); }, [](double x) { return 1 / x; }));
  lib.add(call_entry("exp", "exp", 2, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }));
  lib.add(entry("gaussian", 3, [](double x) { return std::exp(-x * x); },
                [](double x) { return -2 * x * std::exp(-x * x); },
                [](ExprPtr u) { return expr::call("exp", expr::negate(pow_of(u, 2))); }));
  lib.add(call_entry("sin", "sin", 2, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); }));
  lib.add(call_entry("cos", "cos", 2, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); }));
  lib.add(call_entry("tan", "tan", 3, [](double x) { return std::tan(x); },
                     [](double x) { return 1 / (std::cos(x) * std::cos(x)); }));
  lib.add(call_entry("tanh", "tanh", 3, [](double x) { return std::tanh(x); },
                     [](double x) { return 1 - std::tanh(x) * std::tanh(x); }));
  lib.add(call_entry("arctan", "atan", 4, [](double x) { return std::atan(x); },
                     [](double x) { return 1 / (1 + x * x); }));
  lib.add(call_entry("abs", "abs", 3, [](double x) { return std::abs(x); },
                     [](double x) { return x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0; }));
  return lib;
}

FunctionLibrary library_subset(const FunctionLibrary& lib, const std::vector<std::string>& names) {
  FunctionLibrary out;
  for (const auto& n : names) out.add(lib.at(n));
  return out;
}

// ---------------------------------------------------------------------------
// Edge fitting

namespace {

struct AffineFit {
  double a, b, c, d, sse;
};

double sse_of(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LibraryFunction& fn, double a, double b,
              double c, double d) {
  double sse = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double r = c * fn.f(a * x[k] + b) + d - y[k];
    sse += r * r;
  }
  return sse;
}

// Mean-squared objective over (a, b, c, d).
double refine_objective(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LibraryFunction& fn,
                        const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
  grad = Eigen::VectorXd::Zero(4);
  const double n = static_cast<double>(x.size());
  double loss = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double u = p[0] * x[k] + p[1];
    const double fu = fn.f(u);
    const double r = p[2] * fu + p[3] - y[k];
    loss += r * r;
    const double g = 2 * r / n;
    const double cf = p[2] * fn.df(u);
    grad[0] += g * cf * x[k];
    grad[1] += g * cf;
    grad[2] += g * fu;
    grad[3] += g;
  }
  return loss / n;
}

}  // namespace

SymbolicEdge fit_edge(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LibraryFunction& fn,
                      const FitEdgeOptions& options) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_edge: x and y lengths differ");
  if (x.size() < 8) throw std::invalid_argument("fit_edge: need at least 8 samples");
  if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("fit_edge: non-finite samples");
  const double xmin = x.minCoeff(), xmax = x.maxCoeff();
  if (!(xmax > xmin)) throw std::invalid_argument("fit_edge: constant x samples");
  if (options.a_points < 1 || options.b_points < 1 || !(options.a_min > 0) || !(options.a_max >= options.a_min))
    throw std::invalid_argument("fit_edge: bad grid options");

  SymbolicEdge out;
  out.function = fn.name;
  out.complexity = fn.complexity;
  const double ymean = y.mean();
  const double ss_tot = (y.array() - ymean).square().sum();
  if (y.maxCoeff() == y.minCoeff()) {
    out.d = y[0];
    out.r2 = 0.0;
    return out;
  }

  // grid rows: evenly spaced ranks of x
  Eigen::VectorXd xs = x, ys = y;
  if (x.size() > options.grid_samples) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.size()));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    std::sort(order.begin(), order.end(), [&](auto p, auto q) { return x[p] < x[q]; });
    const int m = options.grid_samples;
    xs.resize(m);
    ys.resize(m);
    for (int k = 0; k < m; ++k) {
      const auto idx = order[static_cast<std::size_t>(std::llround(double(k) * (x.size() - 1) / (m - 1)))];
      xs[k] = x[idx];
      ys[k] = y[idx];
    }
  }
  const double ys_mean = ys.mean();
  const Eigen::VectorXd yc = ys.array() - ys_mean;
  const double ys_tot = yc.squaredNorm();

  const double width = xmax - xmin;
  const double lo = xmin - 0.5 * width, hi = xmax + 0.5 * width;
  AffineFit best{1.0, 0.0, 0.0, ymean, std::numeric_limits<double>::infinity()};
  Eigen::VectorXd fu(xs.size());
  for (int sign : {1, -1}) {
    for (int ka = 0; ka < options.a_points; ++ka) {
      const double t = options.a_points == 1 ? 0.0 : double(ka) / (options.a_points - 1);
      const double a = sign * options.a_min * std::pow(options.a_max / options.a_min, t);
      for (int kb = 0; kb < options.b_points; ++kb) {
        const double x0 = options.b_points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * kb / (options.b_points - 1);
        const double b = -a * x0;
        bool ok = true;
        for (Eigen::Index k = 0; k < xs.size() && ok; ++k) {
          fu[k] = fn.f(a * xs[k] + b);
          ok = std::isfinite(fu[k]) && std::abs(fu[k]) < 1e15;
        }
        if (!ok) continue;
        const double fmean = fu.mean();
        const double var_f = (fu.array() - fmean).square().sum();
        if (!(var_f > 1e-300)) continue;
        const double cov = (fu.array() - fmean).matrix().dot(yc);
        const double sse = std::max(0.0, ys_tot - cov * cov / var_f);
        if (sse < best.sse) {
          const double c = cov / var_f;
          best = {a, b, c, ys_mean - c * fmean, sse};
        }
      }
    }
  }

  double best_full = sse_of(x, y, fn, best.a, best.b, best.c, best.d);
  if (!std::isfinite(best_full)) {
    best = {1.0, 0.0, 0.0, ymean, ss_tot};
    best_full = ss_tot;
  }
  out.a = best.a;
  out.b = best.b;
  out.c = best.c;
  out.d = best.d;

  if (options.refine_steps > 0 && best.c != 0.0) {
    Eigen::VectorXd p(4);
    p << best.a, best.b, best.c, best.d;
    Objective<double> objective = [&](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
      return refine_objective(x, y, fn, q, g);
    };
    try {
      minimize_lbfgs(objective, p, FitConfig::lbfgs(options.refine_steps));
      const double refined = sse_of(x, y, fn, p[0], p[1], p[2], p[3]);
      if (p.allFinite() && std::isfinite(refined) && refined < best_full) {
        out.a = p[0];
        out.b = p[1];
        out.c = p[2];
        out.d = p[3];
        best_full = refined;
      }
    } catch (const DivergedError&) {
      // keep the grid optimum
    }
  }
  out.r2 = 1.0 - best_full / ss_tot;
  return out;
}

std::vector<SymbolicEdge> rank_candidates(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                          const FunctionLibrary& lib, const FitEdgeOptions& options) {
  std::vector<SymbolicEdge> out;
  for (const auto& fn : lib) out.push_back(fit_edge(x, y, fn, options));
  std::stable_sort(out.begin(), out.end(), [](const SymbolicEdge& p, const SymbolicEdge& q) {
    if (std::abs(p.r2 - q.r2) > 1e-12) return p.r2 > q.r2;
    return p.complexity < q.complexity;
  });
  return out;
}

std::vector<SymbolicEdge> suggest_symbolic(const KanNetworkd& net, int layer, int i, int j,
                                           const FunctionLibrary& lib, const Eigen::MatrixXd& inputs,
                                           const FitEdgeOptions& options) {
  if (layer < 0 || layer >= net.arch.depth()) throw std::invalid_argument("suggest_symbolic: layer out of range");
  const auto& L = net.layers[layer];
  if (i < 0 || i >= L.out_width || j < 0 || j >= L.in_width)
    throw std::invalid_argument("suggest_symbolic: edge index out of range");
  if (!L.edge_active(i, j)) throw std::invalid_argument("suggest_symbolic: edge is inactive");
  const auto cache = network_forward_cached(inputs, net);
  const Eigen::VectorXd xj = cache.nodes[layer].col(j);
  return rank_candidates(xj, edge_forward(xj, L, i, j), lib, options);
}

// ---------------------------------------------------------------------------
// SymbolicModel

SymbolicModel SymbolicModel::from_network(const KanNetworkd& net, std::shared_ptr<const FunctionLibrary> library) {
  net.check_shapes();
  SymbolicModel m;
  m.arch = net.arch;
  m.node_masks = net.node_masks;
  m.input_norm = net.input_norm;
  m.output_norm = net.output_norm;
  m.library = std::move(library);
  for (const auto& L : net.layers) {
    SymbolicLayer sl;
    sl.in_width = L.in_width;
    sl.out_width = L.out_width;
    sl.squash = L.squash;
    sl.edges.resize(static_cast<std::size_t>(L.in_width) * L.out_width);
    for (int i = 0; i < L.out_width; ++i)
      for (int j = 0; j < L.in_width; ++j) {
        if (!L.edge_active(i, j)) continue;
        auto& slot = sl.edge(i, j);
        slot.kind = SymbolicSlot::Kind::spline;
        slot.grid = L.grids[j];
        slot.coeffs = L.coeffs[j].row(i);
        slot.scaler = L.spline_scaler(i, j);
        slot.base_weight = L.base_weight(i, j);
      }
    m.layers.push_back(std::move(sl));
  }
  return m;
}

int SymbolicModel::count(SymbolicSlot::Kind kind) const {
  int n = 0;
  for (const auto& L : layers)
    for (const auto& e : L.edges) n += e.kind == kind;
  return n;
}

std::vector<std::string> SymbolicModel::variable_names() const {
  if (inputs() == 1) return {"v"};
  std::vector<std::string> names;
  for (int j = 0; j < inputs(); ++j) names.push_back("v" + std::to_string(j + 1));
  return names;
}

namespace {

bool is_constant(const SymbolicEdge& e) { return e.function == kConstantEdge; }

// `fn` is the resolved library entry for symbolic slots, null otherwise.
double edge_value(const SymbolicSlot& slot, const LibraryFunction* fn, double x) {
  if (slot.kind == SymbolicSlot::Kind::spline)
    return slot.scaler * basis_all(x, slot.grid).dot(slot.coeffs.transpose()) + slot.base_weight * silu(x);
  const auto& s = slot.symbol;
  return fn ? s.c * fn->f(s.a * x + s.b) + s.d : s.d;
}

struct SymbolicPass {
  std::vector<Eigen::MatrixXd> nodes;  // per node layer
  std::vector<Eigen::MatrixXd> pre;    // per layer, after squash
  Eigen::MatrixXd prediction;
  bool finite = true;
  std::string failure;
};

const LibraryFunction* function_of(const SymbolicModel& m, const SymbolicSlot& slot) {
  if (slot.kind != SymbolicSlot::Kind::symbolic || is_constant(slot.symbol)) return nullptr;
  if (!m.library) throw std::logic_error("SymbolicModel: no function library attached");
  return &m.library->at(slot.symbol.function);
}

SymbolicPass run_forward(const SymbolicModel& m, const Eigen::MatrixXd& v) {
  detail::check_batch(v, m.inputs(), "SymbolicModel::forward");
  SymbolicPass pass;
  const Eigen::Index n = v.rows();
  Eigen::MatrixXd x(n, m.inputs());
  for (int j = 0; j < m.inputs(); ++j)
    x.col(j) = v.col(j).unaryExpr([&](double a) { return m.input_norm[j].apply(a); });
  pass.nodes.push_back(x * m.node_masks[0].asDiagonal());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    const Eigen::MatrixXd& in = pass.nodes.back();
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, L.out_width);
    for (int i = 0; i < L.out_width; ++i)
      for (int j = 0; j < L.in_width; ++j) {
        const auto& slot = L.edge(i, j);
        if (slot.kind == SymbolicSlot::Kind::inactive) continue;
        const LibraryFunction* fn = function_of(m, slot);
        for (Eigen::Index s = 0; s < n; ++s) {
          const double y = edge_value(slot, fn, in(s, j));
          if (!std::isfinite(y) && pass.finite) {
            pass.finite = false;
            pass.failure = "edge (" + std::to_string(l) + "," + std::to_string(i) + "," + std::to_string(j) + ") " +
                           slot.symbol.function + " at x=" + std::to_string(in(s, j));
          }
          z(s, i) += y;
        }
      }
    if (L.squash) z = z.array().tanh().matrix();
    pass.pre.push_back(z);
    pass.nodes.push_back(combine_nodes(z, m.arch.layers[l + 1], m.node_masks[l + 1]));
  }
  pass.prediction = pass.nodes.back();
  for (int o = 0; o < m.outputs(); ++o)
    pass.prediction.col(o) = pass.nodes.back().col(o).unaryExpr([&](double y) { return m.output_norm[o].invert(y); });
  return pass;
}

}  // namespace

Eigen::MatrixXd SymbolicModel::forward(const Eigen::MatrixXd& v) const {
  auto pass = run_forward(*this, v);
  if (!pass.finite) throw DomainError(pass.failure, "non-finite edge output");
  return pass.prediction;
}

std::vector<Eigen::MatrixXd> SymbolicModel::node_values(const Eigen::MatrixXd& v) const {
  auto pass = run_forward(*this, v);
  if (!pass.finite) throw DomainError(pass.failure, "non-finite edge output");
  return pass.nodes;
}

Eigen::VectorXd SymbolicModel::edge_output(int layer, int i, int j, const Eigen::VectorXd& x) const {
  const auto& slot = layers.at(static_cast<std::size_t>(layer)).edge(i, j);
  if (slot.kind == SymbolicSlot::Kind::inactive) return Eigen::VectorXd::Zero(x.size());
  const LibraryFunction* fn = function_of(*this, slot);
  return x.unaryExpr([&](double a) { return edge_value(slot, fn, a); });
}

Eigen::VectorXd SymbolicModel::affine_parameters() const {
  std::vector<double> p;
  for (const auto& L : layers)
    for (const auto& e : L.edges)
      if (e.kind == SymbolicSlot::Kind::symbolic) p.insert(p.end(), {e.symbol.a, e.symbol.b, e.symbol.c, e.symbol.d});
  return Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
}

void SymbolicModel::set_affine_parameters(const Eigen::VectorXd& params) {
  if (params.size() != 4 * count(SymbolicSlot::Kind::symbolic))
    throw std::invalid_argument("SymbolicModel: affine parameter count mismatch");
  Eigen::Index k = 0;
  for (auto& L : layers)
    for (auto& e : L.edges)
      if (e.kind == SymbolicSlot::Kind::symbolic) {
        e.symbol.a = params[k++];
        e.symbol.b = params[k++];
        e.symbol.c = params[k++];
        e.symbol.d = params[k++];
      }
}

double SymbolicModel::loss_and_gradient(const Eigen::MatrixXd& v, const Eigen::MatrixXd& targets,
                                        Eigen::VectorXd& grad) const {
  if (v.rows() == 0) throw std::invalid_argument("SymbolicModel: empty dataset");
  if (targets.rows() != v.rows() || targets.cols() != outputs())
    throw std::invalid_argument("SymbolicModel: target shape mismatch");
  const auto pass = run_forward(*this, v);
  grad = Eigen::VectorXd::Zero(4 * count(SymbolicSlot::Kind::symbolic));
  if (!pass.finite) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd residual = pass.prediction - targets;
  const double total = static_cast<double>(residual.size());
  const double loss = residual.squaredNorm() / total;

  // parameter offsets of symbolic slots, per layer
  std::vector<std::vector<Eigen::Index>> offset(layers.size());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < layers.size(); ++l)
    for (const auto& e : layers[l].edges) {
      offset[l].push_back(e.kind == SymbolicSlot::Kind::symbolic ? k : -1);
      if (e.kind == SymbolicSlot::Kind::symbolic) k += 4;
    }

  Eigen::MatrixXd d_nodes = residual * (2.0 / total);
  for (int o = 0; o < outputs(); ++o) d_nodes.col(o) /= output_norm[o].scale;
  const Eigen::Index n = v.rows();
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto& L = layers[l];
    Eigen::MatrixXd dz = detail::split_nodes_backward(d_nodes, pass.pre[l], arch.layers[l + 1], node_masks[l + 1]);
    if (L.squash) dz.array() *= 1.0 - pass.pre[l].array().square();
    const Eigen::MatrixXd& in = pass.nodes[l];
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, L.in_width);
    for (int i = 0; i < L.out_width; ++i)
      for (int j = 0; j < L.in_width; ++j) {
        const auto& slot = L.edge(i, j);
        if (slot.kind == SymbolicSlot::Kind::inactive) continue;
        if (slot.kind == SymbolicSlot::Kind::spline) {
          if (l == 0) continue;
          for (Eigen::Index s = 0; s < n; ++s) {
            const double xv = in(s, j);
            const double dphi = basis_all_derivative(xv, slot.grid).dot(slot.coeffs.transpose());
            dx(s, j) += dz(s, i) * (slot.scaler * dphi + slot.base_weight * silu_derivative(xv));
          }
          continue;
        }
        const Eigen::Index p = offset[l][static_cast<std::size_t>(i) * L.in_width + j];
        const auto& sym = slot.symbol;
        if (is_constant(sym)) {
          grad[p + 3] += dz.col(i).sum();
          continue;
        }
        const auto& fn = library->at(sym.function);
        for (Eigen::Index s = 0; s < n; ++s) {
          const double xv = in(s, j), u = sym.a * xv + sym.b, g = dz(s, i);
          const double cf = sym.c * fn.df(u);
          grad[p] += g * cf * xv;
          grad[p + 1] += g * cf;
          grad[p + 2] += g * fn.f(u);
          grad[p + 3] += g;
          dx(s, j) += g * cf * sym.a;
        }
      }
    d_nodes = dx;
  }
  return loss;
}

namespace {

// Sum of weighted terms plus a constant, kept apart so output scaling can be
// folded into the weights.
struct LinearCombo {
  std::vector<std::pair<double, ExprPtr>> terms;
  double constant = 0.0;

  ExprPtr to_expr() const {
    ExprPtr out;
    for (const auto& [w, e] : terms) {
      if (w == 0.0) continue;
      ExprPtr t = w == 1.0 ? e : expr::multiply(expr::number(w), e);
      out = out ? expr::add(out, t) : t;
    }
    if (!out) return expr::number(constant);
    return constant == 0.0 ? out : expr::add(out, expr::number(constant));
  }
};

// Node value as an expression; input nodes also keep their affine form so
// first-layer arguments fold to a' * v + b'.
struct NodeExpr {
  ExprPtr e;
  bool affine = false;
  double scale = 0.0, offset = 0.0;
  std::string var;
};

ExprPtr argument(const NodeExpr& node, double a, double b) {
  if (node.affine) {
    const double a2 = a * node.scale, b2 = a * node.offset + b;
    if (a2 == 0.0) return expr::number(b2);
    ExprPtr ax = a2 == 1.0 ? expr::variable(node.var) : expr::multiply(expr::number(a2), expr::variable(node.var));
    return b2 == 0.0 ? ax : expr::add(ax, expr::number(b2));
  }
  ExprPtr ax = a == 1.0 ? node.e : expr::multiply(expr::number(a), node.e);
  return b == 0.0 ? ax : expr::add(ax, expr::number(b));
}

}  // namespace

std::vector<ExprPtr> SymbolicModel::to_expressions() const {
  const auto names = variable_names();
  std::vector<NodeExpr> nodes;
  for (int j = 0; j < inputs(); ++j) {
    NodeExpr ne;
    const double mask = node_masks[0][j];
    ne.affine = true;
    ne.scale = mask * input_norm[j].scale;
    ne.offset = mask * input_norm[j].offset;
    ne.var = names[j];
    ne.e = argument(ne, 1.0, 0.0);
    nodes.push_back(ne);
  }
  std::vector<LinearCombo> combos;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    combos.assign(L.out_width, {});
    for (int i = 0; i < L.out_width; ++i)
      for (int j = 0; j < L.in_width; ++j) {
        const auto& slot = L.edge(i, j);
        auto& combo = combos[i];
        if (slot.kind == SymbolicSlot::Kind::inactive) continue;
        if (slot.kind == SymbolicSlot::Kind::spline) {
          const std::string fname = "spline_" + std::to_string(l) + "_" + std::to_string(i) + "_" + std::to_string(j);
          combo.terms.emplace_back(1.0, expr::call(fname, nodes[j].e));
          continue;
        }
        const auto& s = slot.symbol;
        if (is_constant(s) || s.c == 0.0) {
          combo.constant += s.d;
          continue;
        }
        const ExprPtr arg = argument(nodes[j], s.a, s.b);
        if (arg->kind == Expr::Kind::number) {
          combo.constant += s.c * library->at(s.function).f(arg->value) + s.d;
          continue;
        }
        combo.terms.emplace_back(s.c, library->at(s.function).build(arg));
        combo.constant += s.d;
      }
    const NodeSpec& spec = arch.layers[l + 1];
    const bool last = l + 1 == layers.size();
    std::vector<NodeExpr> next(static_cast<std::size_t>(spec.nodes()));
    for (int k = 0; k < spec.nodes(); ++k) {
      const double mask = node_masks[l + 1][k];
      ExprPtr value;
      if (mask == 0.0) {
        value = expr::number(0.0);
      } else if (k < spec.additive) {
        if (last && !L.squash) {
          // fold the output normalization into the combination
          LinearCombo c = combos[k];
          const auto& norm = output_norm[k];
          for (auto& t : c.terms) t.first *= mask / norm.scale;
          c.constant = (mask * c.constant - norm.offset) / norm.scale;
          next[k].e = c.to_expr();
          continue;
        }
        value = L.squash ? expr::call("tanh", combos[k].to_expr()) : combos[k].to_expr();
      } else {
        const int a = spec.additive + 2 * (k - spec.additive);
        auto pre = [&](int idx) { return L.squash ? expr::call("tanh", combos[idx].to_expr()) : combos[idx].to_expr(); };
        value = expr::multiply(pre(a), pre(a + 1));
      }
      if (mask != 0.0 && mask != 1.0) value = expr::multiply(expr::number(mask), value);
      if (last) {
        const auto& norm = output_norm[k];
        value = expr::divide(expr::subtract(value, expr::number(norm.offset)), expr::number(norm.scale));
      }
      next[k].e = value;
    }
    nodes = std::move(next);
  }
  std::vector<ExprPtr> out;
  for (const auto& ne : nodes) out.push_back(ne.e);
  return out;
}

std::string SymbolicModel::render() const {
  std::string out;
  for (const auto& e : to_expressions()) {
    if (!out.empty()) out += "\n";
    out += kanfric::render(e);
  }
  return out;
}

double eval_symbolic(const SymbolicModel& model, double v) {
  if (model.inputs() != 1 || model.outputs() != 1)
    throw std::invalid_argument("eval_symbolic: needs a single-input, single-output model");
  if (!std::isfinite(v)) throw std::invalid_argument("eval_symbolic: non-finite input");
  return model.forward(Eigen::MatrixXd::Constant(1, 1, v))(0, 0);
}

std::string render(const SymbolicModel& model) { return model.render(); }

// ---------------------------------------------------------------------------
// symbolify

SymbolifyResult symbolify(const SymbolicModel& start, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          const SymbolifyOptions& options) {
  if (!start.library) throw std::invalid_argument("symbolify: model has no function library");
  if (inputs.rows() == 0) throw std::invalid_argument("symbolify: empty dataset");
  if (targets.rows() != inputs.rows() || targets.cols() != start.outputs())
    throw std::invalid_argument("symbolify: target shape mismatch");

  SymbolifyResult result;
  result.model = start;
  auto& model = result.model;
  const Eigen::MatrixXd reference = start.forward(inputs);
  const auto nodes = start.node_values(inputs);
  bool changed = false;

  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& L = model.layers[l];
    for (int i = 0; i < L.out_width; ++i)
      for (int j = 0; j < L.in_width; ++j) {
        auto& slot = L.edge(i, j);
        if (slot.kind != SymbolicSlot::Kind::spline) continue;
        const Eigen::VectorXd x = nodes[l].col(j);
        const Eigen::VectorXd y = start.edge_output(static_cast<int>(l), i, j, x);
        EdgeDecision decision{static_cast<int>(l), i, j, false, {}, {}};
        const double spread = std::sqrt((y.array() - y.mean()).square().mean());
        if (x.maxCoeff() == x.minCoeff() || spread <= 1e-12 * std::max(1.0, std::abs(y.mean()))) {
          decision.accepted = true;
          decision.chosen.function = kConstantEdge;
          decision.chosen.d = y.mean();
          decision.chosen.r2 = 1.0;
        } else {
          auto candidates = rank_candidates(x, y, *model.library, options.fit);
          decision.chosen = candidates.front();
          decision.accepted = decision.chosen.r2 >= options.accept_threshold;
          for (std::size_t k = 1; k < candidates.size() && static_cast<int>(k) <= options.report_candidates; ++k)
            decision.runners_up.push_back(candidates[k]);
        }
        if (decision.accepted) {
          slot.kind = SymbolicSlot::Kind::symbolic;
          slot.symbol = decision.chosen;
          changed = true;
        }
        result.decisions.push_back(std::move(decision));
      }
  }

  if (changed && options.refit_steps > 0 && model.count(SymbolicSlot::Kind::symbolic) > 0) {
    Eigen::VectorXd params = model.affine_parameters();
    SymbolicModel scratch = model;
    Objective<double> objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
      scratch.set_affine_parameters(p);
      return scratch.loss_and_gradient(inputs, targets, g);
    };
    try {
      result.refit = minimize_lbfgs(objective, params, FitConfig::lbfgs(options.refit_steps));
      model.set_affine_parameters(params);
    } catch (const DivergedError& e) {
      result.refit = e.trace();
      result.refit.stop_reason = "refit skipped: non-finite start";
    }
  } else {
    result.refit.stop_reason = changed ? "refit disabled" : "no edges replaced";
  }
  result.expression = model.render();
  result.agreement_r2 = r_squared(reference, model.forward(inputs));
  return result;
}

SymbolifyResult symbolify(const KanNetworkd& net, const FunctionLibrary& lib, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, const SymbolifyOptions& options) {
  auto model = SymbolicModel::from_network(net, std::make_shared<const FunctionLibrary>(lib));
  return symbolify(model, inputs, targets, options);
}

}  // namespace kanfric
