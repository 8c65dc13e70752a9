#pragma once

/// @file optimizers.hpp
/// @brief Full-batch Adam and L-BFGS (two-loop recursion, strong Wolfe
/// line search) over flat Eigen parameter vectors.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kanfric/types.hpp"

namespace kanfric {

enum class Algorithm { adam, lbfgs };

struct FitConfig {
  Algorithm algorithm = Algorithm::adam;
  double learning_rate = 0.01;
  int iterations = 30000;
  int lbfgs_history = 10;
  std::uint64_t seed = 0;
  int record_every = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("FitConfig: learning_rate must be > 0");
    if (iterations < 1) throw std::invalid_argument("FitConfig: iterations must be >= 1");
    if (lbfgs_history < 1) throw std::invalid_argument("FitConfig: lbfgs_history must be >= 1");
    if (record_every < 1) throw std::invalid_argument("FitConfig: record_every must be >= 1");
  }

  static FitConfig adam(int iterations = 30000, double lr = 0.01) {
    return {Algorithm::adam, lr, iterations, 10, 0, 1};
  }
  static FitConfig lbfgs(int iterations, double lr = 1.0) {
    return {Algorithm::lbfgs, lr, iterations, 10, 0, 1};
  }
};

struct FitTrace {
  std::vector<std::pair<int, double>> loss_history;  // (iteration, mse)
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  long evaluations = 0;
  int iterations_run = 0;
  std::string stop_reason;
};

/// A loss became non-finite. `trace()` holds the history up to the last
/// finite value.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(FitTrace trace, const std::string& what)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const FitTrace& trace() const noexcept { return trace_; }

 private:
  FitTrace trace_;
};

/// Loss at x, writing the gradient into `grad` (resized by the callee).
template <typename Scalar>
using Objective = std::function<Scalar(const VectorX<Scalar>& x, VectorX<Scalar>& grad)>;

/// Called after every completed iteration with the current parameters.
template <typename Scalar>
using IterationCallback = std::function<void(int iteration, const VectorX<Scalar>& x)>;

namespace detail {

template <typename Scalar>
bool finite_scalar(Scalar v) {
  return std::isfinite(static_cast<double>(v));
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias correction.
/// Runs exactly config.iterations updates and leaves `x` at the iterate with
/// the lowest loss seen (constant-rate Adam can spike late in a run once the
/// second-moment estimate has decayed).
template <typename Scalar>
FitTrace minimize_adam(const Objective<Scalar>& objective, VectorX<Scalar>& x, const FitConfig& config,
                       const IterationCallback<Scalar>& on_iteration = {}) {
  config.validate();
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  detail::Stopwatch clock;
  FitTrace trace;
  VectorX<Scalar> grad, m = VectorX<Scalar>::Zero(x.size()), v = VectorX<Scalar>::Zero(x.size());
  double b1t = 1.0, b2t = 1.0;
  const Scalar lr = Scalar(config.learning_rate);
  VectorX<Scalar> best_x = x;
  Scalar best_loss = std::numeric_limits<Scalar>::infinity();
  for (int t = 1; t <= config.iterations; ++t) {
    const Scalar loss = objective(x, grad);
    ++trace.evaluations;
    if (!detail::finite_scalar(loss) || !grad.allFinite()) {
      trace.wall_seconds = clock.seconds();
      trace.stop_reason = "diverged";
      throw DivergedError(trace, "adam: non-finite loss at iteration " + std::to_string(t));
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_x = x;
    }
    if ((t - 1) % config.record_every == 0) trace.loss_history.emplace_back(t - 1, static_cast<double>(loss));
    b1t *= beta1;
    b2t *= beta2;
    m = Scalar(beta1) * m + Scalar(1 - beta1) * grad;
    v = Scalar(beta2) * v + Scalar(1 - beta2) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) / Scalar(1 - b1t), c2 = Scalar(1) / Scalar(1 - b2t);
    x.array() -= lr * (m.array() * c1) / ((v.array() * c2).sqrt() + Scalar(eps));
    trace.iterations_run = t;
    if (on_iteration) on_iteration(t, x);
  }
  const Scalar last_loss = objective(x, grad);
  ++trace.evaluations;
  if (!detail::finite_scalar(last_loss)) {
    trace.wall_seconds = clock.seconds();
    throw DivergedError(trace, "adam: non-finite loss after final update");
  }
  if (last_loss < best_loss) {
    best_loss = last_loss;
    best_x = x;
  }
  x = best_x;
  trace.final_loss = static_cast<double>(best_loss);
  trace.loss_history.emplace_back(config.iterations, trace.final_loss);
  trace.stop_reason = "iterations";
  trace.wall_seconds = clock.seconds();
  return trace;
}

template <typename Scalar>
struct LineSearchResult {
  bool wolfe = false;     // strong Wolfe conditions hold at `step`
  bool decrease = false;  // at least sufficient decrease holds
  Scalar step = Scalar(0);
  Scalar loss = Scalar(0);
  VectorX<Scalar> grad;
  int evaluations = 0;
};

/// Strong Wolfe line search along `dir` (bracketing + zoom with safeguarded
/// cubic interpolation). When the conditions cannot be met within the
/// evaluation budget it reports the best sufficient-decrease point seen.
template <typename Scalar>
LineSearchResult<Scalar> strong_wolfe_search(const Objective<Scalar>& objective, const VectorX<Scalar>& x,
                                             Scalar f0, const VectorX<Scalar>& g0, const VectorX<Scalar>& dir,
                                             Scalar initial_step, double c1 = 1e-4, double c2 = 0.9,
                                             int max_evaluations = 25) {
  const Scalar dphi0 = g0.dot(dir);
  LineSearchResult<Scalar> best;
  best.step = Scalar(0);
  best.loss = f0;
  best.grad = g0;

  VectorX<Scalar> trial_grad;
  auto evaluate = [&](Scalar t, Scalar& f, Scalar& dphi) {
    f = objective(x + t * dir, trial_grad);
    ++best.evaluations;
    if (!detail::finite_scalar(f) || !trial_grad.allFinite()) {
      f = std::numeric_limits<Scalar>::infinity();
      dphi = std::numeric_limits<Scalar>::quiet_NaN();
      return;
    }
    dphi = trial_grad.dot(dir);
    if (f <= f0 + Scalar(c1) * t * dphi0 && f < best.loss) {
      best.decrease = true;
      best.step = t;
      best.loss = f;
      best.grad = trial_grad;
    }
  };
  auto accept = [&](Scalar t, Scalar f) {
    best.wolfe = true;
    best.decrease = true;
    best.step = t;
    best.loss = f;
    best.grad = trial_grad;
    return best;
  };
  auto armijo_fails = [&](Scalar t, Scalar f) { return !(f <= f0 + Scalar(c1) * t * dphi0); };
  auto curvature_ok = [&](Scalar dphi) { return std::abs(dphi) <= -Scalar(c2) * dphi0; };

  auto interpolate = [](Scalar a, Scalar fa, Scalar da, Scalar b, Scalar fb, Scalar db) {
    // minimizer of the cubic through (a, fa, da), (b, fb, db); bisection fallback
    const Scalar lo = std::min(a, b), hi = std::max(a, b);
    Scalar t = (a + b) / Scalar(2);
    if (detail::finite_scalar(fa) && detail::finite_scalar(fb) && detail::finite_scalar(da) &&
        detail::finite_scalar(db) && a != b) {
      const Scalar d1 = da + db - Scalar(3) * (fa - fb) / (a - b);
      const Scalar disc = d1 * d1 - da * db;
      if (disc >= Scalar(0)) {
        const Scalar d2 = (b >= a ? Scalar(1) : Scalar(-1)) * std::sqrt(disc);
        const Scalar cand = b - (b - a) * (db + d2 - d1) / (db - da + Scalar(2) * d2);
        if (detail::finite_scalar(cand)) t = cand;
      }
    }
    const Scalar margin = Scalar(0.1) * (hi - lo);
    return std::clamp(t, lo + margin, hi - margin);
  };

  auto zoom = [&](Scalar lo, Scalar f_lo, Scalar d_lo, Scalar hi, Scalar f_hi, Scalar d_hi) {
    while (best.evaluations < max_evaluations) {
      const Scalar t = interpolate(lo, f_lo, d_lo, hi, f_hi, d_hi);
      Scalar f, dphi;
      evaluate(t, f, dphi);
      if (armijo_fails(t, f) || f >= f_lo) {
        hi = t;
        f_hi = f;
        d_hi = dphi;
      } else {
        if (curvature_ok(dphi)) return accept(t, f);
        if (dphi * (hi - lo) >= Scalar(0)) {
          hi = lo;
          f_hi = f_lo;
          d_hi = d_lo;
        }
        lo = t;
        f_lo = f;
        d_lo = dphi;
      }
      if (std::abs(hi - lo) <= Scalar(1e-14) * std::max(Scalar(1), std::abs(lo))) break;
    }
    return best;
  };

  Scalar t_prev = Scalar(0), f_prev = f0, d_prev = dphi0;
  Scalar t = initial_step;
  for (int i = 0; best.evaluations < max_evaluations; ++i) {
    Scalar f, dphi;
    evaluate(t, f, dphi);
    if (armijo_fails(t, f) || (i > 0 && f >= f_prev)) return zoom(t_prev, f_prev, d_prev, t, f, dphi);
    if (curvature_ok(dphi)) return accept(t, f);
    if (dphi >= Scalar(0)) return zoom(t, f, dphi, t_prev, f_prev, d_prev);
    t_prev = t;
    f_prev = f;
    d_prev = dphi;
    t *= Scalar(2);
  }
  return best;
}

/// L-BFGS with two-loop recursion. config.learning_rate is the initial trial
/// step of every line search (scaled by 1/|g|_1 on the first iteration).
/// When a strong Wolfe step cannot be found the best sufficient-decrease
/// point is taken; failing that, history is cleared and a steepest-descent
/// search is tried before stopping.
template <typename Scalar>
FitTrace minimize_lbfgs(const Objective<Scalar>& objective, VectorX<Scalar>& x, const FitConfig& config,
                        const IterationCallback<Scalar>& on_iteration = {}) {
  config.validate();
  detail::Stopwatch clock;
  FitTrace trace;
  VectorX<Scalar> g;
  Scalar f = objective(x, g);
  ++trace.evaluations;
  if (!detail::finite_scalar(f) || !g.allFinite()) {
    trace.stop_reason = "diverged";
    throw DivergedError(trace, "lbfgs: non-finite loss at start");
  }
  trace.loss_history.emplace_back(0, static_cast<double>(f));

  std::deque<VectorX<Scalar>> s_hist, y_hist;
  std::deque<Scalar> rho_hist;
  const Scalar lr = Scalar(config.learning_rate);
  trace.stop_reason = "iterations";

  for (int k = 1; k <= config.iterations; ++k) {
    if (g.template lpNorm<Eigen::Infinity>() <= Scalar(1e-300)) {
      trace.stop_reason = "gradient vanished";
      break;
    }
    VectorX<Scalar> q = g;
    std::vector<Scalar> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const Scalar beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    VectorX<Scalar> dir = -q;
    if (!(g.dot(dir) < Scalar(0))) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
    }
    const Scalar t0 = s_hist.empty() ? lr * std::min(Scalar(1), Scalar(1) / g.template lpNorm<1>()) : lr;

    auto ls = strong_wolfe_search(objective, x, f, g, dir, t0);
    trace.evaluations += ls.evaluations;
    if (!ls.decrease && !s_hist.empty()) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      ls = strong_wolfe_search(objective, x, f, g, dir,
                               lr * std::min(Scalar(1), Scalar(1) / g.template lpNorm<1>()));
      trace.evaluations += ls.evaluations;
    }
    if (!ls.decrease) {
      trace.stop_reason = "no descent step";
      break;
    }

    const VectorX<Scalar> s = ls.step * dir;
    const VectorX<Scalar> y = ls.grad - g;
    x += s;
    const Scalar f_old = f;
    f = ls.loss;
    g = ls.grad;
    const Scalar sy = s.dot(y);
    if (sy > Scalar(1e-12) * y.squaredNorm() && sy > Scalar(0)) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(Scalar(1) / sy);
      if (static_cast<int>(s_hist.size()) > config.lbfgs_history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    trace.iterations_run = k;
    if (k % config.record_every == 0) trace.loss_history.emplace_back(k, static_cast<double>(f));
    if (on_iteration) on_iteration(k, x);
    if (f_old - f <= std::numeric_limits<Scalar>::epsilon() * std::abs(f) && s.template lpNorm<Eigen::Infinity>() == Scalar(0)) {
      trace.stop_reason = "stalled";
      break;
    }
  }
  trace.final_loss = static_cast<double>(f);
  if (trace.loss_history.back().first != trace.iterations_run)
    trace.loss_history.emplace_back(trace.iterations_run, trace.final_loss);
  trace.wall_seconds = clock.seconds();
  return trace;
}

template <typename Scalar>
FitTrace minimize(const Objective<Scalar>& objective, VectorX<Scalar>& x, const FitConfig& config,
                  const IterationCallback<Scalar>& on_iteration = {}) {
  return config.algorithm == Algorithm::adam ? minimize_adam(objective, x, config, on_iteration)
                                             : minimize_lbfgs(objective, x, config, on_iteration);
}

}  // namespace kanfric
