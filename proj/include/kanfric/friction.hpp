#pragma once

/// @file friction.hpp
/// @brief Static joint-friction laws and synthetic velocity/torque datasets.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>

#include "kanfric/types.hpp"

namespace kanfric {

/// Smoothed Stribeck coefficients: k1 Coulomb level, k2 static excess,
/// k3 Stribeck velocity, k4 viscous coefficient.
template <typename Scalar = double>
struct StribeckParams {
  Scalar k1 = Scalar(0);
  Scalar k2 = Scalar(0);
  Scalar k3 = Scalar(1);
  Scalar k4 = Scalar(0);
  Scalar smoothing = Scalar(50);

  bool valid() const { return k3 > Scalar(0) && smoothing > Scalar(0); }
  std::array<Scalar, 4> coefficients() const { return {k1, k2, k3, k4}; }
  bool operator==(const StribeckParams&) const = default;
};

using StribeckParamsd = StribeckParams<double>;

/// F(v) = (k1 + k2 exp(-|v/k3|)) tanh(smoothing v) + k4 v
template <typename Scalar>
Scalar stribeck(Scalar v, const StribeckParams<Scalar>& p) {
  return (p.k1 + p.k2 * std::exp(-std::abs(v / p.k3))) * std::tanh(p.smoothing * v) + p.k4 * v;
}

template <typename Derived>
VectorX<typename Derived::Scalar> stribeck(const Eigen::MatrixBase<Derived>& v,
                                           const StribeckParams<typename Derived::Scalar>& p) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([&](Scalar x) { return stribeck(x, p); });
}

enum class ClassicalModel { coulomb, coulomb_static, coulomb_viscous, stribeck_no_viscous };

/// Parses "coulomb", "coulomb_static", "coulomb_viscous", "stribeck_no_viscous".
ClassicalModel parse_classical_model(const std::string& name);

/// Half-width of the velocity band treated as standstill by coulomb_static.
inline constexpr double kStandstillBand = 1e-9;

/// Classical static models in the same coefficient naming: F_c = k1,
/// F_s = k1 + k2, F_v = k4. Inside the standstill band coulomb_static
/// returns the static level F_s (negated for v < 0); outside it is Coulomb.
double classical_model(ClassicalModel kind, double v, const StribeckParamsd& p);

/// Per-axis ground truth for the six synthetic joints (axes 1..6).
StribeckParamsd axis_params(int axis);

/// Relative noise levels used for symbolic runs on joints 1..6.
inline constexpr std::array<double, 6> kJointNoiseLevels{0.03, 0.05, 0.08, 0.12, 0.15, 0.20};

struct NoiseSpec {
  enum class Mode { quarter_range, half_lambda };
  Mode mode = Mode::quarter_range;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  /// Standard deviation for a torque range max(F) - min(F).
  double standard_deviation(double torque_range) const {
    return mode == Mode::quarter_range ? 0.25 * torque_range : 0.5 * lambda * torque_range;
  }
};

struct SyntheticSource {
  int axis = 0;
  StribeckParamsd params;
  std::uint64_t seed = 0;
  std::string profile;
};
struct FileSource {
  std::string path;
};
struct NoisySource;
using Provenance = std::variant<SyntheticSource, FileSource, std::shared_ptr<const NoisySource>>;
struct NoisySource {
  Provenance base;
  NoiseSpec spec;
};

std::string describe(const Provenance& p);

/// Paired velocity (rad/s) / torque (N m) samples plus optional named
/// channels such as "time" or "tau_mcg".
struct FrictionDataset {
  Eigen::VectorXd velocity;
  Eigen::VectorXd torque;
  std::map<std::string, Eigen::VectorXd> channels;
  Provenance provenance = FileSource{};

  Eigen::Index size() const { return velocity.size(); }

  /// Throws std::invalid_argument unless lengths agree, N >= 1 and all
  /// values are finite.
  void validate() const;

  Eigen::MatrixXd inputs() const { return velocity; }
  Eigen::MatrixXd targets() const { return torque; }
};

/// Velocity sampling schemes for synthetic trajectories.
enum class VelocityProfile {
  uniform,   // i.i.d. uniform over the range
  sinusoid,  // v(t) = A sin(w t) at 4 ms steps, spanning the range
  gaussian,  // normal centered in the range, clipped to it
};

VelocityProfile parse_velocity_profile(const std::string& name);
std::string to_string(VelocityProfile profile);

struct Interval {
  double lower = -1.0;
  double upper = 1.0;
};

/// N samples from axis `axis` (1..6); torques follow the smoothed Stribeck
/// law. The sinusoid profile also records a "time" channel.
FrictionDataset generate_axis_dataset(int axis, Eigen::Index n, Interval range = {}, std::uint64_t seed = 0,
                                      VelocityProfile profile = VelocityProfile::uniform);

/// Same sampling for arbitrary coefficients.
FrictionDataset generate_dataset(const StribeckParamsd& params, Eigen::Index n, Interval range = {},
                                 std::uint64_t seed = 0, VelocityProfile profile = VelocityProfile::uniform,
                                 int axis = 0);

/// Adds N(0, Std) to torques; velocities and channels are unchanged.
FrictionDataset add_noise(const FrictionDataset& data, const NoiseSpec& spec);

/// Adds a surrogate rigid-body torque channel "tau_mcg" = inertia * dv/dt +
/// gravity * cos(q), with q the trapezoidal integral of v over the "time"
/// channel (required, strictly increasing).
FrictionDataset add_dynamics_channel(const FrictionDataset& data, double inertia = 2.0, double gravity = 15.0);

/// Uniform sample without replacement of round(fraction * N) rows.
FrictionDataset subsample(const FrictionDataset& data, double fraction, std::uint64_t seed);

}  // namespace kanfric
