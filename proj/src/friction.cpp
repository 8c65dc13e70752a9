#include "kanfric/friction.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace kanfric {

namespace {

constexpr std::array<StribeckParamsd, 6> kAxisTable{{
    {22, 8, 0.10, 0.03, 50},
    {23, 10, 0.13, 0.16, 50},
    {24, 12, 0.16, 0.29, 50},
    {25, 14, 0.19, 0.42, 50},
    {26, 16, 0.22, 0.55, 50},
    {27, 18, 0.25, 0.68, 50},
}};

constexpr double kSampleInterval = 0.004;  // seconds

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

ClassicalModel parse_classical_model(const std::string& name) {
  if (name == "coulomb") return ClassicalModel::coulomb;
  if (name == "coulomb_static") return ClassicalModel::coulomb_static;
  if (name == "coulomb_viscous") return ClassicalModel::coulomb_viscous;
  if (name == "stribeck_no_viscous") return ClassicalModel::stribeck_no_viscous;
  throw std::invalid_argument("unknown classical model '" + name + "'");
}

double classical_model(ClassicalModel kind, double v, const StribeckParamsd& p) {
  switch (kind) {
    case ClassicalModel::coulomb:
      return p.k1 * sign(v);
    case ClassicalModel::coulomb_static:
      if (std::abs(v) < kStandstillBand) return v < 0 ? -(p.k1 + p.k2) : p.k1 + p.k2;
      return p.k1 * sign(v);
    case ClassicalModel::coulomb_viscous:
      return p.k1 * sign(v) + p.k4 * v;
    case ClassicalModel::stribeck_no_viscous: {
      if (!p.valid()) throw std::invalid_argument("stribeck_no_viscous: k3 and smoothing must be > 0");
      StribeckParamsd q = p;
      q.k4 = 0.0;
      return stribeck(v, q);
    }
  }
  throw std::invalid_argument("classical_model: unknown kind");
}

StribeckParamsd axis_params(int axis) {
  if (axis < 1 || axis > 6)
    throw std::invalid_argument("axis must be in 1..6, got " + std::to_string(axis));
  return kAxisTable[axis - 1];
}

std::string describe(const Provenance& p) {
  struct Visitor {
    std::string operator()(const SyntheticSource& s) const {
      std::ostringstream out;
      out << "synthetic(axis=" << s.axis << ", k=[" << s.params.k1 << "," << s.params.k2 << ","
          << s.params.k3 << "," << s.params.k4 << "], seed=" << s.seed << ", profile=" << s.profile << ")";
      return out.str();
    }
    std::string operator()(const FileSource& f) const { return "file(" + f.path + ")"; }
    std::string operator()(const std::shared_ptr<const NoisySource>& n) const {
      std::ostringstream out;
      out << "noisy(" << describe(n->base) << ", "
          << (n->spec.mode == NoiseSpec::Mode::quarter_range ? "quarter_range"
                                                             : "half_lambda=" + std::to_string(n->spec.lambda))
          << ", seed=" << n->spec.seed << ")";
      return out.str();
    }
  };
  return std::visit(Visitor{}, p);
}

void FrictionDataset::validate() const {
  if (velocity.size() < 1) throw std::invalid_argument("dataset: no samples");
  if (torque.size() != velocity.size()) throw std::invalid_argument("dataset: velocity/torque length mismatch");
  if (!velocity.allFinite() || !torque.allFinite()) throw std::invalid_argument("dataset: non-finite sample");
  for (const auto& [name, values] : channels) {
    if (values.size() != velocity.size())
      throw std::invalid_argument("dataset: channel '" + name + "' length mismatch");
    if (!values.allFinite()) throw std::invalid_argument("dataset: channel '" + name + "' has non-finite values");
  }
}

VelocityProfile parse_velocity_profile(const std::string& name) {
  if (name == "uniform") return VelocityProfile::uniform;
  if (name == "sinusoid") return VelocityProfile::sinusoid;
  if (name == "gaussian") return VelocityProfile::gaussian;
  throw std::invalid_argument("unknown velocity profile '" + name + "' (uniform, sinusoid, gaussian)");
}

std::string to_string(VelocityProfile profile) {
  switch (profile) {
    case VelocityProfile::uniform: return "uniform";
    case VelocityProfile::sinusoid: return "sinusoid";
    case VelocityProfile::gaussian: return "gaussian";
  }
  return "?";
}

FrictionDataset generate_dataset(const StribeckParamsd& params, Eigen::Index n, Interval range,
                                 std::uint64_t seed, VelocityProfile profile, int axis) {
  if (n < 1) throw std::invalid_argument("generate: N must be >= 1");
  if (!(range.upper > range.lower)) throw std::invalid_argument("generate: empty velocity range");
  if (!params.valid()) throw std::invalid_argument("generate: k3 and smoothing must be > 0");

  std::mt19937_64 rng(seed);
  FrictionDataset data;
  data.velocity.resize(n);
  const double mid = 0.5 * (range.lower + range.upper), half = 0.5 * (range.upper - range.lower);
  switch (profile) {
    case VelocityProfile::uniform: {
      std::uniform_real_distribution<double> u(range.lower, range.upper);
      for (Eigen::Index i = 0; i < n; ++i) data.velocity[i] = u(rng);
      break;
    }
    case VelocityProfile::gaussian: {
      std::normal_distribution<double> g(mid, half / 2.5);
      for (Eigen::Index i = 0; i < n; ++i) data.velocity[i] = std::clamp(g(rng), range.lower, range.upper);
      break;
    }
    case VelocityProfile::sinusoid: {
      // a few periods over the record, random phase
      std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
      const double phi = phase(rng);
      const double periods = 3.0;
      const double omega = 2.0 * M_PI * periods / (double(n) * kSampleInterval);
      Eigen::VectorXd time(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        time[i] = double(i) * kSampleInterval;
        data.velocity[i] = mid + half * std::sin(omega * time[i] + phi);
      }
      data.channels["time"] = time;
      break;
    }
  }
  data.torque = stribeck(data.velocity, params);
  data.provenance = SyntheticSource{axis, params, seed, to_string(profile)};
  return data;
}

FrictionDataset generate_axis_dataset(int axis, Eigen::Index n, Interval range, std::uint64_t seed,
                                      VelocityProfile profile) {
  return generate_dataset(axis_params(axis), n, range, seed, profile, axis);
}

FrictionDataset add_noise(const FrictionDataset& data, const NoiseSpec& spec) {
  data.validate();
  if (spec.lambda < 0) throw std::invalid_argument("noise: lambda must be >= 0");
  const double std_dev = spec.standard_deviation(data.torque.maxCoeff() - data.torque.minCoeff());
  FrictionDataset out = data;
  if (std_dev > 0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, std_dev);
    for (Eigen::Index i = 0; i < out.size(); ++i) out.torque[i] += noise(rng);
  }
  out.provenance = std::make_shared<const NoisySource>(NoisySource{data.provenance, spec});
  return out;
}

FrictionDataset add_dynamics_channel(const FrictionDataset& data, double inertia, double gravity) {
  data.validate();
  const auto it = data.channels.find("time");
  if (it == data.channels.end()) throw std::invalid_argument("dynamics channel needs a 'time' channel");
  const Eigen::VectorXd& t = it->second;
  const Eigen::Index n = data.size();
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(t[i] > t[i - 1])) throw std::invalid_argument("dynamics channel: time must be strictly increasing");
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n), accel = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 1; i < n; ++i) q[i] = q[i - 1] + 0.5 * (data.velocity[i] + data.velocity[i - 1]) * (t[i] - t[i - 1]);
  if (n > 1) {
    accel[0] = (data.velocity[1] - data.velocity[0]) / (t[1] - t[0]);
    accel[n - 1] = (data.velocity[n - 1] - data.velocity[n - 2]) / (t[n - 1] - t[n - 2]);
    for (Eigen::Index i = 1; i + 1 < n; ++i)
      accel[i] = (data.velocity[i + 1] - data.velocity[i - 1]) / (t[i + 1] - t[i - 1]);
  }
  FrictionDataset out = data;
  out.channels["tau_mcg"] = inertia * accel.array() + gravity * q.array().cos();
  return out;
}

FrictionDataset subsample(const FrictionDataset& data, double fraction, std::uint64_t seed) {
  data.validate();
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("subsample: fraction must be in (0, 1]");
  const auto keep = static_cast<Eigen::Index>(std::llround(fraction * double(data.size())));
  if (keep < 1) throw std::invalid_argument("subsample: empty result");

  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::mt19937_64 rng(seed);
  // Fisher-Yates; std::shuffle's algorithm is implementation-defined
  for (Eigen::Index i = data.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(keep);

  FrictionDataset out;
  out.velocity.resize(keep);
  out.torque.resize(keep);
  for (const auto& [name, _] : data.channels) out.channels[name].resize(keep);
  for (Eigen::Index i = 0; i < keep; ++i) {
    out.velocity[i] = data.velocity[order[i]];
    out.torque[i] = data.torque[order[i]];
    for (auto& [name, values] : out.channels) values[i] = data.channels.at(name)[order[i]];
  }
  out.provenance = data.provenance;
  return out;
}

}  // namespace kanfric
