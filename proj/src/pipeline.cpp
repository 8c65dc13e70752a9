#include "kanfric/pipeline.hpp"

#include "kanfric/metrics.hpp"
#include "kanfric/training.hpp"

namespace kanfric {

Eigen::MatrixXd input_matrix(const FrictionDataset& data, const std::vector<std::string>& names) {
  if (names.empty()) throw std::invalid_argument("at least one input column is required");
  Eigen::MatrixXd x(data.size(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == "velocity") {
      x.col(static_cast<Eigen::Index>(k)) = data.velocity;
      continue;
    }
    const auto it = data.channels.find(names[k]);
    if (it == data.channels.end()) throw std::invalid_argument("dataset has no column '" + names[k] + "'");
    x.col(static_cast<Eigen::Index>(k)) = it->second;
  }
  return x;
}

ArchSpec PipelineOptions::default_arch() { return parse_arch("[1,[5,2],1]", 3, 3); }

PipelineResult run_pipeline(const FrictionDataset& data, const PipelineOptions& options) {
  data.validate();
  const Eigen::MatrixXd x = input_matrix(data, options.inputs);
  const Eigen::MatrixXd y = data.targets();
  if (options.arch.inputs() != x.cols())
    throw std::invalid_argument("architecture expects " + std::to_string(options.arch.inputs()) + " inputs, got " +
                                std::to_string(x.cols()));

  PipelineResult out;
  out.fitted = init_network<double>(options.arch, options.seed);
  fit_normalization(out.fitted, x, y);
  out.fit_trace = fit_network(out.fitted, x, y, FitConfig::lbfgs(options.fit_steps));
  out.r2_fit = r_squared(data.torque, network_forward(x, out.fitted).col(0));

  const auto scores = attribution_scores(out.fitted, x);
  auto pruned = prune(out.fitted, scores, x, options.prune);
  out.prune_report = pruned.report;
  out.pruned = std::move(pruned.net);
  if (options.refit_steps > 0) out.prune_refit_trace = fit_network(out.pruned, x, y, FitConfig::lbfgs(options.refit_steps));
  out.r2_pruned = r_squared(data.torque, network_forward(x, out.pruned).col(0));

  const FunctionLibrary lib =
      options.library.empty() ? default_library() : library_subset(default_library(), options.library);
  out.symbolic = symbolify(out.pruned, lib, x, y, options.symbolic);
  out.r2_symbolic = r_squared(data.torque, out.symbolic.model.forward(x).col(0));
  return out;
}

}  // namespace kanfric
