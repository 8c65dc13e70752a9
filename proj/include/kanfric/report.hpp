#pragma once

/// @file report.hpp
/// @brief Run reports (JSON), prediction CSVs and a static SVG plot.

#include <string>

#include <json.hpp>

#include "kanfric/metrics.hpp"
#include "kanfric/optimizers.hpp"

namespace kanfric {

nlohmann::json to_json(const FitReport& report);

/// Loss history as [[iteration, mse], ...] plus final loss, evaluations,
/// iterations, stop reason and wall time.
nlohmann::json to_json(const FitTrace& trace);

struct ResidualStats {
  double mean = 0.0;
  double std_dev = 0.0;
  double rmse = 0.0;
  double max_abs = 0.0;
};

ResidualStats residual_stats(const Eigen::VectorXd& truth, const Eigen::VectorXd& prediction);
nlohmann::json to_json(const ResidualStats& stats);

/// Writes `text`, creating parent directories. Throws std::runtime_error.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Columns velocity,truth,prediction with round-trip precision.
void write_prediction_csv(const std::string& path, const Eigen::VectorXd& velocity, const Eigen::VectorXd& truth,
                          const Eigen::VectorXd& prediction);

/// Scatter of truth and prediction against velocity.
std::string svg_plot(const Eigen::VectorXd& velocity, const Eigen::VectorXd& truth, const Eigen::VectorXd& prediction,
                     const std::string& title);

}  // namespace kanfric
