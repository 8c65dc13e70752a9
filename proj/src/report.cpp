#include "kanfric/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "kanfric/csv.hpp"

namespace kanfric {

nlohmann::json to_json(const FitReport& report) {
  nlohmann::json doc;
  doc["r_squared"] = report.r_squared;
  doc["r_squared_vs_clean"] = report.r_squared_vs_clean ? nlohmann::json(*report.r_squared_vs_clean) : nlohmann::json();
  doc["relative_errors"] = report.relative_errors;
  doc["estimates"] = report.estimates;
  doc["correlations"] = report.correlations;
  doc["config"] = report.config;
  doc["wall_seconds"] = report.wall_seconds;
  return doc;
}

nlohmann::json to_json(const FitTrace& trace) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& [k, loss] : trace.loss_history) history.push_back({k, loss});
  return {{"loss_history", history},
          {"final_loss", trace.final_loss},
          {"evaluations", trace.evaluations},
          {"iterations", trace.iterations_run},
          {"stop_reason", trace.stop_reason},
          {"wall_seconds", trace.wall_seconds}};
}

ResidualStats residual_stats(const Eigen::VectorXd& truth, const Eigen::VectorXd& prediction) {
  if (truth.size() != prediction.size() || truth.size() == 0)
    throw std::invalid_argument("residual_stats: lengths must match and be nonzero");
  const Eigen::ArrayXd r = (prediction - truth).array();
  ResidualStats s;
  s.mean = r.mean();
  s.std_dev = std::sqrt((r - s.mean).square().mean());
  s.rmse = std::sqrt(r.square().mean());
  s.max_abs = r.abs().maxCoeff();
  return s;
}

nlohmann::json to_json(const ResidualStats& s) {
  return {{"mean", s.mean}, {"std", s.std_dev}, {"rmse", s.rmse}, {"max_abs", s.max_abs}};
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_prediction_csv(const std::string& path, const Eigen::VectorXd& velocity, const Eigen::VectorXd& truth,
                          const Eigen::VectorXd& prediction) {
  if (velocity.size() != truth.size() || truth.size() != prediction.size())
    throw std::invalid_argument("write_prediction_csv: column lengths differ");
  std::string text = "velocity,truth,prediction\n";
  for (Eigen::Index i = 0; i < velocity.size(); ++i)
    text += format_double(velocity[i]) + "," + format_double(truth[i]) + "," + format_double(prediction[i]) + "\n";
  write_text_file(path, text);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string svg_plot(const Eigen::VectorXd& velocity, const Eigen::VectorXd& truth, const Eigen::VectorXd& prediction,
                     const std::string& title) {
  constexpr double width = 640, height = 420, left = 60, right = 20, top = 40, bottom = 50;
  const double xmin = velocity.minCoeff(), xmax = velocity.maxCoeff();
  double ymin = std::min(truth.minCoeff(), prediction.minCoeff());
  double ymax = std::max(truth.maxCoeff(), prediction.maxCoeff());
  if (ymax == ymin) {
    ymax += 1;
    ymin -= 1;
  }
  const double xspan = xmax > xmin ? xmax - xmin : 1.0;
  auto px = [&](double x) { return left + (x - xmin) / xspan * (width - left - right); };
  auto py = [&](double y) { return height - bottom - (y - ymin) / (ymax - ymin) * (height - top - bottom); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n"
      << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + xspan * k / 4, yv = ymin + (ymax - ymin) * k / 4;
    svg << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << height - bottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << fmt(yv) << "</text>\n";
  }
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">velocity (rad/s)</text>\n"
      << "<text x=\"16\" y=\"" << height / 2 << "\" transform=\"rotate(-90 16 " << height / 2
      << ")\" text-anchor=\"middle\" font-size=\"12\">torque (N m)</text>\n";

  svg << "<g fill=\"#1f77b4\">\n";
  for (Eigen::Index i = 0; i < velocity.size(); ++i)
    svg << "<circle cx=\"" << fmt(px(velocity[i])) << "\" cy=\"" << fmt(py(truth[i])) << "\" r=\"1.6\"/>\n";
  svg << "</g>\n";

  std::vector<Eigen::Index> order(static_cast<std::size_t>(velocity.size()));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return velocity[a] < velocity[b]; });
  svg << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
  for (auto i : order) svg << fmt(px(velocity[i])) << "," << fmt(py(prediction[i])) << " ";
  svg << "\"/>\n";
  svg << "<text x=\"" << left + 10 << "\" y=\"" << top + 14 << "\" font-size=\"11\" fill=\"#1f77b4\">truth</text>\n"
      << "<text x=\"" << left + 10 << "\" y=\"" << top + 28 << "\" font-size=\"11\" fill=\"#d62728\">prediction</text>\n"
      << "</svg>\n";
  return svg.str();
}

}  // namespace kanfric
