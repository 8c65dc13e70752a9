#include "kanfric/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "kanfric/errors.hpp"

namespace kanfric {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

FrictionDataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, "cannot open file");

  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ":1", "missing header line");
  const auto header = split(line);
  const auto find = [&](const std::string& name) {
    return static_cast<int>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  const int vcol = find("velocity"), fcol = find("torque");
  const int ncols = static_cast<int>(header.size());
  if (vcol == ncols || fcol == ncols)
    throw FormatError(path + ":1", "header must name 'velocity' and 'torque' columns");
  for (int c = 0; c < ncols; ++c) {
    if (header[c].empty()) throw FormatError(path + ":1", "empty column name");
    if (find(header[c]) != c) throw FormatError(path + ":1", "duplicate column '" + header[c] + "'");
  }

  std::vector<std::vector<double>> columns(ncols);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != ncols)
      throw FormatError(path + ":" + std::to_string(lineno),
                        "expected " + std::to_string(ncols) + " fields, got " + std::to_string(cells.size()));
    for (int c = 0; c < ncols; ++c) {
      std::size_t used = 0;
      double value = 0;
      try {
        value = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[c].size() || !std::isfinite(value))
        throw FormatError(path + ":" + std::to_string(lineno) + ":" + header[c],
                          "not a finite decimal number: '" + cells[c] + "'");
      columns[c].push_back(value);
    }
  }
  if (columns[vcol].empty()) throw FormatError(path, "no samples");

  auto to_vector = [](const std::vector<double>& v) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  FrictionDataset data;
  data.velocity = to_vector(columns[vcol]);
  data.torque = to_vector(columns[fcol]);
  for (int c = 0; c < ncols; ++c)
    if (c != vcol && c != fcol) data.channels[header[c]] = to_vector(columns[c]);
  data.provenance = FileSource{path};
  return data;
}

void write_csv(const std::string& path, const FrictionDataset& data) {
  data.validate();
  std::vector<std::string> names;
  for (const char* preferred : {"time", "tau_mcg"})
    if (data.channels.count(preferred)) names.emplace_back(preferred);
  for (const auto& [name, _] : data.channels)
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);

  std::ofstream out(path);
  if (!out) throw FormatError(path, "cannot open file for writing");
  out << "velocity,torque";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << format_double(data.velocity[i]) << ',' << format_double(data.torque[i]);
    for (const auto& n : names) out << ',' << format_double(data.channels.at(n)[i]);
    out << '\n';
  }
  if (!out) throw FormatError(path, "write failed");
}

}  // namespace kanfric
