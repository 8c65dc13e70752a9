#include "kanfric/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "kanfric/errors.hpp"

namespace kanfric {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json affine_to_json(const std::vector<AffineMap<double>>& maps) {
  json out = json::array();
  for (const auto& m : maps) out.push_back({{"scale", m.scale}, {"offset", m.offset}});
  return out;
}

// Reader helpers: every access carries the field path for error messages.
const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw FormatError(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(path + "." + key, "missing field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw FormatError(path, "expected a number");
  return j.get<double>();
}

long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw FormatError(path, "expected an integer");
  return j.get<long>();
}

Eigen::VectorXd read_vector(const json& j, Eigen::Index size, const std::string& path) {
  if (!j.is_array()) throw FormatError(path, "expected an array");
  if (static_cast<Eigen::Index>(j.size()) != size)
    throw FormatError(path, "expected " + std::to_string(size) + " values, got " + std::to_string(j.size()));
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) out[i] = number(j[i], path + "[" + std::to_string(i) + "]");
  return out;
}

Eigen::MatrixXd read_matrix(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
  if (!j.is_array()) throw FormatError(path, "expected an array of rows");
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw FormatError(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    out.row(i) = read_vector(j[i], cols, path + "[" + std::to_string(i) + "]").transpose();
  return out;
}

void require_binary(const Eigen::MatrixXd& m, const std::string& path) {
  for (Eigen::Index k = 0; k < m.size(); ++k)
    if (m.data()[k] != 0.0 && m.data()[k] != 1.0) throw FormatError(path, "mask entries must be 0 or 1");
}

std::vector<AffineMap<double>> read_affine(const json& j, std::size_t count, const std::string& path) {
  if (!j.is_array() || j.size() != count)
    throw FormatError(path, "expected " + std::to_string(count) + " entries");
  std::vector<AffineMap<double>> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    AffineMap<double> m{number(field(j[i], "scale", p), p + ".scale"), number(field(j[i], "offset", p), p + ".offset")};
    if (m.scale == 0.0) throw FormatError(p + ".scale", "must be nonzero");
    out.push_back(m);
  }
  return out;
}

}  // namespace

std::string checkpoint_to_string(const KanNetworkd& net) {
  net.check_shapes();
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["arch"] = {{"layers", format_arch(net.arch)}, {"grid", net.arch.grid}, {"order", net.arch.order}};
  doc["seed"] = net.seed;
  json layers = json::array();
  for (const auto& layer : net.layers) {
    json l;
    l["in_width"] = layer.in_width;
    l["out_width"] = layer.out_width;
    l["squash"] = layer.squash;
    json grids = json::array();
    for (const auto& g : layer.grids)
      grids.push_back({{"lower", g.lower}, {"upper", g.upper}, {"intervals", g.intervals}, {"order", g.order},
                       {"knots", vector_to_json(g.knots)}});
    l["grids"] = std::move(grids);
    json coeffs = json::array();
    for (const auto& c : layer.coeffs) coeffs.push_back(matrix_to_json(c));
    l["spline_coeffs"] = std::move(coeffs);
    l["base_weight"] = matrix_to_json(layer.base_weight);
    l["spline_scaler"] = matrix_to_json(layer.spline_scaler);
    l["edge_mask"] = matrix_to_json(layer.edge_mask);
    layers.push_back(std::move(l));
  }
  doc["layers"] = std::move(layers);
  json masks = json::array();
  for (const auto& m : net.node_masks) masks.push_back(vector_to_json(m));
  doc["node_masks"] = std::move(masks);
  doc["normalization"] = {{"input", affine_to_json(net.input_norm)}, {"output", affine_to_json(net.output_norm)}};
  return doc.dump(1) + "\n";
}

KanNetworkd checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("", std::string("not valid JSON: ") + e.what());
  }
  const std::string root = "checkpoint";
  const long version = integer(field(doc, "format_version", root), "format_version");
  if (version != kCheckpointFormatVersion)
    throw FormatError("format_version", "unsupported version " + std::to_string(version));

  const json& arch_j = field(doc, "arch", root);
  const json& layers_str = field(arch_j, "layers", "arch");
  if (!layers_str.is_string()) throw FormatError("arch.layers", "expected a string like \"[1,5,1]\"");
  KanNetworkd net;
  try {
    net.arch = parse_arch(layers_str.get<std::string>(), static_cast<int>(integer(field(arch_j, "grid", "arch"), "arch.grid")),
                          static_cast<int>(integer(field(arch_j, "order", "arch"), "arch.order")));
  } catch (const std::invalid_argument& e) {
    throw FormatError("arch", e.what());
  }
  const json& seed = field(doc, "seed", root);
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw FormatError("seed", "expected an integer");
  net.seed = seed.get<std::uint64_t>();

  const json& layers = field(doc, "layers", root);
  if (!layers.is_array() || static_cast<int>(layers.size()) != net.arch.depth())
    throw FormatError("layers", "expected " + std::to_string(net.arch.depth()) + " layers");
  for (int l = 0; l < net.arch.depth(); ++l) {
    const std::string p = "layers[" + std::to_string(l) + "]";
    const json& lj = layers[l];
    KanLayerd layer;
    layer.in_width = static_cast<int>(integer(field(lj, "in_width", p), p + ".in_width"));
    layer.out_width = static_cast<int>(integer(field(lj, "out_width", p), p + ".out_width"));
    if (layer.in_width != net.arch.layers[l].nodes()) throw FormatError(p + ".in_width", "disagrees with arch");
    if (layer.out_width != net.arch.layers[l + 1].pre_nodes()) throw FormatError(p + ".out_width", "disagrees with arch");
    const json& squash = field(lj, "squash", p);
    if (!squash.is_boolean()) throw FormatError(p + ".squash", "expected a boolean");
    layer.squash = squash.get<bool>();

    const json& grids = field(lj, "grids", p);
    if (!grids.is_array() || static_cast<int>(grids.size()) != layer.in_width)
      throw FormatError(p + ".grids", "expected " + std::to_string(layer.in_width) + " grids");
    for (int j = 0; j < layer.in_width; ++j) {
      const std::string gp = p + ".grids[" + std::to_string(j) + "]";
      SplineGrid<double> g;
      g.lower = number(field(grids[j], "lower", gp), gp + ".lower");
      g.upper = number(field(grids[j], "upper", gp), gp + ".upper");
      g.intervals = static_cast<int>(integer(field(grids[j], "intervals", gp), gp + ".intervals"));
      g.order = static_cast<int>(integer(field(grids[j], "order", gp), gp + ".order"));
      if (g.intervals < 1 || g.order < 1) throw FormatError(gp, "intervals and order must be >= 1");
      g.knots = read_vector(field(grids[j], "knots", gp), g.knot_count(), gp + ".knots");
      for (Eigen::Index k = 1; k < g.knots.size(); ++k)
        if (!(g.knots[k] > g.knots[k - 1])) throw FormatError(gp + ".knots", "must be strictly increasing");
      layer.grids.push_back(std::move(g));
    }
    const json& coeffs = field(lj, "spline_coeffs", p);
    if (!coeffs.is_array() || static_cast<int>(coeffs.size()) != layer.in_width)
      throw FormatError(p + ".spline_coeffs", "expected " + std::to_string(layer.in_width) + " blocks");
    for (int j = 0; j < layer.in_width; ++j)
      layer.coeffs.push_back(read_matrix(coeffs[j], layer.out_width, layer.grids[j].basis_count(),
                                         p + ".spline_coeffs[" + std::to_string(j) + "]"));
    layer.base_weight = read_matrix(field(lj, "base_weight", p), layer.out_width, layer.in_width, p + ".base_weight");
    layer.spline_scaler = read_matrix(field(lj, "spline_scaler", p), layer.out_width, layer.in_width, p + ".spline_scaler");
    layer.edge_mask = read_matrix(field(lj, "edge_mask", p), layer.out_width, layer.in_width, p + ".edge_mask");
    require_binary(layer.edge_mask, p + ".edge_mask");
    net.layers.push_back(std::move(layer));
  }

  const json& masks = field(doc, "node_masks", root);
  if (!masks.is_array() || static_cast<int>(masks.size()) != net.arch.depth() + 1)
    throw FormatError("node_masks", "expected " + std::to_string(net.arch.depth() + 1) + " masks");
  for (int l = 0; l <= net.arch.depth(); ++l) {
    const std::string p = "node_masks[" + std::to_string(l) + "]";
    net.node_masks.push_back(read_vector(masks[l], net.arch.layers[l].nodes(), p));
    require_binary(net.node_masks.back(), p);
  }
  const json& norm = field(doc, "normalization", root);
  net.input_norm = read_affine(field(norm, "input", "normalization"), net.inputs(), "normalization.input");
  net.output_norm = read_affine(field(norm, "output", "normalization"), net.outputs(), "normalization.output");
  return net;
}

void save_checkpoint(const KanNetworkd& net, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError(path, "cannot open file for writing");
  out << checkpoint_to_string(net);
  if (!out) throw FormatError(path, "write failed");
}

KanNetworkd load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace kanfric
