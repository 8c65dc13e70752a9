#include "kanfric/arch.hpp"

#include <json.hpp>
#include <stdexcept>

namespace kanfric {

void ArchSpec::validate() const {
  if (layers.size() < 2) throw std::invalid_argument("arch: need at least input and output layers");
  if (grid < 1) throw std::invalid_argument("arch: grid must be >= 1");
  if (order < 1) throw std::invalid_argument("arch: order must be >= 1");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    if (spec.additive < 0 || spec.multiplicative < 0)
      throw std::invalid_argument("arch: negative node count in layer " + std::to_string(l));
    if (spec.nodes() < 1)
      throw std::invalid_argument("arch: layer " + std::to_string(l) + " has no nodes");
    if ((l == 0 || l + 1 == layers.size()) && spec.multiplicative != 0)
      throw std::invalid_argument("arch: input and output layers cannot hold multiplication nodes");
  }
}

ArchSpec parse_arch(const std::string& text, int grid, int order) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw std::invalid_argument("arch: cannot parse '" + text + "'");
  }
  if (!doc.is_array()) throw std::invalid_argument("arch: expected a bracketed list");

  ArchSpec arch;
  arch.grid = grid;
  arch.order = order;
  for (const auto& entry : doc) {
    if (entry.is_number_integer()) {
      arch.layers.push_back({entry.get<int>(), 0});
    } else if (entry.is_array() && entry.size() == 2 && entry[0].is_number_integer() &&
               entry[1].is_number_integer()) {
      arch.layers.push_back({entry[0].get<int>(), entry[1].get<int>()});
    } else {
      throw std::invalid_argument("arch: bad layer entry " + entry.dump());
    }
  }
  arch.validate();
  return arch;
}

std::string format_arch(const ArchSpec& arch) {
  std::string out = "[";
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    if (l) out += ",";
    const auto& s = arch.layers[l];
    if (s.multiplicative == 0)
      out += std::to_string(s.additive);
    else
      out += "[" + std::to_string(s.additive) + "," + std::to_string(s.multiplicative) + "]";
  }
  return out + "]";
}

}  // namespace kanfric
