#pragma once

#include <string>

#include "kanfric/network.hpp"

namespace kanfric {

inline constexpr int kCheckpointFormatVersion = 1;

/// JSON document holding arch, per-input grids, parameters (row-major),
/// masks, normalization maps and seed. Doubles are written in shortest
/// round-trip form, so load(save(net)) is bitwise identical. See
/// docs/checkpoint.md for the schema.
std::string checkpoint_to_string(const KanNetworkd& net);

/// Throws FormatError naming the offending field path.
KanNetworkd checkpoint_from_string(const std::string& text);

void save_checkpoint(const KanNetworkd& net, const std::string& path);
KanNetworkd load_checkpoint(const std::string& path);

}  // namespace kanfric
