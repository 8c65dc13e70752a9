#pragma once

#include <string>

#include "kanfric/friction.hpp"

namespace kanfric {

/// Reads `velocity,torque[,time][,tau_mcg]...`: a header line naming the
/// columns (velocity and torque required, in any position), then one sample
/// per row. Extra columns become named channels. Throws FormatError naming
/// the line and column on malformed input.
FrictionDataset read_csv(const std::string& path);

/// Writes velocity,torque then channels ("time", "tau_mcg" first, the rest
/// by name) with 17 significant digits.
void write_csv(const std::string& path, const FrictionDataset& data);

/// Formats a double so that it parses back to the same value.
std::string format_double(double value);

}  // namespace kanfric
