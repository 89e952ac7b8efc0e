#pragma once

#include <string>

#include "radkit/geometry.hpp"

namespace radkit {

/// 8-bit grayscale PNG, min-max scaled; power maps are shown in dB when `log_scale`.
/// Row 0 is the top image row. A constant map renders black.
std::string render_png(const Map2D& map, bool log_scale = true);

}  // namespace radkit
