#pragma once

#include <string>

#include "sketchinpaint/grid.hpp"

namespace sketchinpaint {

// 8-bit PNG to a (1, channels, H, W) grid in [0, 1]. channels is 1 or 3; colour
// inputs are converted to luma for 1, grey inputs replicated for 3, alpha dropped.
Grid read_png(const std::string& path, int channels);

// Writes a (1, 1 or 3, H, W) grid as 8-bit PNG, value v stored as round(255 * clamp(v, 0, 1)).
void write_png(const std::string& path, const Grid& image);

// Single plane of 8-bit samples, (1, 1, H, W) with integer values 0..255.
void write_png_bytes(const std::string& path, const Grid& bytes);

}  // namespace sketchinpaint
