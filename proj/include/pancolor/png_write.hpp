#pragma once

#include <filesystem>

#include "pancolor/raster.hpp"

namespace pancolor::io {

// 8-bit PNG preview with a per-band 2%-98% percentile stretch. Rasters with
// three or more bands render the first three as RGB; single-band rasters
// render grayscale.
void write_png_preview(const std::filesystem::path& path, const Raster& r);

}  // namespace pancolor::io
