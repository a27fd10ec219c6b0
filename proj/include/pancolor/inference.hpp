#pragma once

#include "pancolor/generator.hpp"
#include "pancolor/pipeline.hpp"
#include "pancolor/raster.hpp"

namespace pancolor {

enum class GuidanceKind { gms, pan };

GuidanceKind guidance_from_string(const std::string& s);
std::string to_string(GuidanceKind g);

// Reduced-resolution pansharpening of one bundle: G(x_pan, x_ms) or
// G(x_gms, x_ms) in eval mode. Random downsampling never applies here.
Raster infer_reduced(PanColorGenerator& gen, const PatchBundle& bundle, GuidanceKind guidance);

// Full-resolution pansharpening: G(y_pan, bicubic-upsampled y_ms). The MS
// upsample uses the same resampling spec as the training degradation.
Raster infer_full(PanColorGenerator& gen, const Raster& y_pan, const Raster& y_ms,
                  const ResampleSpec& spec = {});

// Linear feather profile for tile blending: 0 at the tile edge rising to 1
// once `overlap` pixels inside (identically 1 when overlap is 0).
double feather_weight(double distance_from_edge, int overlap);

// Scene-scale inference: overlapping tiles (PAN-scale extent `tile`),
// linearly feathered where they meet. With overlap 0 and an aligned grid
// each pixel is copied verbatim from its single tile.
Raster infer_scene_tiled(PanColorGenerator& gen, const Raster& pan_scene, const Raster& ms_scene,
                         int tile = 1024, int overlap = 0, const ResampleSpec& spec = {});

}  // namespace pancolor
