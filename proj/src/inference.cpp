#include "pancolor/inference.hpp"

#include <algorithm>
#include <cmath>

#include "pancolor/errors.hpp"
#include "pancolor/parallel.hpp"

namespace pancolor {

using nn::Mode;
using nn::Tensor;

GuidanceKind guidance_from_string(const std::string& s) {
    if (s == "gms") return GuidanceKind::gms;
    if (s == "pan") return GuidanceKind::pan;
    throw ValidationError("unknown guidance kind: " + s);
}

std::string to_string(GuidanceKind g) { return g == GuidanceKind::gms ? "gms" : "pan"; }

Raster infer_reduced(PanColorGenerator& gen, const PatchBundle& bundle, GuidanceKind guidance) {
    const Raster* guide = nullptr;
    if (guidance == GuidanceKind::pan) {
        if (!bundle.x_pan)
            throw ValidationError("infer_reduced: guidance=pan but the bundle has no x_pan");
        guide = &*bundle.x_pan;
    } else {
        guide = &bundle.x_gms;
    }
    Tensor out = gen.forward(raster_to_tensor(*guide), raster_to_tensor(bundle.x_ms), Mode::eval);
    return tensor_to_raster(out, 0, ValueRange::unit_signed);
}

Raster infer_full(PanColorGenerator& gen, const Raster& y_pan, const Raster& y_ms,
                  const ResampleSpec& spec) {
    if (y_pan.c != 1) throw ValidationError("infer_full: y_pan must be single-band");
    if (y_pan.h != 4 * y_ms.h || y_pan.w != 4 * y_ms.w)
        throw ValidationError("infer_full: PAN extent must be 4x the MS extent");
    const Raster ms_up = resize_bicubic(y_ms, y_pan.h, y_pan.w, spec);
    Tensor out = gen.forward(raster_to_tensor(y_pan), raster_to_tensor(ms_up), Mode::eval);
    return tensor_to_raster(out, 0, ValueRange::unit_signed);
}

double feather_weight(double distance_from_edge, int overlap) {
    if (overlap <= 0) return 1.0;
    return std::clamp(distance_from_edge / overlap, 0.0, 1.0);
}

namespace {

std::vector<int> tile_origins(int scene, int tile, int step) {
    std::vector<int> origins;
    for (int o = 0; o + tile <= scene; o += step) origins.push_back(o);
    if (origins.empty() || origins.back() + tile < scene) origins.push_back(scene - tile);
    return origins;
}

}  // namespace

Raster infer_scene_tiled(PanColorGenerator& gen, const Raster& pan_scene, const Raster& ms_scene,
                         int tile, int overlap, const ResampleSpec& spec) {
    if (pan_scene.c != 1) throw ValidationError("infer_scene_tiled: pan must be single-band");
    if (pan_scene.h != 4 * ms_scene.h || pan_scene.w != 4 * ms_scene.w)
        throw ValidationError("infer_scene_tiled: PAN extent must be 4x the MS extent");
    if (tile % 4 != 0) throw ValidationError("infer_scene_tiled: tile must be divisible by 4");
    if (overlap < 0 || overlap % 2 != 0 || overlap >= tile / 2)
        throw ValidationError("infer_scene_tiled: overlap must be even and < tile/2");
    if (overlap % 4 != 0)
        throw ValidationError("infer_scene_tiled: overlap must be divisible by 4 for MS alignment");
    if (pan_scene.h < tile || pan_scene.w < tile)
        throw ValidationError("infer_scene_tiled: scene smaller than one tile");

    const int step = tile - overlap;
    const auto ys = tile_origins(pan_scene.h, tile, step);
    const auto xs = tile_origins(pan_scene.w, tile, step);

    // Inference runs tile-parallel (eval-mode forwards only read the shared
    // parameters); stitching stays a single-writer reduction in grid order.
    std::vector<std::pair<int, int>> origins;
    for (int y0 : ys)
        for (int x0 : xs) origins.emplace_back(y0, x0);
    std::vector<Raster> preds(origins.size());
    parallel_for(origins.size(), [&](size_t i) {
        const auto [y0, x0] = origins[i];
        const Raster pan_tile = crop(pan_scene, y0, x0, tile, tile);
        const Raster ms_tile = crop(ms_scene, y0 / 4, x0 / 4, tile / 4, tile / 4);
        preds[i] = infer_full(gen, pan_tile, ms_tile, spec);
    });

    Raster out = Raster::zeros(pan_scene.h, pan_scene.w, ms_scene.c, ValueRange::unit_signed);
    if (overlap == 0 && (pan_scene.h % tile == 0) && (pan_scene.w % tile == 0)) {
        // Aligned grid: verbatim copy per tile, bit-exact with single-tile runs.
        for (size_t i = 0; i < origins.size(); ++i) {
            const auto [y0, x0] = origins[i];
            for (int y = 0; y < tile; ++y)
                for (int x = 0; x < tile; ++x)
                    for (int b = 0; b < out.c; ++b)
                        out.at(y0 + y, x0 + x, b) = preds[i].at(y, x, b);
        }
        return out;
    }

    std::vector<double> weight_sum(static_cast<size_t>(out.h) * out.w, 0.0);
    std::vector<double> accum(out.data.size(), 0.0);
    for (size_t i = 0; i < origins.size(); ++i) {
        const auto [y0, x0] = origins[i];
        const Raster& pred = preds[i];
        for (int y = 0; y < tile; ++y) {
            const double wy = std::min(feather_weight(y + 0.5, overlap),
                                       feather_weight(tile - y - 0.5, overlap));
            for (int x = 0; x < tile; ++x) {
                const double wx = std::min(feather_weight(x + 0.5, overlap),
                                           feather_weight(tile - x - 0.5, overlap));
                const double w = wy * wx;
                const size_t pix = static_cast<size_t>(y0 + y) * out.w + (x0 + x);
                weight_sum[pix] += w;
                for (int b = 0; b < out.c; ++b) accum[pix * out.c + b] += w * pred.at(y, x, b);
            }
        }
    }
    for (size_t pix = 0; pix < weight_sum.size(); ++pix) {
        const double w = weight_sum[pix];
        for (int b = 0; b < out.c; ++b)
            out.data[pix * out.c + b] = w > 0.0 ? accum[pix * out.c + b] / w : 0.0;
    }
    // Feathered averages of tanh outputs stay within the open interval, but
    // guard the range contract against rounding at the boundary.
    for (double& v : out.data) v = std::clamp(v, -1.0, 1.0);
    return out;
}

}  // namespace pancolor
