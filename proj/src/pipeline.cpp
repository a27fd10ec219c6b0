#include "pancolor/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "pancolor/errors.hpp"
#include "pancolor/nn/layers.hpp"

namespace pancolor {

void AugmentSpec::validate() const {
    if (fixed_factor < 2) throw ValidationError("AugmentSpec: fixed_factor must be >= 2");
    if (rd_min < 1 || rd_min > rd_max)
        throw ValidationError("AugmentSpec: need 1 <= rd_min <= rd_max");
}

Raster degrade_fixed(const Raster& y_ms, int factor, const ResampleSpec& spec,
                     PipelineCounters* counters) {
    if (factor < 2) throw ValidationError("degrade_fixed: factor must be >= 2");
    const int mid_h = std::max(1, static_cast<int>(std::lround(static_cast<double>(y_ms.h) / factor)));
    const int mid_w = std::max(1, static_cast<int>(std::lround(static_cast<double>(y_ms.w) / factor)));
    if (counters) ++counters->fixed_degrades;
    return resize_bicubic(resize_bicubic(y_ms, mid_h, mid_w, spec), y_ms.h, y_ms.w, spec);
}

std::pair<Raster, int> degrade_random(const Raster& y_ms, const AugmentSpec& spec, Rng& rng,
                                      const ResampleSpec& resample, PipelineCounters* counters) {
    spec.validate();
    if (spec.mode != AugmentMode::random_downsample)
        throw ValidationError("degrade_random requires mode = random_downsample");
    const int s = rng.uniform_int(spec.rd_min, spec.rd_max);
    if (counters) ++counters->random_downsample_draws;
    Raster out = resize_bicubic(resize_bicubic(y_ms, s, s, resample), y_ms.h, y_ms.w, resample);
    return {std::move(out), s};
}

namespace {

// Catmull-Rom resampling can overshoot the open interval by a ulp or a few
// percent near sharp edges; bundle rasters carry the unit_signed contract.
void clamp_unit_signed(Raster& r) {
    for (double& v : r.data) v = std::clamp(v, -1.0, 1.0);
}

}  // namespace

PatchBundle make_bundle(const Raster& y_ms, const std::optional<Raster>& y_pan,
                        const AugmentSpec& spec, Rng& rng, PatchMeta meta,
                        PipelineCounters* counters) {
    if (y_ms.c < 2) throw ValidationError("make_bundle: y_ms must be multispectral (C >= 2)");
    if (y_ms.range != ValueRange::unit_signed)
        throw ValidationError("make_bundle: y_ms must be unit_signed");
    PatchBundle b;
    b.y_ms = y_ms;
    b.x_gms = to_grayscale(y_ms);
    if (spec.mode == AugmentMode::random_downsample) {
        auto [degraded, s] = degrade_random(y_ms, spec, rng, {}, counters);
        b.x_ms = std::move(degraded);
        meta.downsample_size_used = s;
    } else {
        b.x_ms = degrade_fixed(y_ms, spec.fixed_factor, {}, counters);
        meta.downsample_size_used =
            static_cast<int>(std::lround(static_cast<double>(y_ms.h) / spec.fixed_factor));
    }
    clamp_unit_signed(b.x_ms);
    if (y_pan) {
        if (y_pan->c != 1)
            throw ValidationError("make_bundle: y_pan must be single-band");
        if (y_pan->range != ValueRange::unit_signed)
            throw ValidationError("make_bundle: y_pan must be unit_signed");
        if (y_pan->h != 4 * y_ms.h || y_pan->w != 4 * y_ms.w)
            throw ValidationError("make_bundle: y_pan must be 4x the y_ms extent");
        b.y_pan = *y_pan;
        b.x_pan = resize_bicubic(*y_pan, y_ms.h, y_ms.w);
        clamp_unit_signed(*b.x_pan);
    }
    b.meta = std::move(meta);
    return b;
}

std::vector<TilePair> tile_scene(const Raster& ms_scene, const Raster& pan_scene, int stride,
                                 int ms_tile) {
    if (stride < 1) throw ValidationError("tile_scene: stride must be positive");
    if (ms_tile < 1) throw ValidationError("tile_scene: tile size must be positive");
    if (ms_scene.c < 2) throw ValidationError("tile_scene: ms scene must be multispectral");
    if (pan_scene.c != 1) throw ValidationError("tile_scene: pan scene must be single-band");
    // 4x ratio within integer truncation.
    if (std::abs(pan_scene.h - 4 * ms_scene.h) > 3 || std::abs(pan_scene.w - 4 * ms_scene.w) > 3)
        throw ValidationError("tile_scene: pan/ms extent ratio is not 4 within rounding");

    const int pan_tile = 4 * ms_tile;
    std::vector<TilePair> tiles;
    int tile_row = 0;
    for (int y0 = 0; y0 + ms_tile <= ms_scene.h; y0 += stride, ++tile_row) {
        if (4 * y0 + pan_tile > pan_scene.h) break;
        int tile_col = 0;
        for (int x0 = 0; x0 + ms_tile <= ms_scene.w; x0 += stride, ++tile_col) {
            if (4 * x0 + pan_tile > pan_scene.w) break;
            TilePair pair;
            pair.y_ms = crop(ms_scene, y0, x0, ms_tile, ms_tile);
            pair.y_pan = crop(pan_scene, 4 * y0, 4 * x0, pan_tile, pan_tile);
            pair.tile_row = tile_row;
            pair.tile_col = tile_col;
            tiles.push_back(std::move(pair));
        }
    }
    return tiles;
}

nn::Tensor raster_to_tensor(const Raster& r) {
    nn::Tensor t(1, r.c, r.h, r.w);
    set_batch_sample(t, 0, r);
    return t;
}

void set_batch_sample(nn::Tensor& batch, int sample, const Raster& r) {
    if (batch.c != r.c || batch.h != r.h || batch.w != r.w)
        throw ValidationError("set_batch_sample: raster does not match tensor shape");
    for (int b = 0; b < r.c; ++b) {
        double* plane = batch.plane(sample, b);
        for (int y = 0; y < r.h; ++y)
            for (int x = 0; x < r.w; ++x) plane[static_cast<size_t>(y) * r.w + x] = r.at(y, x, b);
    }
}

Raster tensor_to_raster(const nn::Tensor& t, int sample, ValueRange range) {
    if (sample < 0 || sample >= t.n) throw ValidationError("tensor_to_raster: bad sample index");
    Raster r = Raster::zeros(t.h, t.w, t.c, range);
    for (int b = 0; b < t.c; ++b) {
        const double* plane = t.plane(sample, b);
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) r.at(y, x, b) = plane[static_cast<size_t>(y) * t.w + x];
    }
    return r;
}

nn::Tensor stack_condition(const nn::Tensor& gms, const nn::Tensor& ms, const nn::Tensor& target) {
    return nn::concat_channels(nn::concat_channels(gms, ms), target);
}

std::pair<nn::Tensor, nn::Tensor> assemble_discriminator_batch(
    std::span<const PatchBundle> bundles, std::span<const Raster> fakes) {
    if (bundles.empty()) throw ValidationError("assemble_discriminator_batch: empty batch");
    if (bundles.size() != fakes.size())
        throw ValidationError("assemble_discriminator_batch: bundle/fake count mismatch");
    const int n = static_cast<int>(bundles.size());
    const Raster& first = bundles[0].y_ms;
    nn::Tensor gms(n, 1, first.h, first.w);
    nn::Tensor ms(n, first.c, first.h, first.w);
    nn::Tensor real(n, first.c, first.h, first.w);
    nn::Tensor fake(n, first.c, first.h, first.w);
    for (int i = 0; i < n; ++i) {
        const PatchBundle& b = bundles[i];
        if (!b.y_ms.same_shape(first) || !fakes[i].same_shape(first))
            throw ValidationError("assemble_discriminator_batch: inconsistent shapes in batch");
        set_batch_sample(gms, i, b.x_gms);
        set_batch_sample(ms, i, b.x_ms);
        set_batch_sample(real, i, b.y_ms);
        set_batch_sample(fake, i, fakes[i]);
    }
    return {stack_condition(gms, ms, real), stack_condition(gms, ms, fake)};
}

}  // namespace pancolor
