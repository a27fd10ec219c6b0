#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pancolor/nn/tensor.hpp"
#include "pancolor/raster.hpp"
#include "pancolor/rng.hpp"

namespace pancolor {

enum class AugmentMode { fixed_ratio, random_downsample };

struct AugmentSpec {
    AugmentMode mode = AugmentMode::fixed_ratio;
    int fixed_factor = 4;
    int rd_min = 20;
    int rd_max = 80;
    uint64_t rng_seed = 0;

    void validate() const;
};

struct PatchMeta {
    std::string scene_id;
    int tile_row = 0;
    int tile_col = 0;
    int downsample_size_used = 0;
};

// One aligned training sample. x_ms is the degraded-then-upsampled copy of
// y_ms, x_gms its band mean, x_pan the 4x reduced panchromatic patch when a
// panchromatic raster is available.
struct PatchBundle {
    Raster y_ms;
    Raster x_ms;
    Raster x_gms;
    std::optional<Raster> x_pan;
    std::optional<Raster> y_pan;
    PatchMeta meta;
};

// Instrumentation for the mode-separation contract: which guidance rasters
// training consumed and which degradation paths ran.
struct PipelineCounters {
    long gms_guidance_reads = 0;
    long pan_guidance_reads = 0;
    long random_downsample_draws = 0;
    long fixed_degrades = 0;
};

// Downsample by `factor` (intermediate extent rounded) and upsample back.
Raster degrade_fixed(const Raster& y_ms, int factor, const ResampleSpec& spec = {},
                     PipelineCounters* counters = nullptr);

// Draws s uniformly from [rd_min, rd_max], resizes to s x s and back.
// Training-time augmentation only; inference never calls this.
std::pair<Raster, int> degrade_random(const Raster& y_ms, const AugmentSpec& spec, Rng& rng,
                                      const ResampleSpec& resample = {},
                                      PipelineCounters* counters = nullptr);

PatchBundle make_bundle(const Raster& y_ms, const std::optional<Raster>& y_pan,
                        const AugmentSpec& spec, Rng& rng, PatchMeta meta = {},
                        PipelineCounters* counters = nullptr);

struct TilePair {
    Raster y_ms;   // ms_tile x ms_tile x 4
    Raster y_pan;  // 4*ms_tile x 4*ms_tile x 1
    int tile_row = 0;
    int tile_col = 0;
};

// Aligned tiling at the 4x sensor ratio; stride in MS pixels, partial border
// tiles discarded. PAN tile origin is always 4x the MS tile origin.
std::vector<TilePair> tile_scene(const Raster& ms_scene, const Raster& pan_scene, int stride,
                                 int ms_tile = 256);

// Channel concatenation [GMS(1) | MS(4) | target(4)] -> 9-channel stack.
nn::Tensor stack_condition(const nn::Tensor& gms, const nn::Tensor& ms, const nn::Tensor& target);

// Builds (real_stack, fake_stack) batches for the discriminator. Real stacks
// end in y_ms, fake stacks in the supplied generator outputs.
std::pair<nn::Tensor, nn::Tensor> assemble_discriminator_batch(
    std::span<const PatchBundle> bundles, std::span<const Raster> fakes);

// Raster (HWC) <-> network tensor (NCHW) conversion.
nn::Tensor raster_to_tensor(const Raster& r);
void set_batch_sample(nn::Tensor& batch, int sample, const Raster& r);
Raster tensor_to_raster(const nn::Tensor& t, int sample, ValueRange range);

}  // namespace pancolor
