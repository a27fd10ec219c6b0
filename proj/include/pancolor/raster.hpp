#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pancolor {

enum class ValueRange {
    unit_signed,  // [-1, 1]
    unit,         // [0, 1]
    raw_dn,       // digital numbers, bit depth declared by a NormalizationSpec
};

// H x W x C image tensor, row-major with interleaved channels. The universal
// currency of the pipeline; all values must stay finite and inside the
// declared range.
struct Raster {
    int h = 0;
    int w = 0;
    int c = 0;
    ValueRange range = ValueRange::unit_signed;
    std::vector<std::string> band_names;  // optional; empty means unnamed
    std::vector<double> data;             // size h*w*c

    static Raster zeros(int h, int w, int c, ValueRange range = ValueRange::unit_signed);
    static Raster constant(int h, int w, int c, double value,
                           ValueRange range = ValueRange::unit_signed);

    double& at(int y, int x, int band) { return data[(static_cast<size_t>(y) * w + x) * c + band]; }
    double at(int y, int x, int band) const {
        return data[(static_cast<size_t>(y) * w + x) * c + band];
    }
    size_t size() const { return data.size(); }
    bool same_shape(const Raster& other) const {
        return h == other.h && w == other.w && c == other.c;
    }
    std::string band_name(int band) const;
};

// Throws ValidationError if shape/range invariants fail (finite values, range
// bounds for unit and unit_signed).
void validate_raster(const Raster& r, const std::string& role = "raster");

enum class NormalizationMode { fixed_bit_depth, per_scene_minmax };

// Invertible affine map between raw DN values and [-1, 1].
struct NormalizationSpec {
    int bit_depth = 12;  // one of 8, 11, 12, 16
    NormalizationMode mode = NormalizationMode::fixed_bit_depth;
    // Populated for per_scene_minmax (either by fit_minmax or by hand); the
    // pair must be carried along for denormalize to invert the map.
    std::optional<double> scene_min;
    std::optional<double> scene_max;

    void validate() const;
};

// Fills scene_min / scene_max from the data, keeping the other fields.
NormalizationSpec fit_minmax(const Raster& r, NormalizationSpec spec);

Raster normalize(const Raster& r, const NormalizationSpec& spec);
Raster denormalize(const Raster& r, const NormalizationSpec& spec);

// Unweighted per-pixel mean over all bands (including NIR). C must be >= 2.
Raster to_grayscale(const Raster& ms);

struct ResampleSpec {
    // Keys cubic-convolution sharpness parameter; -0.5 is Catmull-Rom, the
    // common convolutional choice.
    double bicubic_a = -0.5;
};

// Separable bicubic resampling with edge-clamp boundaries. Reproduces
// constant images exactly and never moves the grid origin (half-pixel
// center convention).
Raster resize_bicubic(const Raster& r, int out_h, int out_w, const ResampleSpec& spec = {});

// Convolution with a normalized discrete Gaussian, mirror-padded boundaries
// (half-sample symmetric, so the image mean is preserved). kernel_size odd.
Raster gaussian_blur(const Raster& r, int kernel_size, double sigma);

// Affine remap unit_signed -> unit. Rasters already in unit range pass
// through. Used by the metric suites so peak = 1 uniformly.
Raster to_unit_range(const Raster& r);

Raster extract_band(const Raster& r, int band);
Raster crop(const Raster& r, int y0, int x0, int h, int w);

}  // namespace pancolor
