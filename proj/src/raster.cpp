#include "pancolor/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pancolor/errors.hpp"

namespace pancolor {

Raster Raster::zeros(int h, int w, int c, ValueRange range) {
    return constant(h, w, c, 0.0, range);
}

Raster Raster::constant(int h, int w, int c, double value, ValueRange range) {
    if (h < 1 || w < 1 || c < 1) throw ValidationError("raster dimensions must be positive");
    Raster r;
    r.h = h;
    r.w = w;
    r.c = c;
    r.range = range;
    r.data.assign(static_cast<size_t>(h) * w * c, value);
    return r;
}

std::string Raster::band_name(int band) const {
    if (band >= 0 && band < static_cast<int>(band_names.size())) return band_names[band];
    return "band" + std::to_string(band);
}

void validate_raster(const Raster& r, const std::string& role) {
    if (r.h < 1 || r.w < 1 || r.c < 1)
        throw ValidationError(role + ": dimensions must satisfy H,W,C >= 1");
    if (r.data.size() != static_cast<size_t>(r.h) * r.w * r.c)
        throw ValidationError(role + ": data size does not match H*W*C");
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    if (r.range == ValueRange::unit_signed) {
        lo = -1.0;
        hi = 1.0;
    } else if (r.range == ValueRange::unit) {
        lo = 0.0;
        hi = 1.0;
    }
    for (double v : r.data) {
        if (!std::isfinite(v)) throw ValidationError(role + ": non-finite value");
        if (v < lo || v > hi) throw ValidationError(role + ": value outside declared range");
    }
}

void NormalizationSpec::validate() const {
    if (bit_depth != 8 && bit_depth != 11 && bit_depth != 12 && bit_depth != 16)
        throw ValidationError("bit_depth must be one of 8, 11, 12, 16");
    if (mode == NormalizationMode::per_scene_minmax && scene_min && scene_max &&
        !(*scene_min < *scene_max))
        throw ValidationError("per-scene min/max must satisfy min < max");
}

NormalizationSpec fit_minmax(const Raster& r, NormalizationSpec spec) {
    auto [lo, hi] = std::minmax_element(r.data.begin(), r.data.end());
    spec.scene_min = *lo;
    spec.scene_max = *hi;
    if (!(*spec.scene_min < *spec.scene_max))
        throw ValidationError("cannot fit min/max normalization on a constant scene");
    return spec;
}

namespace {

// Affine x -> scale*(x - offset) - 1 mapping [offset, offset+2/scale] to [-1,1].
struct AffineMap {
    double offset;
    double scale;
};

AffineMap normalization_map(const NormalizationSpec& spec) {
    spec.validate();
    if (spec.mode == NormalizationMode::fixed_bit_depth) {
        const double peak = std::pow(2.0, spec.bit_depth) - 1.0;
        return {0.0, 2.0 / peak};
    }
    if (!spec.scene_min || !spec.scene_max)
        throw ValidationError("per_scene_minmax requires scene_min/scene_max (see fit_minmax)");
    return {*spec.scene_min, 2.0 / (*spec.scene_max - *spec.scene_min)};
}

}  // namespace

Raster normalize(const Raster& r, const NormalizationSpec& spec) {
    if (r.range != ValueRange::raw_dn)
        throw ValidationError("normalize expects a raw_dn raster");
    const AffineMap map = normalization_map(spec);
    const double dn_max = spec.mode == NormalizationMode::fixed_bit_depth
                              ? std::pow(2.0, spec.bit_depth) - 1.0
                              : *spec.scene_max;
    const double dn_min = spec.mode == NormalizationMode::fixed_bit_depth ? 0.0 : *spec.scene_min;
    Raster out = r;
    out.range = ValueRange::unit_signed;
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
            for (int b = 0; b < r.c; ++b) {
                const double v = r.at(y, x, b);
                if (v < dn_min || v > dn_max)
                    throw ValidationError("normalize: DN value " + std::to_string(v) +
                                          " outside [" + std::to_string(dn_min) + ", " +
                                          std::to_string(dn_max) + "] in band " + r.band_name(b));
                out.at(y, x, b) = map.scale * (v - map.offset) - 1.0;
            }
        }
    }
    return out;
}

Raster denormalize(const Raster& r, const NormalizationSpec& spec) {
    if (r.range != ValueRange::unit_signed)
        throw ValidationError("denormalize expects a unit_signed raster");
    const AffineMap map = normalization_map(spec);
    Raster out = r;
    out.range = ValueRange::raw_dn;
    for (size_t i = 0; i < r.data.size(); ++i)
        out.data[i] = (r.data[i] + 1.0) / map.scale + map.offset;
    return out;
}

Raster to_grayscale(const Raster& ms) {
    if (ms.c < 2) throw ValidationError("to_grayscale requires at least two bands");
    Raster out = Raster::zeros(ms.h, ms.w, 1, ms.range);
    const double inv_c = 1.0 / ms.c;
    for (int y = 0; y < ms.h; ++y) {
        for (int x = 0; x < ms.w; ++x) {
            double sum = 0.0;
            for (int b = 0; b < ms.c; ++b) sum += ms.at(y, x, b);
            out.at(y, x, 0) = sum * inv_c;
        }
    }
    return out;
}

namespace {

// Keys cubic convolution kernel; support [-2, 2], partition of unity.
double cubic_weight(double x, double a) {
    x = std::fabs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

// One separable pass over a single axis. `length` is the source extent along
// the resampled axis, `out_len` the destination extent.
struct BicubicTaps {
    int base;          // index of the first of the four source samples
    double weight[4];  // kernel weights for base .. base+3
};

std::vector<BicubicTaps> bicubic_taps(int in_len, int out_len, double a) {
    std::vector<BicubicTaps> taps(out_len);
    const double scale = static_cast<double>(in_len) / out_len;
    for (int i = 0; i < out_len; ++i) {
        // Half-pixel center convention: output center maps into input space.
        const double src = (i + 0.5) * scale - 0.5;
        const double floor_src = std::floor(src);
        const double frac = src - floor_src;
        taps[i].base = static_cast<int>(floor_src) - 1;
        for (int t = 0; t < 4; ++t) taps[i].weight[t] = cubic_weight(frac - (t - 1), a);
    }
    return taps;
}

}  // namespace

Raster resize_bicubic(const Raster& r, int out_h, int out_w, const ResampleSpec& spec) {
    if (out_h < 1 || out_w < 1) throw ValidationError("resize_bicubic: output size must be >= 1");

    const auto col_taps = bicubic_taps(r.w, out_w, spec.bicubic_a);
    const auto row_taps = bicubic_taps(r.h, out_h, spec.bicubic_a);

    // Horizontal pass, then vertical.
    Raster mid = Raster::zeros(r.h, out_w, r.c, r.range);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const BicubicTaps& tp = col_taps[x];
            for (int b = 0; b < r.c; ++b) {
                double acc = 0.0;
                for (int t = 0; t < 4; ++t)
                    acc += tp.weight[t] * r.at(y, clamp_index(tp.base + t, r.w), b);
                mid.at(y, x, b) = acc;
            }
        }
    }
    Raster out = Raster::zeros(out_h, out_w, r.c, r.range);
    out.band_names = r.band_names;
    for (int y = 0; y < out_h; ++y) {
        const BicubicTaps& tp = row_taps[y];
        for (int x = 0; x < out_w; ++x) {
            for (int b = 0; b < r.c; ++b) {
                double acc = 0.0;
                for (int t = 0; t < 4; ++t)
                    acc += tp.weight[t] * mid.at(clamp_index(tp.base + t, r.h), x, b);
                out.at(y, x, b) = acc;
            }
        }
    }
    return out;
}

namespace {

// Half-sample mirror: ...x1 x0 | x0 x1 ... xn-1 | xn-1 xn-2...
int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i = ((i % period) + period) % period;
    return i < n ? i : period - 1 - i;
}

}  // namespace

Raster gaussian_blur(const Raster& r, int kernel_size, double sigma) {
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ValidationError("gaussian_blur: kernel_size must be odd and positive");
    if (!(sigma > 0.0)) throw ValidationError("gaussian_blur: sigma must be positive");

    const int radius = kernel_size / 2;
    std::vector<double> kernel(kernel_size);
    double sum = 0.0;
    for (int i = 0; i < kernel_size; ++i) {
        const double d = i - radius;
        kernel[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += kernel[i];
    }
    for (double& k : kernel) k /= sum;

    Raster mid = Raster::zeros(r.h, r.w, r.c, r.range);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            for (int b = 0; b < r.c; ++b) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    acc += kernel[t + radius] * r.at(y, mirror_index(x + t, r.w), b);
                mid.at(y, x, b) = acc;
            }
    Raster out = Raster::zeros(r.h, r.w, r.c, r.range);
    out.band_names = r.band_names;
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            for (int b = 0; b < r.c; ++b) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    acc += kernel[t + radius] * mid.at(mirror_index(y + t, r.h), x, b);
                out.at(y, x, b) = acc;
            }
    return out;
}

Raster to_unit_range(const Raster& r) {
    if (r.range == ValueRange::unit) return r;
    if (r.range != ValueRange::unit_signed)
        throw ValidationError("to_unit_range expects unit or unit_signed input");
    Raster out = r;
    out.range = ValueRange::unit;
    for (double& v : out.data) v = (v + 1.0) * 0.5;
    return out;
}

Raster extract_band(const Raster& r, int band) {
    if (band < 0 || band >= r.c) throw ValidationError("extract_band: band index out of range");
    Raster out = Raster::zeros(r.h, r.w, 1, r.range);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x) out.at(y, x, 0) = r.at(y, x, band);
    return out;
}

Raster crop(const Raster& r, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > r.h || x0 + w > r.w)
        throw ValidationError("crop: window outside raster bounds");
    Raster out = Raster::zeros(h, w, r.c, r.range);
    out.band_names = r.band_names;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int b = 0; b < r.c; ++b) out.at(y, x, b) = r.at(y0 + y, x0 + x, b);
    return out;
}

}  // namespace pancolor
