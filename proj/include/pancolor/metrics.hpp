#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "pancolor/raster.hpp"

namespace pancolor::metrics {

// With-reference and no-reference fusion quality measures. Suite-level
// functions remap unit_signed inputs to [0, 1] so peak = 1 uniformly;
// the individual operators work on the values they are given (SAM remaps
// internally because angles need non-negative vectors).

// Mean per-pixel spectral angle in degrees. Zero-norm pixels are skipped;
// an all-zero image is an error.
double sam_degrees(const Raster& pred, const Raster& ref);

// 100 * (1/ratio) * sqrt(mean_b (RMSE_b / mean(ref_b))^2).
double ergas(const Raster& pred, const Raster& ref, int ratio = 4);

// Pearson correlation of Laplacian high-pass images, averaged over bands.
// Bands whose high-pass variance vanishes are reported, not averaged.
struct SccResult {
    double value = 0.0;
    int degenerate_bands = 0;
};
SccResult scc(const Raster& pred, const Raster& ref);

// Universal image quality index over sliding windows (single band).
// Degenerate windows use the two-factor decomposition limits: the luminance
// factor is 1 when both means vanish and the structure factor is 1 when both
// variances vanish.
double uiqi(const Raster& pred_band, const Raster& ref_band, int window = 32, int step = 32);

// Mean of uiqi over bands.
double qave(const Raster& pred, const Raster& ref, int window = 32, int step = 32);

// Hypercomplex universal quality index (complex for C=2, quaternion for C=4,
// octonion for C=8) over distinct windows.
double q2n(const Raster& pred, const Raster& ref, int window = 32);

// 10*log10(peak^2 / MSE); identical inputs give the +infinity sentinel.
double psnr(const Raster& pred, const Raster& ref, double peak);

// Standard SSIM: 11x11 Gaussian window sigma 1.5, K1 = 0.01, K2 = 0.03,
// valid-region mean; multiband inputs are averaged over per-band SSIM.
double ssim(const Raster& pred, const Raster& ref, double peak);

struct NoRefScores {
    double d_lambda = 0.0;
    double d_s = 0.0;
    double qnr = 0.0;
};

// Spectral distortion (inter-band Q differences), spatial distortion
// (band-vs-PAN Q differences against the degraded PAN) and their product
// form QNR = (1 - D_lambda)(1 - D_s). Q windows are ratio-scaled: `window`
// at fused scale, window/ratio at MS scale. PAN degradation is bicubic,
// matching the training pipeline.
NoRefScores no_reference_suite(const Raster& fused, const Raster& ms, const Raster& pan,
                               int ratio = 4, int window = 32);

struct SharpnessRow {
    double psnr = 0.0;
    double scc = 0.0;
    double ssim = 0.0;
};

struct SharpnessReport {
    SharpnessRow reduced_pan;          // bicubic-reduced PAN vs grayscale MS
    SharpnessRow blurred_reduced_pan;  // 5x5 sigma-2 Gaussian of the above
};

SharpnessReport sharpness_report(const Raster& pan, const Raster& ms, int ratio = 4);
std::string sharpness_report_csv(const SharpnessReport& report);

// The Table-style with-reference scores for one patch.
struct ReferenceScores {
    double qave = 0.0;
    double q = 0.0;  // q2n
    double scc = 0.0;
    double sam = 0.0;
    double ergas = 0.0;
};
ReferenceScores reference_suite(const Raster& pred, const Raster& ref, int ratio = 4);

struct MetricReport {
    std::vector<std::pair<std::string, std::map<std::string, double>>> per_patch;
    std::map<std::string, double> aggregate;  // arithmetic mean of per-patch values
    nlohmann::json config_echo;
};

MetricReport aggregate_report(
    std::vector<std::pair<std::string, std::map<std::string, double>>> per_patch,
    nlohmann::json config_echo);
// Non-finite values serialize as the strings "inf"/"-inf"/"nan".
nlohmann::json metric_report_to_json(const MetricReport& report);
std::string metric_report_to_csv(const MetricReport& report);

}  // namespace pancolor::metrics
