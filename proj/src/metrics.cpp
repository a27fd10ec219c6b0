#include "pancolor/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pancolor/errors.hpp"

namespace pancolor::metrics {

namespace {

constexpr double kPi = 3.14159265358979323846;

Raster remap_for_suite(const Raster& r) {
    return r.range == ValueRange::unit_signed ? to_unit_range(r) : r;
}

int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i = ((i % period) + period) % period;
    return i < n ? i : period - 1 - i;
}

}  // namespace

double sam_degrees(const Raster& pred, const Raster& ref) {
    if (!pred.same_shape(ref)) throw ValidationError("sam: shape mismatch");
    if (pred.c < 2) throw ValidationError("sam: needs at least two bands");
    const Raster p = remap_for_suite(pred);
    const Raster r = remap_for_suite(ref);
    double angle_sum = 0.0;
    long used = 0;
    for (int y = 0; y < p.h; ++y) {
        for (int x = 0; x < p.w; ++x) {
            double dot = 0.0, np = 0.0, nr = 0.0;
            for (int b = 0; b < p.c; ++b) {
                const double a = p.at(y, x, b), c = r.at(y, x, b);
                dot += a * c;
                np += a * a;
                nr += c * c;
            }
            if (np == 0.0 || nr == 0.0) continue;  // zero-norm pixels skipped
            const double cosv = std::clamp(dot / std::sqrt(np * nr), -1.0, 1.0);
            angle_sum += std::acos(cosv);
            ++used;
        }
    }
    if (used == 0) throw ValidationError("sam: every pixel has a zero-norm spectral vector");
    return angle_sum / static_cast<double>(used) * 180.0 / kPi;
}

double ergas(const Raster& pred, const Raster& ref, int ratio) {
    if (!pred.same_shape(ref)) throw ValidationError("ergas: shape mismatch");
    if (ratio < 1) throw ValidationError("ergas: ratio must be positive");
    const size_t pixels = static_cast<size_t>(pred.h) * pred.w;
    double acc = 0.0;
    for (int b = 0; b < pred.c; ++b) {
        double se = 0.0, mean_ref = 0.0;
        for (int y = 0; y < pred.h; ++y) {
            for (int x = 0; x < pred.w; ++x) {
                const double d = pred.at(y, x, b) - ref.at(y, x, b);
                se += d * d;
                mean_ref += ref.at(y, x, b);
            }
        }
        mean_ref /= static_cast<double>(pixels);
        if (mean_ref == 0.0)
            throw ValidationError("ergas: zero mean in reference " + ref.band_name(b));
        const double rmse = std::sqrt(se / static_cast<double>(pixels));
        acc += (rmse / mean_ref) * (rmse / mean_ref);
    }
    return 100.0 / static_cast<double>(ratio) * std::sqrt(acc / pred.c);
}

namespace {

// 4-neighbour Laplacian, mirror padded; the fixed high-pass for sCC.
std::vector<double> laplacian_highpass(const Raster& r, int band) {
    std::vector<double> out(static_cast<size_t>(r.h) * r.w);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
            const double c = r.at(y, x, band);
            const double up = r.at(mirror_index(y - 1, r.h), x, band);
            const double down = r.at(mirror_index(y + 1, r.h), x, band);
            const double left = r.at(y, mirror_index(x - 1, r.w), band);
            const double right = r.at(y, mirror_index(x + 1, r.w), band);
            out[static_cast<size_t>(y) * r.w + x] = 4.0 * c - up - down - left - right;
        }
    }
    return out;
}

}  // namespace

SccResult scc(const Raster& pred, const Raster& ref) {
    if (!pred.same_shape(ref)) throw ValidationError("scc: shape mismatch");
    SccResult result;
    double sum = 0.0;
    int valid = 0;
    const double n = static_cast<double>(pred.h) * pred.w;
    for (int b = 0; b < pred.c; ++b) {
        const auto hp = laplacian_highpass(pred, b);
        const auto hr = laplacian_highpass(ref, b);
        double sp = 0.0, sr = 0.0, spp = 0.0, srr = 0.0, spr = 0.0;
        for (size_t i = 0; i < hp.size(); ++i) {
            sp += hp[i];
            sr += hr[i];
            spp += hp[i] * hp[i];
            srr += hr[i] * hr[i];
            spr += hp[i] * hr[i];
        }
        const double var_p = spp - sp * sp / n;
        const double var_r = srr - sr * sr / n;
        if (var_p <= 0.0 || var_r <= 0.0) {
            ++result.degenerate_bands;
            continue;
        }
        sum += (spr - sp * sr / n) / std::sqrt(var_p * var_r);
        ++valid;
    }
    if (valid == 0)
        throw ValidationError("scc: high-pass variance vanished in every band");
    result.value = sum / valid;
    return result;
}

namespace {

struct WindowMoments {
    double mean_x, mean_y, var_x, var_y, cov;
};

WindowMoments window_moments(const Raster& a, const Raster& b, int y0, int x0, int window) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int y = y0; y < y0 + window; ++y) {
        for (int x = x0; x < x0 + window; ++x) {
            const double xv = a.at(y, x, 0), yv = b.at(y, x, 0);
            sx += xv;
            sy += yv;
            sxx += xv * xv;
            syy += yv * yv;
            sxy += xv * yv;
        }
    }
    const double n = static_cast<double>(window) * window;
    WindowMoments m;
    m.mean_x = sx / n;
    m.mean_y = sy / n;
    m.var_x = sxx / n - m.mean_x * m.mean_x;
    m.var_y = syy / n - m.mean_y * m.mean_y;
    m.cov = sxy / n - m.mean_x * m.mean_y;
    return m;
}

// Q = luminance * structure with documented degenerate limits.
double uiqi_from_moments(double mean_x, double mean_y, double var_x, double var_y, double cov) {
    const double lum_den = mean_x * mean_x + mean_y * mean_y;
    const double lum = lum_den > 0.0 ? 2.0 * mean_x * mean_y / lum_den : 1.0;
    const double str_den = var_x + var_y;
    const double str = str_den > 0.0 ? 2.0 * cov / str_den : 1.0;
    return lum * str;
}

}  // namespace

double uiqi(const Raster& pred_band, const Raster& ref_band, int window, int step) {
    if (!pred_band.same_shape(ref_band)) throw ValidationError("uiqi: shape mismatch");
    if (pred_band.c != 1) throw ValidationError("uiqi: single-band inputs required");
    if (window < 2) throw ValidationError("uiqi: window must be >= 2");
    if (step < 1) throw ValidationError("uiqi: step must be >= 1");
    if (window > pred_band.h || window > pred_band.w)
        throw ValidationError("uiqi: window exceeds image extent");
    double sum = 0.0;
    long count = 0;
    for (int y0 = 0; y0 + window <= pred_band.h; y0 += step) {
        for (int x0 = 0; x0 + window <= pred_band.w; x0 += step) {
            const WindowMoments m = window_moments(pred_band, ref_band, y0, x0, window);
            sum += uiqi_from_moments(m.mean_x, m.mean_y, m.var_x, m.var_y, m.cov);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

double qave(const Raster& pred, const Raster& ref, int window, int step) {
    if (!pred.same_shape(ref)) throw ValidationError("qave: shape mismatch");
    double sum = 0.0;
    for (int b = 0; b < pred.c; ++b)
        sum += uiqi(extract_band(pred, b), extract_band(ref, b), window, step);
    return sum / pred.c;
}

namespace {

// Cayley-Dickson doubling: for x = (a, b), y = (c, d) of half dimension,
//   x * y = (a*c - conj(d)*b, d*a + b*conj(c)),  conj(x) = (conj(a), -b).
// Dimension 1 is the reals; 2, 4, 8 give complex, quaternion, octonion.
void cd_conj(const double* x, double* out, int dim) {
    out[0] = x[0];
    for (int i = 1; i < dim; ++i) out[i] = -x[i];
}

void cd_mult(const double* x, const double* y, double* out, int dim) {
    if (dim == 1) {
        out[0] = x[0] * y[0];
        return;
    }
    const int half = dim / 2;
    const double* a = x;
    const double* b = x + half;
    const double* c = y;
    const double* d = y + half;
    std::vector<double> t1(half), t2(half), conj_buf(half);
    // a*c - conj(d)*b
    cd_mult(a, c, t1.data(), half);
    cd_conj(d, conj_buf.data(), half);
    cd_mult(conj_buf.data(), b, t2.data(), half);
    for (int i = 0; i < half; ++i) out[i] = t1[i] - t2[i];
    // d*a + b*conj(c)
    cd_mult(d, a, t1.data(), half);
    cd_conj(c, conj_buf.data(), half);
    cd_mult(b, conj_buf.data(), t2.data(), half);
    for (int i = 0; i < half; ++i) out[half + i] = t1[i] + t2[i];
}

double cd_norm(const double* x, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

double q2n_window(const Raster& pred, const Raster& ref, int y0, int x0, int window) {
    const int dim = pred.c;
    const double n = static_cast<double>(window) * window;
    std::vector<double> m1(dim, 0.0), m2(dim, 0.0);
    for (int y = y0; y < y0 + window; ++y)
        for (int x = x0; x < x0 + window; ++x)
            for (int b = 0; b < dim; ++b) {
                m1[b] += pred.at(y, x, b);
                m2[b] += ref.at(y, x, b);
            }
    for (int b = 0; b < dim; ++b) {
        m1[b] /= n;
        m2[b] /= n;
    }
    // Hypercomplex covariance E[z1 * conj(z2)] - m1 * conj(m2) and the real
    // variances E|z|^2 - |m|^2.
    std::vector<double> cov(dim, 0.0), z1(dim), z2c(dim), prod(dim);
    double e1 = 0.0, e2 = 0.0;
    for (int y = y0; y < y0 + window; ++y)
        for (int x = x0; x < x0 + window; ++x) {
            for (int b = 0; b < dim; ++b) {
                z1[b] = pred.at(y, x, b);
                z2c[b] = ref.at(y, x, b);
            }
            e1 += cd_norm(z1.data(), dim) * cd_norm(z1.data(), dim);
            e2 += cd_norm(z2c.data(), dim) * cd_norm(z2c.data(), dim);
            cd_conj(z2c.data(), z2c.data(), dim);
            cd_mult(z1.data(), z2c.data(), prod.data(), dim);
            for (int b = 0; b < dim; ++b) cov[b] += prod[b];
        }
    std::vector<double> m2c(dim), mprod(dim);
    cd_conj(m2.data(), m2c.data(), dim);
    cd_mult(m1.data(), m2c.data(), mprod.data(), dim);
    for (int b = 0; b < dim; ++b) cov[b] = cov[b] / n - mprod[b];
    const double nm1 = cd_norm(m1.data(), dim);
    const double nm2 = cd_norm(m2.data(), dim);
    const double var1 = e1 / n - nm1 * nm1;
    const double var2 = e2 / n - nm2 * nm2;
    const double lum_den = nm1 * nm1 + nm2 * nm2;
    const double lum = lum_den > 0.0 ? 2.0 * nm1 * nm2 / lum_den : 1.0;
    const double str_den = var1 + var2;
    const double str = str_den > 0.0 ? 2.0 * cd_norm(cov.data(), dim) / str_den : 1.0;
    return lum * str;
}

}  // namespace

double q2n(const Raster& pred, const Raster& ref, int window) {
    if (!pred.same_shape(ref)) throw ValidationError("q2n: shape mismatch");
    if (pred.c != 2 && pred.c != 4 && pred.c != 8)
        throw ValidationError("q2n: band count must be 2, 4 or 8");
    if (window < 2 || window > pred.h || window > pred.w)
        throw ValidationError("q2n: bad window size");
    double sum = 0.0;
    long count = 0;
    for (int y0 = 0; y0 + window <= pred.h; y0 += window)
        for (int x0 = 0; x0 + window <= pred.w; x0 += window) {
            sum += q2n_window(pred, ref, y0, x0, window);
            ++count;
        }
    return sum / static_cast<double>(count);
}

double psnr(const Raster& pred, const Raster& ref, double peak) {
    if (!pred.same_shape(ref)) throw ValidationError("psnr: shape mismatch");
    if (!(peak > 0.0)) throw ValidationError("psnr: peak must be positive");
    double se = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - ref.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(pred.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Raster& pred, const Raster& ref, double peak) {
    if (!pred.same_shape(ref)) throw ValidationError("ssim: shape mismatch");
    constexpr int kWindow = 11;
    constexpr double kSigma = 1.5;
    if (pred.h < kWindow || pred.w < kWindow)
        throw ValidationError("ssim: image smaller than the 11x11 window");
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    // Normalized 2-D Gaussian weights.
    double wsum = 0.0;
    double weights[kWindow][kWindow];
    for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) {
            const double dy = i - kWindow / 2, dx = j - kWindow / 2;
            weights[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            wsum += weights[i][j];
        }
    for (auto& row : weights)
        for (double& w : row) w /= wsum;

    double band_sum = 0.0;
    for (int b = 0; b < pred.c; ++b) {
        double map_sum = 0.0;
        long count = 0;
        for (int y0 = 0; y0 + kWindow <= pred.h; ++y0) {
            for (int x0 = 0; x0 + kWindow <= pred.w; ++x0) {
                double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
                for (int i = 0; i < kWindow; ++i)
                    for (int j = 0; j < kWindow; ++j) {
                        const double w = weights[i][j];
                        const double xv = pred.at(y0 + i, x0 + j, b);
                        const double yv = ref.at(y0 + i, x0 + j, b);
                        mx += w * xv;
                        my += w * yv;
                        mxx += w * xv * xv;
                        myy += w * yv * yv;
                        mxy += w * xv * yv;
                    }
                const double var_x = mxx - mx * mx;
                const double var_y = myy - my * my;
                const double cov = mxy - mx * my;
                map_sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                           ((mx * mx + my * my + c1) * (var_x + var_y + c2));
                ++count;
            }
        }
        band_sum += map_sum / static_cast<double>(count);
    }
    return band_sum / pred.c;
}

NoRefScores no_reference_suite(const Raster& fused, const Raster& ms, const Raster& pan,
                               int ratio, int window) {
    if (ratio < 2) throw ValidationError("no_reference_suite: ratio must be >= 2");
    if (pan.c != 1) throw ValidationError("no_reference_suite: pan must be single-band");
    if (fused.c != ms.c) throw ValidationError("no_reference_suite: band count mismatch");
    if (fused.h != ms.h * ratio || fused.w != ms.w * ratio)
        throw ValidationError("no_reference_suite: fused extent must be ratio x MS extent");
    if (pan.h != fused.h || pan.w != fused.w)
        throw ValidationError("no_reference_suite: pan extent must match fused");
    if (window % ratio != 0)
        throw ValidationError("no_reference_suite: window must be divisible by ratio");

    const Raster f = remap_for_suite(fused);
    const Raster m = remap_for_suite(ms);
    const Raster p = remap_for_suite(pan);
    const int window_red = window / ratio;
    if (window_red < 2) throw ValidationError("no_reference_suite: window too small for ratio");

    std::vector<Raster> f_bands, m_bands;
    for (int b = 0; b < f.c; ++b) {
        f_bands.push_back(extract_band(f, b));
        m_bands.push_back(extract_band(m, b));
    }

    NoRefScores scores;
    // Spectral distortion over ordered band pairs, exponent p = 1.
    long pairs = 0;
    for (int a = 0; a < f.c; ++a) {
        for (int b = 0; b < f.c; ++b) {
            if (a == b) continue;
            const double q_full = uiqi(f_bands[a], f_bands[b], window, window);
            const double q_red = uiqi(m_bands[a], m_bands[b], window_red, window_red);
            scores.d_lambda += std::fabs(q_full - q_red);
            ++pairs;
        }
    }
    scores.d_lambda /= static_cast<double>(pairs);

    const Raster pan_red = resize_bicubic(p, m.h, m.w);
    for (int b = 0; b < f.c; ++b) {
        const double q_full = uiqi(f_bands[b], p, window, window);
        const double q_red = uiqi(m_bands[b], pan_red, window_red, window_red);
        scores.d_s += std::fabs(q_full - q_red);
    }
    scores.d_s /= static_cast<double>(f.c);

    scores.qnr = (1.0 - scores.d_lambda) * (1.0 - scores.d_s);
    return scores;
}

SharpnessReport sharpness_report(const Raster& pan, const Raster& ms, int ratio) {
    if (pan.c != 1) throw ValidationError("sharpness_report: pan must be single-band");
    if (ratio < 1) throw ValidationError("sharpness_report: ratio must be >= 1");
    if (std::abs(pan.h - ratio * ms.h) >= ratio || std::abs(pan.w - ratio * ms.w) >= ratio)
        throw ValidationError("sharpness_report: pan extent is not ratio x MS extent");

    const Raster gray = to_grayscale(remap_for_suite(ms));
    const Raster reduced = resize_bicubic(remap_for_suite(pan), ms.h, ms.w);
    const Raster blurred = gaussian_blur(reduced, 5, 2.0);

    SharpnessReport report;
    report.reduced_pan = {psnr(reduced, gray, 1.0), scc(reduced, gray).value,
                          ssim(reduced, gray, 1.0)};
    report.blurred_reduced_pan = {psnr(blurred, gray, 1.0), scc(blurred, gray).value,
                                  ssim(blurred, gray, 1.0)};
    return report;
}

namespace {

std::string finite_str(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

nlohmann::json json_value(double v) {
    if (std::isfinite(v)) return v;
    return finite_str(v);
}

}  // namespace

std::string sharpness_report_csv(const SharpnessReport& report) {
    std::ostringstream os;
    os << "row,psnr,scc,ssim\n";
    os << "reduced_pan," << finite_str(report.reduced_pan.psnr) << ","
       << finite_str(report.reduced_pan.scc) << "," << finite_str(report.reduced_pan.ssim) << "\n";
    os << "blurred_reduced_pan," << finite_str(report.blurred_reduced_pan.psnr) << ","
       << finite_str(report.blurred_reduced_pan.scc) << ","
       << finite_str(report.blurred_reduced_pan.ssim) << "\n";
    return os.str();
}

ReferenceScores reference_suite(const Raster& pred, const Raster& ref, int ratio) {
    if (!pred.same_shape(ref)) throw ValidationError("reference_suite: shape mismatch");
    const Raster p = remap_for_suite(pred);
    const Raster r = remap_for_suite(ref);
    const int window = std::min({32, p.h, p.w});
    ReferenceScores s;
    s.qave = qave(p, r, window, window);
    s.q = q2n(p, r, window);
    s.scc = scc(p, r).value;
    s.sam = sam_degrees(p, r);
    s.ergas = ergas(p, r, ratio);
    return s;
}

MetricReport aggregate_report(
    std::vector<std::pair<std::string, std::map<std::string, double>>> per_patch,
    nlohmann::json config_echo) {
    MetricReport report;
    report.per_patch = std::move(per_patch);
    report.config_echo = std::move(config_echo);
    std::map<std::string, std::pair<double, long>> sums;
    for (const auto& [id, values] : report.per_patch)
        for (const auto& [name, value] : values) {
            sums[name].first += value;
            sums[name].second += 1;
        }
    for (const auto& [name, acc] : sums)
        report.aggregate[name] = acc.first / static_cast<double>(acc.second);
    return report;
}

nlohmann::json metric_report_to_json(const MetricReport& report) {
    nlohmann::json j;
    j["config"] = report.config_echo;
    j["count"] = report.per_patch.size();
    j["aggregate"] = nlohmann::json::object();
    for (const auto& [name, value] : report.aggregate) j["aggregate"][name] = json_value(value);
    j["per_patch"] = nlohmann::json::array();
    for (const auto& [id, values] : report.per_patch) {
        nlohmann::json jp;
        jp["patch_id"] = id;
        for (const auto& [name, value] : values) jp[name] = json_value(value);
        j["per_patch"].push_back(std::move(jp));
    }
    return j;
}

std::string metric_report_to_csv(const MetricReport& report) {
    std::ostringstream os;
    std::vector<std::string> columns;
    for (const auto& [name, value] : report.aggregate) columns.push_back(name);
    os << "patch_id";
    for (const auto& c : columns) os << "," << c;
    os << "\n";
    for (const auto& [id, values] : report.per_patch) {
        os << id;
        for (const auto& c : columns) {
            os << ",";
            if (auto it = values.find(c); it != values.end()) os << finite_str(it->second);
        }
        os << "\n";
    }
    os << "aggregate";
    for (const auto& c : columns) os << "," << finite_str(report.aggregate.at(c));
    os << "\n";
    return os.str();
}

}  // namespace pancolor::metrics
