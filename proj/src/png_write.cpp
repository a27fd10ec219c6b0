#include "pancolor/png_write.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "pancolor/errors.hpp"

namespace pancolor::io {

namespace {

// Band values at the 2nd and 98th percentile (nearest-rank).
std::pair<double, double> stretch_bounds(const Raster& r, int band) {
    std::vector<double> values;
    values.reserve(static_cast<size_t>(r.h) * r.w);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x) values.push_back(r.at(y, x, band));
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    const size_t lo = static_cast<size_t>(0.02 * (n - 1));
    const size_t hi = static_cast<size_t>(0.98 * (n - 1));
    double a = values[lo], b = values[hi];
    if (!(a < b)) {
        a = values.front();
        b = values.back();
        if (!(a < b)) b = a + 1.0;
    }
    return {a, b};
}

uint8_t stretch(double v, double lo, double hi) {
    const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(t * 255.0));
}

}  // namespace

void write_png_preview(const std::filesystem::path& path, const Raster& r) {
    const int channels = r.c >= 3 ? 3 : 1;
    std::vector<std::pair<double, double>> bounds;
    for (int b = 0; b < channels; ++b) bounds.push_back(stretch_bounds(r, b));

    std::vector<uint8_t> image(static_cast<size_t>(r.h) * r.w * channels);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            for (int b = 0; b < channels; ++b)
                image[(static_cast<size_t>(y) * r.w + x) * channels + b] =
                    stretch(r.at(y, x, b), bounds[b].first, bounds[b].second);

    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(r.w), static_cast<png_uint_32>(r.h), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < r.h; ++y)
        png_write_row(png, image.data() + static_cast<size_t>(y) * r.w * channels);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace pancolor::io
