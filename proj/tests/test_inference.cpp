#include "pancolor/inference.hpp"

#include <cmath>

#include "doctest.h"
#include "pancolor/errors.hpp"
#include "test_support.hpp"

using namespace pancolor;

namespace {

PanColorGenerator small_generator(uint64_t seed = 3) {
    GeneratorConfig cfg;
    cfg.base_channels = 8;
    return PanColorGenerator(cfg, seed);
}

PatchBundle small_bundle(uint64_t seed) {
    AugmentSpec spec;
    Rng rng(seed);
    const Raster y_ms = oracle::smooth_raster(64, 64, 4, seed, 0.0, 0.5);
    const Raster y_pan = oracle::smooth_raster(256, 256, 1, seed + 1, 0.0, 0.5);
    return make_bundle(y_ms, y_pan, spec, rng);
}

}  // namespace

TEST_CASE("reduced inference with pan := gms reproduces gms guidance bit-exactly") {
    PanColorGenerator gen = small_generator();
    PatchBundle bundle = small_bundle(11);

    const Raster via_gms = infer_reduced(gen, bundle, GuidanceKind::gms);
    bundle.x_pan = bundle.x_gms;  // substitute the guidance tensor
    const Raster via_pan = infer_reduced(gen, bundle, GuidanceKind::pan);
    REQUIRE(via_gms.same_shape(via_pan));
    for (size_t i = 0; i < via_gms.data.size(); ++i)
        CHECK(via_gms.data[i] == via_pan.data[i]);

    for (double v : via_gms.data) CHECK(std::fabs(v) < 1.0);
    CHECK(via_gms.h == 64);
    CHECK(via_gms.c == 4);
}

TEST_CASE("reduced inference without x_pan rejects pan guidance") {
    PanColorGenerator gen = small_generator();
    PatchBundle bundle = small_bundle(13);
    bundle.x_pan.reset();
    CHECK_THROWS_AS(infer_reduced(gen, bundle, GuidanceKind::pan), ValidationError);
}

TEST_CASE("full-resolution inference shape and determinism") {
    PanColorGenerator gen = small_generator(5);
    const Raster y_ms = oracle::smooth_raster(64, 64, 4, 21, 0.0, 0.5);
    const Raster y_pan = oracle::smooth_raster(256, 256, 1, 22, 0.0, 0.5);
    const Raster out1 = infer_full(gen, y_pan, y_ms);
    CHECK(out1.h == 256);
    CHECK(out1.w == 256);
    CHECK(out1.c == 4);
    const Raster out2 = infer_full(gen, y_pan, y_ms);
    for (size_t i = 0; i < out1.data.size(); ++i) CHECK(out1.data[i] == out2.data[i]);

    const Raster bad_pan = oracle::smooth_raster(200, 200, 1, 23);
    CHECK_THROWS_AS(infer_full(gen, bad_pan, y_ms), ValidationError);
}

TEST_CASE("feather weights ramp linearly and blend symmetrically") {
    CHECK(feather_weight(0.0, 8) == 0.0);
    CHECK(feather_weight(4.0, 8) == 0.5);  // seam midpoint
    CHECK(feather_weight(8.0, 8) == 1.0);
    CHECK(feather_weight(20.0, 8) == 1.0);
    CHECK(feather_weight(3.0, 0) == 1.0);  // overlap 0 disables the ramp
    // Complementary positions across a seam sum to one.
    for (double d : {0.5, 1.5, 3.0, 6.5})
        CHECK(feather_weight(d, 8) + feather_weight(8.0 - d, 8) ==
              doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one-tile scenes match infer_full exactly") {
    PanColorGenerator gen = small_generator(7);
    const Raster ms = oracle::smooth_raster(16, 16, 4, 31, 0.0, 0.5);
    const Raster pan = oracle::smooth_raster(64, 64, 1, 32, 0.0, 0.5);
    const Raster direct = infer_full(gen, pan, ms);
    const Raster tiled = infer_scene_tiled(gen, pan, ms, /*tile=*/64, /*overlap=*/0);
    REQUIRE(direct.same_shape(tiled));
    for (size_t i = 0; i < direct.data.size(); ++i) CHECK(direct.data[i] == tiled.data[i]);
}

TEST_CASE("aligned 2x2 grids stitch per-tile outputs verbatim") {
    PanColorGenerator gen = small_generator(9);
    const Raster ms = oracle::smooth_raster(32, 32, 4, 41, 0.0, 0.5);
    const Raster pan = oracle::smooth_raster(128, 128, 1, 42, 0.0, 0.5);
    const Raster tiled = infer_scene_tiled(gen, pan, ms, 64, 0);
    CHECK(tiled.h == 128);
    for (int ty = 0; ty < 2; ++ty)
        for (int tx = 0; tx < 2; ++tx) {
            const Raster pan_tile = crop(pan, ty * 64, tx * 64, 64, 64);
            const Raster ms_tile = crop(ms, ty * 16, tx * 16, 16, 16);
            const Raster single = infer_full(gen, pan_tile, ms_tile);
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x)
                    for (int b = 0; b < 4; ++b)
                        CHECK(tiled.at(ty * 64 + y, tx * 64 + x, b) == single.at(y, x, b));
        }
}

TEST_CASE("feathered overlap produces valid in-range output") {
    PanColorGenerator gen = small_generator(11);
    const Raster ms = oracle::smooth_raster(32, 32, 4, 51, 0.0, 0.5);
    const Raster pan = oracle::smooth_raster(128, 128, 1, 52, 0.0, 0.5);
    const Raster out = infer_scene_tiled(gen, pan, ms, 64, 16);
    CHECK(out.h == 128);
    validate_raster(out, "tiled output");
}

TEST_CASE("inference never mutates generator parameters or statistics") {
    PanColorGenerator gen = small_generator(15);
    auto snapshot = [&]() {
        std::vector<double> all;
        for (auto* p : gen.parameters()) all.insert(all.end(), p->value.v.begin(), p->value.v.end());
        for (auto& [name, buf] : gen.buffers()) all.insert(all.end(), buf->v.begin(), buf->v.end());
        return all;
    };
    const auto before = snapshot();
    const PatchBundle bundle = small_bundle(71);
    infer_reduced(gen, bundle, GuidanceKind::gms);
    infer_reduced(gen, bundle, GuidanceKind::pan);
    infer_full(gen, *bundle.y_pan, bundle.y_ms);
    infer_scene_tiled(gen, *bundle.y_pan, bundle.y_ms, 64, 0);
    const auto after = snapshot();
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("tiled inference validates its arguments") {
    PanColorGenerator gen = small_generator(13);
    const Raster ms = oracle::smooth_raster(32, 32, 4, 61);
    const Raster pan = oracle::smooth_raster(128, 128, 1, 62);
    CHECK_THROWS_AS(infer_scene_tiled(gen, pan, ms, 64, 3), ValidationError);   // odd overlap
    CHECK_THROWS_AS(infer_scene_tiled(gen, pan, ms, 64, 40), ValidationError);  // >= tile/2
    CHECK_THROWS_AS(infer_scene_tiled(gen, pan, ms, 256, 0), ValidationError);  // scene too small
}
