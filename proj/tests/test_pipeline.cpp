#include "pancolor/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pancolor/dataset.hpp"
#include "pancolor/errors.hpp"
#include "test_support.hpp"

using namespace pancolor;
namespace fs = std::filesystem;

TEST_CASE("degrade_fixed keeps shape and constants, removes high-pass energy") {
    const Raster flat = Raster::constant(64, 64, 3, 0.21);
    const Raster out = degrade_fixed(flat, 4);
    CHECK(out.same_shape(flat));
    for (double v : out.data) CHECK(std::fabs(v - 0.21) < 1e-9);

    // Checkerboard: degradation must strictly reduce Laplacian energy.
    Raster checker = Raster::zeros(64, 64, 1);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) checker.at(y, x, 0) = ((y / 4 + x / 4) % 2) ? 0.5 : -0.5;
    const Raster blurred = degrade_fixed(checker, 4);
    CHECK(oracle::laplacian_energy(blurred) < oracle::laplacian_energy(checker));

    CHECK_THROWS_AS(degrade_fixed(flat, 1), ValidationError);
}

TEST_CASE("degrade_fixed factor 4 passes through a 64x64 intermediate") {
    // 256 / 4 = 64; verified against an explicit two-step resize.
    const Raster r = oracle::smooth_raster(256, 256, 1, 42);
    const Raster direct = degrade_fixed(r, 4);
    const Raster manual = resize_bicubic(resize_bicubic(r, 64, 64), 256, 256);
    for (size_t i = 0; i < r.data.size(); ++i) CHECK(direct.data[i] == manual.data[i]);
}

TEST_CASE("degrade_random draws uniformly over [rd_min, rd_max]") {
    AugmentSpec spec;
    spec.mode = AugmentMode::random_downsample;
    Rng rng(2024);
    const Raster small = oracle::smooth_raster(8, 8, 1, 7);
    std::vector<long> counts(81, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto [out, s] = degrade_random(small, spec, rng);
        REQUIRE(s >= 20);
        REQUIRE(s <= 80);
        CHECK(out.same_shape(small));
        ++counts[s];
    }
    // Chi-square uniformity over the 61 sizes.
    const double expected = static_cast<double>(draws) / 61.0;
    double stat = 0.0;
    for (int s = 20; s <= 80; ++s) {
        const double d = counts[s] - expected;
        stat += d * d / expected;
    }
    const double p = oracle::chi_square_pvalue(stat, 60);
    CHECK(p > 0.001);

    const Raster flat = Raster::constant(32, 32, 2, -0.4);
    auto [out, s] = degrade_random(flat, spec, rng);
    (void)s;
    for (double v : out.data) CHECK(std::fabs(v + 0.4) < 1e-9);
}

TEST_CASE("make_bundle derives gms/x_ms and optional x_pan") {
    const Raster y_ms = oracle::smooth_raster(64, 64, 4, 11);
    AugmentSpec spec;  // fixed_ratio, factor 4
    Rng rng(3);
    const PatchBundle plain = make_bundle(y_ms, std::nullopt, spec, rng);
    CHECK(!plain.x_pan.has_value());
    CHECK(plain.meta.downsample_size_used == 16);  // 64 / 4
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            double mean = 0.0;
            for (int b = 0; b < 4; ++b) mean += y_ms.at(y, x, b);
            CHECK(std::fabs(plain.x_gms.at(y, x, 0) - mean / 4.0) < 1e-9);
        }

    const Raster y_pan = oracle::smooth_raster(256, 256, 1, 12);
    const PatchBundle with_pan = make_bundle(y_ms, y_pan, spec, rng);
    REQUIRE(with_pan.x_pan.has_value());
    CHECK(with_pan.x_pan->h == 64);
    CHECK(with_pan.x_pan->w == 64);
    CHECK(with_pan.x_pan->c == 1);

    const Raster bad_pan = oracle::smooth_raster(128, 128, 1, 13);
    CHECK_THROWS_WITH_AS(make_bundle(y_ms, bad_pan, spec, rng), doctest::Contains("y_pan"),
                         ValidationError);
}

TEST_CASE("bundle rasters honor the unit_signed range even when resampling overshoots") {
    // A hard step at the range boundary makes Catmull-Rom overshoot past 1.
    Raster y_ms = Raster::zeros(64, 64, 4);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int b = 0; b < 4; ++b) y_ms.at(y, x, b) = x < 32 ? -1.0 : 1.0;
    Raster y_pan = Raster::zeros(256, 256, 1);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) y_pan.at(y, x, 0) = x < 128 ? -1.0 : 1.0;
    // The bare degradation does overshoot...
    const Raster degraded = degrade_fixed(y_ms, 4);
    double peak = 0.0;
    for (double v : degraded.data) peak = std::max(peak, std::fabs(v));
    CHECK(peak > 1.0);
    // ...but the bundle clamps every raster back into range.
    AugmentSpec spec;
    Rng rng(1);
    const PatchBundle b = make_bundle(y_ms, y_pan, spec, rng);
    validate_raster(b.x_ms, "x_ms");
    validate_raster(b.x_gms, "x_gms");
    validate_raster(*b.x_pan, "x_pan");
}

TEST_CASE("bundles built under random downsampling record s and stay reproducible") {
    const Raster y_ms = oracle::smooth_raster(64, 64, 4, 21);
    AugmentSpec spec;
    spec.mode = AugmentMode::random_downsample;
    Rng a(17), b(17);
    const PatchBundle one = make_bundle(y_ms, std::nullopt, spec, a);
    const PatchBundle two = make_bundle(y_ms, std::nullopt, spec, b);
    CHECK(one.meta.downsample_size_used >= 20);
    CHECK(one.meta.downsample_size_used <= 80);
    CHECK(one.meta.downsample_size_used == two.meta.downsample_size_used);
    for (size_t i = 0; i < one.x_ms.data.size(); ++i)
        CHECK(one.x_ms.data[i] == two.x_ms.data[i]);
}

TEST_CASE("tile_scene produces aligned full tiles only") {
    const Raster ms = oracle::smooth_raster(512, 512, 4, 31);
    const Raster pan = oracle::smooth_raster(2048, 2048, 1, 32);
    const auto tiles = tile_scene(ms, pan, 256);
    CHECK(tiles.size() == 4);
    for (const TilePair& t : tiles) {
        CHECK(t.y_ms.h == 256);
        CHECK(t.y_pan.h == 1024);
    }
    // PAN origin is 4x the MS origin: tile (1, 0) must start at PAN row 1024.
    const TilePair& t10 = tiles[2];
    CHECK(t10.tile_row == 1);
    CHECK(t10.tile_col == 0);
    CHECK(t10.y_ms.at(0, 0, 0) == ms.at(256, 0, 0));
    CHECK(t10.y_pan.at(0, 0, 0) == pan.at(1024, 0, 0));

    const Raster small_ms = oracle::smooth_raster(300, 300, 4, 33);
    const Raster small_pan = oracle::smooth_raster(1200, 1200, 1, 34);
    CHECK(tile_scene(small_ms, small_pan, 256).size() == 1);

    const Raster bad_pan = oracle::smooth_raster(1100, 1200, 1, 35);
    CHECK_THROWS_WITH_AS(tile_scene(small_ms, bad_pan, 256), doctest::Contains("ratio"),
                         ValidationError);
}

TEST_CASE("tiling at stride = tile reassembles the cropped scene exactly") {
    const Raster ms = oracle::smooth_raster(96, 96, 4, 41);
    const Raster pan = oracle::smooth_raster(384, 384, 1, 42);
    const auto tiles = tile_scene(ms, pan, 32, 32);
    REQUIRE(tiles.size() == 9);
    Raster rebuilt = Raster::zeros(96, 96, 4);
    for (const TilePair& t : tiles)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                for (int b = 0; b < 4; ++b)
                    rebuilt.at(t.tile_row * 32 + y, t.tile_col * 32 + x, b) = t.y_ms.at(y, x, b);
    for (size_t i = 0; i < ms.data.size(); ++i) CHECK(rebuilt.data[i] == ms.data[i]);
}

TEST_CASE("discriminator batches stack [gms | ms | target]") {
    AugmentSpec spec;
    Rng rng(5);
    std::vector<PatchBundle> bundles;
    bundles.push_back(make_bundle(oracle::smooth_raster(32, 32, 4, 51), std::nullopt, spec, rng));
    std::vector<Raster> fakes{bundles[0].y_ms};  // fake identical to real
    auto [real, fake] = assemble_discriminator_batch(bundles, fakes);
    CHECK(real.c == 9);
    CHECK(fake.c == 9);
    for (size_t i = 0; i < real.size(); ++i) CHECK(real.v[i] == fake.v[i]);
    // Channel 0 carries the grayscale guidance.
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            CHECK(real.at(0, 0, y, x) == bundles[0].x_gms.at(y, x, 0));
    // Channels 5.. carry the target.
    for (int y = 0; y < 32; ++y)
        CHECK(real.at(0, 5, y, 7) == bundles[0].y_ms.at(y, 7, 0));

    std::vector<Raster> wrong{oracle::smooth_raster(16, 16, 4, 52)};
    CHECK_THROWS_AS(assemble_discriminator_batch(bundles, wrong), ValidationError);
}

TEST_CASE("dataset builds are bit-reproducible and manifests validate") {
    const fs::path root = fs::temp_directory_path() / "pancolor_dataset_test";
    fs::remove_all(root);

    std::vector<ScenePair> scenes;
    scenes.push_back({"alpha", oracle::smooth_raster(64, 64, 4, 61),
                      oracle::smooth_raster(256, 256, 1, 62)});
    NormalizationSpec norm;

    const DatasetManifest m1 = build_dataset(scenes, root / "a", 32, Split::train, norm, 32);
    const DatasetManifest m2 = build_dataset(scenes, root / "b", 32, Split::train, norm, 32);
    CHECK(m1.entries.size() == 4);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(root / "a" / "manifest.json") == slurp(root / "b" / "manifest.json"));
    for (const auto& e : m1.entries)
        CHECK(slurp(root / "a" / e.rasters.at("y_ms")) == slurp(root / "b" / e.rasters.at("y_ms")));

    const DatasetManifest loaded = load_manifest(root / "a" / "manifest.json");
    CHECK(loaded.entries.size() == 4);
    CHECK(loaded.split == Split::train);

    // A manifest referencing a missing file fails validation.
    fs::remove(root / "a" / m1.entries[0].rasters.at("y_ms"));
    CHECK_THROWS_WITH_AS(load_manifest(root / "a" / "manifest.json"), doctest::Contains("missing"),
                         ValidationError);
    fs::remove_all(root);
}

TEST_CASE("bundle loader streams are per-(patch, epoch) deterministic") {
    const fs::path root = fs::temp_directory_path() / "pancolor_loader_test";
    fs::remove_all(root);
    std::vector<ScenePair> scenes;
    scenes.push_back({"s", oracle::smooth_raster(64, 64, 4, 71),
                      oracle::smooth_raster(256, 256, 1, 72)});
    NormalizationSpec norm;
    const DatasetManifest manifest = build_dataset(scenes, root, 32, Split::train, norm, 32);

    AugmentSpec augment;
    augment.mode = AugmentMode::random_downsample;
    augment.rng_seed = 99;
    BundleLoader loader(manifest, root, augment);
    REQUIRE(loader.size() == 4);

    const PatchBundle a = loader.load(1, 5);
    const PatchBundle b = loader.load(1, 5);
    CHECK(a.meta.downsample_size_used == b.meta.downsample_size_used);
    for (size_t i = 0; i < a.x_ms.data.size(); ++i) CHECK(a.x_ms.data[i] == b.x_ms.data[i]);

    // Different epochs draw fresh sizes somewhere across the dataset.
    bool any_differs = false;
    for (size_t idx = 0; idx < loader.size(); ++idx)
        for (int epoch = 0; epoch < 4; ++epoch)
            if (loader.load(idx, epoch).meta.downsample_size_used !=
                loader.load(idx, epoch + 1).meta.downsample_size_used)
                any_differs = true;
    CHECK(any_differs);

    // Counters see the degradation route.
    PipelineCounters counters;
    loader.load(0, 0, &counters);
    CHECK(counters.random_downsample_draws == 1);
    CHECK(counters.fixed_degrades == 0);
    fs::remove_all(root);
}
