#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pancolor/errors.hpp"
#include "pancolor/rng.hpp"
#include "pancolor/tensor_io.hpp"
#include "test_support.hpp"

using namespace pancolor;
namespace fs = std::filesystem;

TEST_CASE("rng streams are deterministic and state round-trips") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(a.state());
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == c.next_u64());
}

TEST_CASE("uniform_int covers the inclusive range without bias artifacts") {
    Rng rng(7);
    int seen_lo = 0, seen_hi = 0;
    for (int i = 0; i < 20000; ++i) {
        const int v = rng.uniform_int(3, 7);
        CHECK(v >= 3);
        CHECK(v <= 7);
        if (v == 3) ++seen_lo;
        if (v == 7) ++seen_hi;
    }
    CHECK(seen_lo > 3000);
    CHECK(seen_hi > 3000);
}

TEST_CASE("normal sampler has roughly unit moments") {
    Rng rng(9);
    double sum = 0.0, sumsq = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sumsq += v * v;
    }
    CHECK(std::fabs(sum / n) < 0.02);
    CHECK(std::fabs(sumsq / n - 1.0) < 0.03);
}

TEST_CASE("mix derives distinct stream seeds") {
    CHECK(Rng::mix({1, 2}) != Rng::mix({2, 1}));
    CHECK(Rng::mix({1, 2}) != Rng::mix({1, 3}));
    CHECK(Rng::mix({1, 2}) == Rng::mix({1, 2}));
}

TEST_CASE("tensor files round-trip in both precisions") {
    const fs::path dir = fs::temp_directory_path() / "pancolor_io_test";
    fs::create_directories(dir);

    io::TensorBlob blob;
    blob.dims = {2, 3, 4};
    for (int i = 0; i < 24; ++i) blob.values.push_back(i * 0.125 - 1.0);

    io::write_tensor(dir / "t64.pct", blob, io::Dtype::f64);
    const auto back64 = io::read_tensor(dir / "t64.pct");
    CHECK(back64.dims == blob.dims);
    for (size_t i = 0; i < blob.values.size(); ++i) CHECK(back64.values[i] == blob.values[i]);

    io::write_tensor(dir / "t32.pct", blob, io::Dtype::f32);
    const auto back32 = io::read_tensor(dir / "t32.pct");
    for (size_t i = 0; i < blob.values.size(); ++i)
        CHECK(back32.values[i] == doctest::Approx(blob.values[i]).epsilon(1e-7));
    fs::remove_all(dir);
}

TEST_CASE("rasters persist as float32 tensors") {
    const fs::path dir = fs::temp_directory_path() / "pancolor_io_test2";
    fs::create_directories(dir);
    const Raster r = oracle::random_raster(5, 7, 4, 13);
    io::save_raster(dir / "r.pct", r);
    const Raster back = io::load_raster(dir / "r.pct");
    CHECK(back.h == 5);
    CHECK(back.w == 7);
    CHECK(back.c == 4);
    for (size_t i = 0; i < r.data.size(); ++i)
        CHECK(std::fabs(back.data[i] - r.data[i]) < 1e-6);
    fs::remove_all(dir);
}

TEST_CASE("containers hold metadata and named tensors") {
    const fs::path dir = fs::temp_directory_path() / "pancolor_io_test3";
    fs::create_directories(dir);
    io::Container c;
    c.meta_json = R"({"epoch": 3})";
    io::TensorBlob blob;
    blob.dims = {4};
    blob.values = {1.0, -2.0, 0.5, 1e-17};
    c.tensors.emplace_back("layer.weight", blob);
    io::write_container(dir / "c.ct", c);
    const auto back = io::read_container(dir / "c.ct");
    CHECK(back.meta_json == c.meta_json);
    REQUIRE(back.tensors.size() == 1);
    CHECK(back.tensors[0].first == "layer.weight");
    for (size_t i = 0; i < blob.values.size(); ++i)
        CHECK(back.tensors[0].second.values[i] == blob.values[i]);
    fs::remove_all(dir);
}

TEST_CASE("corrupt tensor files are rejected") {
    const fs::path dir = fs::temp_directory_path() / "pancolor_io_test4";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "bad.pct", std::ios::binary);
        out << "NOTMAGIC00000000";
    }
    CHECK_THROWS_AS(io::read_tensor(dir / "bad.pct"), IoError);
    CHECK_THROWS_AS(io::read_tensor(dir / "missing.pct"), IoError);
    fs::remove_all(dir);
}
