#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pancolor/raster.hpp"

namespace pancolor::io {

// On-disk tensor: 8-byte magic "PCTENSR\0", u32 version, u32 dtype code
// (1 = float32, 2 = float64), u32 rank, u32 dims[rank], then the payload in
// row-major little-endian order. Dataset rasters are stored as float32;
// checkpoints use float64 so that resume round-trips bit-exactly.
enum class Dtype : uint32_t { f32 = 1, f64 = 2 };

struct TensorBlob {
    std::vector<uint32_t> dims;
    std::vector<double> values;  // always held as double in memory

    size_t element_count() const;
};

void write_tensor(const std::filesystem::path& path, const TensorBlob& blob, Dtype dtype);
TensorBlob read_tensor(const std::filesystem::path& path);

// Serialized stream forms, used inside container files.
void append_tensor_bytes(std::vector<uint8_t>& out, const TensorBlob& blob, Dtype dtype);
TensorBlob parse_tensor_bytes(const uint8_t* data, size_t size, size_t& offset);

// Raster convenience wrappers; rasters are stored [h, w, c] float32 and
// loaded back with the caller-declared value range.
void save_raster(const std::filesystem::path& path, const Raster& r);
Raster load_raster(const std::filesystem::path& path,
                   ValueRange range = ValueRange::unit_signed);

// Container: 8-byte magic "PCCONTNR", u32 version, u64 metadata length, JSON
// metadata bytes, u32 tensor count, then repeated (u32 name length, name
// bytes, embedded tensor). Holds model weights / optimizer state.
struct Container {
    std::string meta_json;
    std::vector<std::pair<std::string, TensorBlob>> tensors;
};

void write_container(const std::filesystem::path& path, const Container& c,
                     Dtype dtype = Dtype::f64);
Container read_container(const std::filesystem::path& path);

}  // namespace pancolor::io
