#include "pancolor/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "pancolor/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "tensor container code assumes a little-endian host");

namespace pancolor::io {

namespace {

constexpr char kTensorMagic[8] = {'P', 'C', 'T', 'E', 'N', 'S', 'R', '\0'};
constexpr char kContainerMagic[8] = {'P', 'C', 'C', 'O', 'N', 'T', 'N', 'R'};
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void append_pod(std::vector<uint8_t>& out, const T& value) {
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_pod(const uint8_t* data, size_t size, size_t& offset) {
    if (offset + sizeof(T) > size) throw IoError("tensor stream truncated");
    T value;
    std::memcpy(&value, data + offset, sizeof(T));
    offset += sizeof(T);
    return value;
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const std::streamoff len = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<uint8_t> bytes(static_cast<size_t>(len));
    in.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!in) throw IoError("failed reading " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

size_t TensorBlob::element_count() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

void append_tensor_bytes(std::vector<uint8_t>& out, const TensorBlob& blob, Dtype dtype) {
    if (blob.values.size() != blob.element_count())
        throw ValidationError("tensor blob: value count does not match dims");
    out.insert(out.end(), kTensorMagic, kTensorMagic + 8);
    append_pod(out, kFormatVersion);
    append_pod(out, static_cast<uint32_t>(dtype));
    append_pod(out, static_cast<uint32_t>(blob.dims.size()));
    for (uint32_t d : blob.dims) append_pod(out, d);
    if (dtype == Dtype::f32) {
        for (double v : blob.values) append_pod(out, static_cast<float>(v));
    } else {
        for (double v : blob.values) append_pod(out, v);
    }
}

TensorBlob parse_tensor_bytes(const uint8_t* data, size_t size, size_t& offset) {
    if (offset + 8 > size || std::memcmp(data + offset, kTensorMagic, 8) != 0)
        throw IoError("bad tensor magic");
    offset += 8;
    const auto version = read_pod<uint32_t>(data, size, offset);
    if (version != kFormatVersion) throw IoError("unsupported tensor format version");
    const auto dtype = read_pod<uint32_t>(data, size, offset);
    if (dtype != static_cast<uint32_t>(Dtype::f32) && dtype != static_cast<uint32_t>(Dtype::f64))
        throw IoError("unsupported tensor dtype code");
    const auto rank = read_pod<uint32_t>(data, size, offset);
    if (rank > 8) throw IoError("tensor rank too large");
    TensorBlob blob;
    blob.dims.resize(rank);
    for (auto& d : blob.dims) d = read_pod<uint32_t>(data, size, offset);
    blob.values.resize(blob.element_count());
    if (dtype == static_cast<uint32_t>(Dtype::f32)) {
        for (auto& v : blob.values) v = read_pod<float>(data, size, offset);
    } else {
        for (auto& v : blob.values) v = read_pod<double>(data, size, offset);
    }
    return blob;
}

void write_tensor(const std::filesystem::path& path, const TensorBlob& blob, Dtype dtype) {
    std::vector<uint8_t> bytes;
    append_tensor_bytes(bytes, blob, dtype);
    write_file(path, bytes);
}

TensorBlob read_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    size_t offset = 0;
    TensorBlob blob = parse_tensor_bytes(bytes.data(), bytes.size(), offset);
    if (offset != bytes.size()) throw IoError("trailing bytes in " + path.string());
    return blob;
}

void save_raster(const std::filesystem::path& path, const Raster& r) {
    TensorBlob blob;
    blob.dims = {static_cast<uint32_t>(r.h), static_cast<uint32_t>(r.w),
                 static_cast<uint32_t>(r.c)};
    blob.values = r.data;
    write_tensor(path, blob, Dtype::f32);
}

Raster load_raster(const std::filesystem::path& path, ValueRange range) {
    TensorBlob blob = read_tensor(path);
    if (blob.dims.size() != 3) throw IoError("raster file must be rank 3: " + path.string());
    Raster r;
    r.h = static_cast<int>(blob.dims[0]);
    r.w = static_cast<int>(blob.dims[1]);
    r.c = static_cast<int>(blob.dims[2]);
    r.range = range;
    r.data = std::move(blob.values);
    validate_raster(r, path.string());
    return r;
}

void write_container(const std::filesystem::path& path, const Container& c, Dtype dtype) {
    std::vector<uint8_t> bytes;
    bytes.insert(bytes.end(), kContainerMagic, kContainerMagic + 8);
    append_pod(bytes, kFormatVersion);
    append_pod(bytes, static_cast<uint64_t>(c.meta_json.size()));
    bytes.insert(bytes.end(), c.meta_json.begin(), c.meta_json.end());
    append_pod(bytes, static_cast<uint32_t>(c.tensors.size()));
    for (const auto& [name, blob] : c.tensors) {
        append_pod(bytes, static_cast<uint32_t>(name.size()));
        bytes.insert(bytes.end(), name.begin(), name.end());
        append_tensor_bytes(bytes, blob, dtype);
    }
    write_file(path, bytes);
}

Container read_container(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    size_t offset = 0;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kContainerMagic, 8) != 0)
        throw IoError("bad container magic in " + path.string());
    offset = 8;
    const auto version = read_pod<uint32_t>(bytes.data(), bytes.size(), offset);
    if (version != kFormatVersion) throw IoError("unsupported container version");
    const auto meta_len = read_pod<uint64_t>(bytes.data(), bytes.size(), offset);
    if (offset + meta_len > bytes.size()) throw IoError("container metadata truncated");
    Container c;
    c.meta_json.assign(bytes.begin() + static_cast<long>(offset),
                       bytes.begin() + static_cast<long>(offset + meta_len));
    offset += meta_len;
    const auto count = read_pod<uint32_t>(bytes.data(), bytes.size(), offset);
    c.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<uint32_t>(bytes.data(), bytes.size(), offset);
        if (offset + name_len > bytes.size()) throw IoError("container name truncated");
        std::string name(bytes.begin() + static_cast<long>(offset),
                         bytes.begin() + static_cast<long>(offset + name_len));
        offset += name_len;
        c.tensors.emplace_back(std::move(name),
                               parse_tensor_bytes(bytes.data(), bytes.size(), offset));
    }
    if (offset != bytes.size()) throw IoError("trailing bytes in " + path.string());
    return c;
}

}  // namespace pancolor::io
