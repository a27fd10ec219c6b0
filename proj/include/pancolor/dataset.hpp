#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pancolor/pipeline.hpp"
#include "pancolor/raster.hpp"

namespace pancolor {

enum class Split { train, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
    std::string patch_id;
    std::string scene_id;
    int tile_row = 0;
    int tile_col = 0;
    // role -> path relative to the manifest directory; roles are y_ms and,
    // when the scene has a panchromatic band, y_pan.
    std::map<std::string, std::string> rasters;
};

struct DatasetManifest {
    Split split = Split::train;
    NormalizationSpec normalization;
    std::vector<ManifestEntry> entries;
};

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Parses and validates: unique patch ids, every referenced file present.
DatasetManifest load_manifest(const std::filesystem::path& path);

struct ScenePair {
    std::string scene_id;
    Raster ms;   // unit_signed
    Raster pan;  // unit_signed, 4x extent
};

// Tiles the scenes, writes each raster in the canonical tensor format under
// out_dir and returns the manifest (also written to out_dir/manifest.json).
// Deterministic: same scenes and stride produce bit-identical files.
DatasetManifest build_dataset(std::span<const ScenePair> scenes,
                              const std::filesystem::path& out_dir, int stride, Split split,
                              const NormalizationSpec& normalization, int ms_tile = 256);

// Loads manifest entries and assembles training bundles on demand. Each
// (patch, epoch) pair owns an independent RNG stream derived from the
// augmentation seed, so parallel loading and resumption replay identically.
class BundleLoader {
public:
    BundleLoader(DatasetManifest manifest, std::filesystem::path base_dir, AugmentSpec augment);

    size_t size() const { return manifest_.entries.size(); }
    const DatasetManifest& manifest() const { return manifest_; }

    PatchBundle load(size_t index, int epoch, PipelineCounters* counters = nullptr) const;

    // Same entry with an explicit augmentation policy (held-out evaluation
    // always degrades at the fixed ratio: random downsampling is a
    // training-only device).
    PatchBundle load_with(size_t index, int epoch, const AugmentSpec& augment,
                          PipelineCounters* counters = nullptr) const;

private:
    DatasetManifest manifest_;
    std::filesystem::path base_dir_;
    AugmentSpec augment_;
};

}  // namespace pancolor
