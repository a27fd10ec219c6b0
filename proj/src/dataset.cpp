#include "pancolor/dataset.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

#include "pancolor/errors.hpp"
#include "pancolor/tensor_io.hpp"

namespace pancolor {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split: " + s);
}

namespace {

json normalization_to_json(const NormalizationSpec& n) {
    json j;
    j["bit_depth"] = n.bit_depth;
    j["mode"] = n.mode == NormalizationMode::fixed_bit_depth ? "fixed_bit_depth"
                                                             : "per_scene_minmax";
    if (n.scene_min) j["scene_min"] = *n.scene_min;
    if (n.scene_max) j["scene_max"] = *n.scene_max;
    return j;
}

NormalizationSpec normalization_from_json(const json& j) {
    NormalizationSpec n;
    n.bit_depth = j.at("bit_depth").get<int>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "fixed_bit_depth")
        n.mode = NormalizationMode::fixed_bit_depth;
    else if (mode == "per_scene_minmax")
        n.mode = NormalizationMode::per_scene_minmax;
    else
        throw ValidationError("unknown normalization mode: " + mode);
    if (j.contains("scene_min")) n.scene_min = j.at("scene_min").get<double>();
    if (j.contains("scene_max")) n.scene_max = j.at("scene_max").get<double>();
    return n;
}

}  // namespace

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
    json j;
    j["split"] = to_string(manifest.split);
    j["normalization"] = normalization_to_json(manifest.normalization);
    j["entries"] = json::array();
    for (const auto& e : manifest.entries) {
        json je;
        je["patch_id"] = e.patch_id;
        je["scene_id"] = e.scene_id;
        je["tile_row"] = e.tile_row;
        je["tile_col"] = e.tile_col;
        je["rasters"] = e.rasters;
        j["entries"].push_back(std::move(je));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    DatasetManifest m;
    m.split = split_from_string(j.at("split").get<std::string>());
    m.normalization = normalization_from_json(j.at("normalization"));
    const fs::path base = path.parent_path();
    std::set<std::string> seen;
    for (const auto& je : j.at("entries")) {
        ManifestEntry e;
        e.patch_id = je.at("patch_id").get<std::string>();
        e.scene_id = je.at("scene_id").get<std::string>();
        e.tile_row = je.value("tile_row", 0);
        e.tile_col = je.value("tile_col", 0);
        e.rasters = je.at("rasters").get<std::map<std::string, std::string>>();
        if (!seen.insert(e.patch_id).second)
            throw ValidationError("manifest: duplicate patch_id " + e.patch_id);
        for (const auto& [role, rel] : e.rasters)
            if (!fs::exists(base / rel))
                throw ValidationError("manifest: missing file for " + e.patch_id + " role " +
                                      role + ": " + (base / rel).string());
        m.entries.push_back(std::move(e));
    }
    return m;
}

DatasetManifest build_dataset(std::span<const ScenePair> scenes, const fs::path& out_dir,
                              int stride, Split split, const NormalizationSpec& normalization,
                              int ms_tile) {
    std::error_code ec;
    fs::create_directories(out_dir / "y_ms", ec);
    fs::create_directories(out_dir / "y_pan", ec);
    if (ec) throw IoError("cannot create dataset directories under " + out_dir.string());

    DatasetManifest manifest;
    manifest.split = split;
    manifest.normalization = normalization;
    for (const ScenePair& scene : scenes) {
        const auto tiles = tile_scene(scene.ms, scene.pan, stride, ms_tile);
        for (const TilePair& tile : tiles) {
            char suffix[32];
            std::snprintf(suffix, sizeof(suffix), "_r%03d_c%03d", tile.tile_row, tile.tile_col);
            ManifestEntry e;
            e.patch_id = scene.scene_id + suffix;
            e.scene_id = scene.scene_id;
            e.tile_row = tile.tile_row;
            e.tile_col = tile.tile_col;
            const std::string ms_rel = "y_ms/" + e.patch_id + ".pct";
            const std::string pan_rel = "y_pan/" + e.patch_id + ".pct";
            io::save_raster(out_dir / ms_rel, tile.y_ms);
            io::save_raster(out_dir / pan_rel, tile.y_pan);
            e.rasters["y_ms"] = ms_rel;
            e.rasters["y_pan"] = pan_rel;
            manifest.entries.push_back(std::move(e));
        }
    }
    save_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

BundleLoader::BundleLoader(DatasetManifest manifest, fs::path base_dir, AugmentSpec augment)
    : manifest_(std::move(manifest)), base_dir_(std::move(base_dir)), augment_(augment) {
    augment_.validate();
}

PatchBundle BundleLoader::load(size_t index, int epoch, PipelineCounters* counters) const {
    return load_with(index, epoch, augment_, counters);
}

PatchBundle BundleLoader::load_with(size_t index, int epoch, const AugmentSpec& augment,
                                    PipelineCounters* counters) const {
    if (index >= manifest_.entries.size())
        throw ValidationError("BundleLoader: index out of range");
    const ManifestEntry& e = manifest_.entries[index];
    const auto ms_it = e.rasters.find("y_ms");
    if (ms_it == e.rasters.end())
        throw ValidationError("BundleLoader: entry " + e.patch_id + " lacks y_ms");
    Raster y_ms = io::load_raster(base_dir_ / ms_it->second);
    std::optional<Raster> y_pan;
    if (const auto pan_it = e.rasters.find("y_pan"); pan_it != e.rasters.end())
        y_pan = io::load_raster(base_dir_ / pan_it->second);

    // Independent, replayable stream per (seed, patch, epoch).
    Rng rng(Rng::mix({augment.rng_seed, Rng::hash_string(e.patch_id.c_str()),
                      static_cast<uint64_t>(epoch)}));
    PatchMeta meta;
    meta.scene_id = e.scene_id;
    meta.tile_row = e.tile_row;
    meta.tile_col = e.tile_col;
    return make_bundle(y_ms, y_pan, augment, rng, std::move(meta), counters);
}

}  // namespace pancolor
