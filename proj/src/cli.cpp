#include "pancolor/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"

#include "pancolor/dataset.hpp"
#include "pancolor/errors.hpp"
#include "pancolor/inference.hpp"
#include "pancolor/metrics.hpp"
#include "pancolor/parallel.hpp"
#include "pancolor/png_write.hpp"
#include "pancolor/tensor_io.hpp"
#include "pancolor/trainer.hpp"

namespace pancolor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_run_json(const fs::path& dir, const std::string& command, const json& config) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    json j;
    j["command"] = command;
    j["config"] = config;
    std::ofstream out(dir / "run.json", std::ios::trunc);
    if (!out) throw IoError("cannot write run.json under " + dir.string());
    out << j.dump(2) << "\n";
}

// Scene stems present in both directories, sorted for determinism.
std::vector<std::string> paired_scene_stems(const fs::path& ms_dir, const fs::path& pan_dir) {
    if (!fs::is_directory(ms_dir)) throw ValidationError("not a directory: " + ms_dir.string());
    if (!fs::is_directory(pan_dir)) throw ValidationError("not a directory: " + pan_dir.string());
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(ms_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".pct") continue;
        const std::string stem = entry.path().stem().string();
        if (fs::exists(pan_dir / (stem + ".pct"))) stems.push_back(stem);
    }
    std::sort(stems.begin(), stems.end());
    if (stems.empty())
        throw ValidationError("no paired .pct scenes found in " + ms_dir.string() + " and " +
                              pan_dir.string());
    return stems;
}

int run_prepare(const std::string& ms_dir, const std::string& pan_dir, const std::string& out,
                int stride, int bit_depth, int tile_size, const std::string& split) {
    NormalizationSpec norm;
    norm.bit_depth = bit_depth;
    norm.validate();
    std::vector<ScenePair> scenes;
    for (const std::string& stem : paired_scene_stems(ms_dir, pan_dir)) {
        ScenePair pair;
        pair.scene_id = stem;
        pair.ms = normalize(io::load_raster(fs::path(ms_dir) / (stem + ".pct"),
                                            ValueRange::raw_dn),
                            norm);
        pair.pan = normalize(io::load_raster(fs::path(pan_dir) / (stem + ".pct"),
                                             ValueRange::raw_dn),
                             norm);
        scenes.push_back(std::move(pair));
    }
    const DatasetManifest manifest =
        build_dataset(scenes, out, stride, split_from_string(split), norm, tile_size);
    write_run_json(out, "prepare",
                   json{{"ms_dir", ms_dir},
                        {"pan_dir", pan_dir},
                        {"out", out},
                        {"stride", stride},
                        {"bit_depth", bit_depth},
                        {"tile_size", tile_size},
                        {"split", split},
                        {"patches", manifest.entries.size()}});
    std::cout << "prepared " << manifest.entries.size() << " patches under " << out << "\n";
    return 0;
}

int run_train(const TrainConfig& cfg, const std::string& manifest_path, const std::string& out,
              const std::string& resume, bool epochs_overridden) {
    const fs::path manifest_file(manifest_path);
    const DatasetManifest manifest = load_manifest(manifest_file);

    // A resumed run continues under the configuration stored in the
    // checkpoint (an explicit --epochs extends the budget); run.json and the
    // loader follow it.
    Trainer trainer = resume.empty() ? Trainer(cfg) : Trainer::load_checkpoint(resume);
    if (!resume.empty() && epochs_overridden) trainer.set_epochs(cfg.epochs);
    BundleLoader loader(manifest, manifest_file.parent_path(), trainer.config().augment);

    write_run_json(out, "train", train_config_to_json(trainer.config()));
    std::ofstream log(fs::path(out) / "train_log.ndjson", std::ios::app);
    if (!log) throw IoError("cannot open training log under " + out);
    Trainer::Sink sink = [&log](const json& record) { log << record.dump() << "\n"; };

    trainer.run(loader, out, sink);

    json summary;
    summary["epochs"] = trainer.epoch();
    summary["steps"] = trainer.step();
    if (!trainer.eval_history().empty()) {
        const int best = select_checkpoint(trainer.eval_history());
        char name[32];
        std::snprintf(name, sizeof(name), "ckpt_%04d", best);
        summary["best_checkpoint"] = name;
        summary["best_epoch"] = best;
    }
    std::ofstream sf(fs::path(out) / "summary.json", std::ios::trunc);
    sf << summary.dump(2) << "\n";
    std::cout << "training complete: " << trainer.step() << " steps, checkpoints under " << out
              << "\n";
    return 0;
}

int run_infer(const std::string& ckpt, const std::string& manifest_path,
              const std::string& resolution, const std::string& guidance, const std::string& out,
              bool png) {
    const fs::path ckpt_path(ckpt);
    const fs::path container_file =
        fs::is_directory(ckpt_path) ? ckpt_path / "generator.ct" : ckpt_path;
    PanColorGenerator gen =
        PanColorGenerator::from_container(io::read_container(container_file));

    const fs::path manifest_file(manifest_path);
    const DatasetManifest manifest = load_manifest(manifest_file);
    AugmentSpec augment;  // inference always degrades at the fixed ratio
    BundleLoader loader(manifest, manifest_file.parent_path(), augment);

    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out);

    const GuidanceKind guide = guidance_from_string(guidance);
    for (size_t i = 0; i < loader.size(); ++i) {
        const ManifestEntry& entry = manifest.entries[i];
        Raster pred;
        if (resolution == "reduced") {
            const PatchBundle bundle = loader.load(i, 0);
            pred = infer_reduced(gen, bundle, guide);
        } else if (resolution == "full") {
            const auto ms_it = entry.rasters.find("y_ms");
            const auto pan_it = entry.rasters.find("y_pan");
            if (ms_it == entry.rasters.end() || pan_it == entry.rasters.end())
                throw ValidationError("full-resolution inference needs y_ms and y_pan for " +
                                      entry.patch_id);
            const Raster y_ms = io::load_raster(manifest_file.parent_path() / ms_it->second);
            const Raster y_pan = io::load_raster(manifest_file.parent_path() / pan_it->second);
            pred = infer_full(gen, y_pan, y_ms);
        } else {
            throw ValidationError("resolution must be reduced or full");
        }
        io::save_raster(fs::path(out) / (entry.patch_id + ".pct"), pred);
        if (png) io::write_png_preview(fs::path(out) / (entry.patch_id + ".png"), pred);
    }
    write_run_json(out, "infer",
                   json{{"ckpt", ckpt},
                        {"manifest", manifest_path},
                        {"resolution", resolution},
                        {"guidance", guidance},
                        {"png", png},
                        {"patches", loader.size()}});
    std::cout << "wrote " << loader.size() << " predictions to " << out << "\n";
    return 0;
}

int run_evaluate(const std::string& pred_dir, const std::string& manifest_path,
                 const std::string& mode, const std::string& out_path, int ratio) {
    if (mode != "reference" && mode != "no-reference")
        throw ValidationError("evaluate mode must be reference or no-reference");
    const fs::path manifest_file(manifest_path);
    const DatasetManifest manifest = load_manifest(manifest_file);
    const fs::path base = manifest_file.parent_path();

    // Per-patch scoring is pure and runs in parallel; the report keeps
    // manifest order.
    std::vector<std::pair<std::string, std::map<std::string, double>>> per_patch(
        manifest.entries.size());
    parallel_for(manifest.entries.size(), [&](size_t i) {
        const ManifestEntry& entry = manifest.entries[i];
        const fs::path pred_path = fs::path(pred_dir) / (entry.patch_id + ".pct");
        if (!fs::exists(pred_path))
            throw ValidationError("missing prediction for " + entry.patch_id + ": " +
                                  pred_path.string());
        const Raster pred = io::load_raster(pred_path);
        std::map<std::string, double> values;
        if (mode == "reference") {
            const Raster ref = io::load_raster(base / entry.rasters.at("y_ms"));
            const auto s = metrics::reference_suite(pred, ref, ratio);
            values = {{"qave", s.qave}, {"q", s.q}, {"scc", s.scc}, {"sam", s.sam},
                      {"ergas", s.ergas}};
        } else {
            const auto pan_it = entry.rasters.find("y_pan");
            if (pan_it == entry.rasters.end())
                throw ValidationError("no-reference evaluation needs y_pan for " + entry.patch_id);
            const Raster ms = io::load_raster(base / entry.rasters.at("y_ms"));
            const Raster pan = io::load_raster(base / pan_it->second);
            const auto s = metrics::no_reference_suite(pred, ms, pan, ratio);
            values = {{"d_lambda", s.d_lambda}, {"d_s", s.d_s}, {"qnr", s.qnr}};
        }
        per_patch[i] = {entry.patch_id, std::move(values)};
    });

    const auto report = metrics::aggregate_report(
        std::move(per_patch), json{{"mode", mode},
                                   {"ratio", ratio},
                                   {"uiqi_window", 32},
                                   {"scc_highpass", "laplacian4"},
                                   {"pan_degradation", "bicubic"},
                                   {"value_space", "unit"}});
    std::ofstream jf(out_path, std::ios::trunc);
    if (!jf) throw IoError("cannot write " + out_path);
    jf << metrics::metric_report_to_json(report).dump(2) << "\n";
    fs::path csv_path(out_path);
    csv_path.replace_extension(".csv");
    std::ofstream cf(csv_path, std::ios::trunc);
    cf << metrics::metric_report_to_csv(report);
    write_run_json(fs::path(out_path).parent_path(), "evaluate",
                   json{{"pred_dir", pred_dir},
                        {"manifest", manifest_path},
                        {"mode", mode},
                        {"ratio", ratio},
                        {"out", out_path}});
    std::cout << "evaluated " << report.per_patch.size() << " patches -> " << out_path << "\n";
    return 0;
}

int run_sharpness(const std::string& ms_path, const std::string& pan_path,
                  const std::string& out_path, int ratio, int bit_depth) {
    Raster ms, pan;
    if (bit_depth > 0) {
        NormalizationSpec norm;
        norm.bit_depth = bit_depth;
        ms = normalize(io::load_raster(ms_path, ValueRange::raw_dn), norm);
        pan = normalize(io::load_raster(pan_path, ValueRange::raw_dn), norm);
    } else {
        ms = io::load_raster(ms_path);
        pan = io::load_raster(pan_path);
    }
    const auto report = metrics::sharpness_report(pan, ms, ratio);
    const std::string csv = metrics::sharpness_report_csv(report);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + out_path);
    out << csv;
    write_run_json(fs::path(out_path).parent_path(), "sharpness-report",
                   json{{"ms", ms_path},
                        {"pan", pan_path},
                        {"ratio", ratio},
                        {"bit_depth", bit_depth},
                        {"out", out_path}});
    std::cout << csv;
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Self-supervised pansharpening toolkit: guided-colorization GAN training, "
                 "reduced/full-resolution inference and fusion quality evaluation"};
    app.require_subcommand(1);

    // prepare
    auto* prep = app.add_subcommand("prepare", "Tile paired scenes into a training dataset");
    std::string ms_dir, pan_dir, prep_out, split = "train";
    int stride = 256, bit_depth = 12, tile_size = 256;
    prep->add_option("--ms-dir", ms_dir, "Directory of multispectral scene tensors")->required();
    prep->add_option("--pan-dir", pan_dir, "Directory of panchromatic scene tensors")->required();
    prep->add_option("--out", prep_out, "Output dataset directory")->required();
    prep->add_option("--stride", stride, "Tiling stride in MS pixels");
    prep->add_option("--bit-depth", bit_depth, "DN bit depth of the input scenes");
    prep->add_option("--tile-size", tile_size, "MS tile extent");
    prep->add_option("--split", split, "Dataset split (train or test)");

    // train
    auto* train = app.add_subcommand("train", "Train a pansharpening model");
    std::string manifest_path, train_out, mode = "pancolorgan", adversarial = "ragan";
    std::string config_file, resume;
    TrainConfig defaults;
    uint64_t seed = 0;
    int epochs = defaults.epochs, batch_size = defaults.batch_size;
    double lr = defaults.lr, alpha = defaults.loss.alpha;
    int base_channels = defaults.generator.base_channels;
    int holdout = 0, eval_every = 1;
    train->add_option("--manifest", manifest_path, "Training manifest")->required();
    train->add_option("--mode", mode, "pancolorgan, pancolorgan_rd or pansrgan");
    train->add_option("--out", train_out,
                      "Checkpoint/output directory (default: $PANCOLOR_CHECKPOINT_DIR)");
    train->add_option("--seed", seed, "Master seed");
    train->add_option("--epochs", epochs, "Training epochs");
    train->add_option("--batch-size", batch_size, "Mini-batch size");
    train->add_option("--lr", lr, "Adam learning rate");
    train->add_option("--alpha", alpha, "Adversarial loss weight");
    train->add_option("--adversarial", adversarial, "ragan or vanilla");
    train->add_option("--base-channels", base_channels, "Generator base width");
    train->add_option("--holdout", holdout, "Held-out patches for per-epoch evaluation");
    train->add_option("--eval-every", eval_every, "Epochs between held-out evaluations");
    train->add_option("--config", config_file, "JSON config file (flags override it)");
    train->add_option("--resume", resume, "Checkpoint directory to resume from");

    // infer
    auto* infer = app.add_subcommand("infer", "Run pansharpening inference");
    std::string ckpt, infer_manifest, resolution = "reduced", guidance = "gms", infer_out;
    bool png = false;
    infer->add_option("--ckpt", ckpt, "Checkpoint directory or generator container")->required();
    infer->add_option("--manifest", infer_manifest, "Dataset manifest")->required();
    infer->add_option("--resolution", resolution, "reduced or full");
    infer->add_option("--guidance", guidance, "gms or pan (reduced resolution only)");
    infer->add_option("--out", infer_out, "Output directory")->required();
    infer->add_flag("--png", png, "Also write 8-bit PNG previews");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Score predictions against a manifest");
    std::string pred_dir, eval_manifest, eval_mode = "reference", eval_out = "report.json";
    int eval_ratio = 4;
    eval->add_option("--pred-dir", pred_dir, "Directory of prediction tensors")->required();
    eval->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    eval->add_option("--mode", eval_mode, "reference or no-reference");
    eval->add_option("--out", eval_out, "Report JSON path (CSV written alongside)");
    eval->add_option("--ratio", eval_ratio, "Sensor resolution ratio");

    // sharpness-report
    auto* sharp = app.add_subcommand("sharpness-report",
                                     "PSNR/sCC/SSIM of reduced PAN vs grayscale MS, with and "
                                     "without the 5x5 sigma-2 blur");
    std::string sharp_ms, sharp_pan, sharp_out = "table.csv";
    int sharp_ratio = 4, sharp_bit_depth = 0;
    sharp->add_option("--ms", sharp_ms, "Multispectral raster")->required();
    sharp->add_option("--pan", sharp_pan, "Panchromatic raster")->required();
    sharp->add_option("--out", sharp_out, "Output CSV path");
    sharp->add_option("--ratio", sharp_ratio, "PAN/MS extent ratio");
    sharp->add_option("--bit-depth", sharp_bit_depth,
                      "Treat inputs as raw DN at this bit depth (0 = already normalized)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (prep->parsed())
            return run_prepare(ms_dir, pan_dir, prep_out, stride, bit_depth, tile_size, split);
        if (train->parsed()) {
            TrainConfig cfg;
            json merged = train_config_to_json(cfg);
            if (!config_file.empty()) {
                std::ifstream cf(config_file);
                if (!cf) throw IoError("cannot open config file " + config_file);
                json overlay;
                cf >> overlay;
                merged.merge_patch(overlay);
            }
            cfg = train_config_from_json(merged);
            // Flags override the config file.
            if (train->count("--mode") || config_file.empty())
                cfg.mode = train_mode_from_string(mode);
            if (train->count("--seed")) cfg.seed = seed;
            if (train->count("--epochs")) cfg.epochs = epochs;
            if (train->count("--batch-size")) cfg.batch_size = batch_size;
            if (train->count("--lr")) cfg.lr = lr;
            if (train->count("--alpha")) cfg.loss.alpha = alpha;
            if (train->count("--adversarial"))
                cfg.loss.adversarial = losses::adversarial_from_string(adversarial);
            if (train->count("--base-channels")) cfg.generator.base_channels = base_channels;
            if (train->count("--holdout")) cfg.holdout_count = holdout;
            if (train->count("--eval-every")) cfg.eval_every = eval_every;
            cfg.augment.mode = cfg.mode == TrainMode::pancolorgan_rd
                                   ? AugmentMode::random_downsample
                                   : AugmentMode::fixed_ratio;
            // Seed 0 means "derive from the master seed"; an explicit value
            // from the config file wins.
            if (cfg.augment.rng_seed == 0) cfg.augment.rng_seed = Rng::mix({cfg.seed, 0x61756755ULL});
            if (train_out.empty()) {
                const char* env = std::getenv("PANCOLOR_CHECKPOINT_DIR");
                if (!env || !*env)
                    throw ValidationError(
                        "no --out given and PANCOLOR_CHECKPOINT_DIR is not set");
                train_out = env;
            }
            cfg.validate();
            return run_train(cfg, manifest_path, train_out, resume,
                             train->count("--epochs") > 0);
        }
        if (infer->parsed())
            return run_infer(ckpt, infer_manifest, resolution, guidance, infer_out, png);
        if (eval->parsed())
            return run_evaluate(pred_dir, eval_manifest, eval_mode, eval_out, eval_ratio);
        if (sharp->parsed())
            return run_sharpness(sharp_ms, sharp_pan, sharp_out, sharp_ratio, sharp_bit_depth);
        std::cerr << app.help();
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args);
}

}  // namespace pancolor::cli
