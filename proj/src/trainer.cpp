#include "pancolor/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pancolor/metrics.hpp"

namespace pancolor {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Mode;
using nn::Tensor;

namespace {

constexpr size_t kLossHistoryCap = 1000;

}  // namespace

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::pancolorgan: return "pancolorgan";
        case TrainMode::pancolorgan_rd: return "pancolorgan_rd";
        case TrainMode::pansrgan: return "pansrgan";
    }
    throw ValidationError("bad train mode");
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "pancolorgan") return TrainMode::pancolorgan;
    if (s == "pancolorgan_rd") return TrainMode::pancolorgan_rd;
    if (s == "pansrgan") return TrainMode::pansrgan;
    throw ValidationError("unknown train mode: " + s);
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw ValidationError("TrainConfig: batch_size must be >= 2");
    if (!(lr > 0.0)) throw ValidationError("TrainConfig: lr must be positive");
    if (epochs < 1) throw ValidationError("TrainConfig: epochs must be >= 1");
    if (holdout_count < 0 || eval_every < 1)
        throw ValidationError("TrainConfig: bad holdout/eval settings");
    const bool rd_mode = mode == TrainMode::pancolorgan_rd;
    const bool rd_augment = augment.mode == AugmentMode::random_downsample;
    if (rd_mode != rd_augment)
        throw ValidationError(
            "TrainConfig: pancolorgan_rd and augment.mode=random_downsample imply each other");
    loss.validate();
    augment.validate();
    generator.validate();
    discriminator.validate();
}

json train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["weight_decay"] = cfg.weight_decay;
    j["epochs"] = cfg.epochs;
    j["seed"] = cfg.seed;
    j["loss"] = {{"alpha", cfg.loss.alpha}, {"adversarial", losses::to_string(cfg.loss.adversarial)}};
    j["augment"] = {{"mode", cfg.augment.mode == AugmentMode::random_downsample
                                 ? "random_downsample"
                                 : "fixed_ratio"},
                    {"fixed_factor", cfg.augment.fixed_factor},
                    {"rd_min", cfg.augment.rd_min},
                    {"rd_max", cfg.augment.rd_max},
                    {"rng_seed", cfg.augment.rng_seed}};
    j["generator"] = generator_config_to_json(cfg.generator);
    j["discriminator"] = discriminator_config_to_json(cfg.discriminator);
    j["holdout_count"] = cfg.holdout_count;
    j["eval_every"] = cfg.eval_every;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.mode = train_mode_from_string(j.at("mode").get<std::string>());
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.beta2 = j.at("beta2").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.loss.alpha = j.at("loss").at("alpha").get<double>();
    cfg.loss.adversarial =
        losses::adversarial_from_string(j.at("loss").at("adversarial").get<std::string>());
    const auto& ja = j.at("augment");
    cfg.augment.mode = ja.at("mode").get<std::string>() == "random_downsample"
                           ? AugmentMode::random_downsample
                           : AugmentMode::fixed_ratio;
    cfg.augment.fixed_factor = ja.at("fixed_factor").get<int>();
    cfg.augment.rd_min = ja.at("rd_min").get<int>();
    cfg.augment.rd_max = ja.at("rd_max").get<int>();
    cfg.augment.rng_seed = ja.at("rng_seed").get<uint64_t>();
    cfg.generator = generator_config_from_json(j.at("generator"));
    cfg.discriminator = discriminator_config_from_json(j.at("discriminator"));
    cfg.holdout_count = j.at("holdout_count").get<int>();
    cfg.eval_every = j.at("eval_every").get<int>();
    return cfg;
}

int select_checkpoint(const std::vector<EpochEval>& history) {
    if (history.empty()) throw ValidationError("select_checkpoint: empty history");
    const size_t n = history.size();
    const size_t window = std::max<size_t>(1, (n + 3) / 4);  // last quarter, rounded up
    int best_epoch = history[n - window].epoch;
    double best = history[n - window].qave;
    for (size_t i = n - window; i < n; ++i) {
        if (history[i].qave >= best) {  // ties resolve to the later epoch
            best = history[i].qave;
            best_epoch = history[i].epoch;
        }
    }
    return best_epoch;
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      gen_(std::make_unique<PanColorGenerator>(cfg.generator, Rng::mix({cfg.seed, 0x67656eULL}))),
      disc_(std::make_unique<PatchDiscriminator>(cfg.discriminator,
                                                 Rng::mix({cfg.seed, 0x64697363ULL}))),
      opt_g_({cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay}),
      opt_d_({cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay}) {
    cfg_.validate();
}

Trainer::Trainer(TrainConfig cfg, std::unique_ptr<PanColorGenerator> gen,
                 std::unique_ptr<PatchDiscriminator> disc)
    : cfg_(std::move(cfg)), gen_(std::move(gen)), disc_(std::move(disc)),
      opt_g_({cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8, cfg_.weight_decay}),
      opt_d_({cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8, cfg_.weight_decay}) {}

Tensor Trainer::guidance_batch(std::span<const PatchBundle> batch) {
    const Raster& first = batch[0].y_ms;
    Tensor guidance(static_cast<int>(batch.size()), 1, first.h, first.w);
    for (size_t i = 0; i < batch.size(); ++i) {
        if (cfg_.mode == TrainMode::pansrgan) {
            if (!batch[i].x_pan)
                throw ValidationError("train_step: pansrgan mode requires x_pan in every bundle");
            set_batch_sample(guidance, static_cast<int>(i), *batch[i].x_pan);
            ++counters_.pan_guidance_reads;
        } else {
            set_batch_sample(guidance, static_cast<int>(i), batch[i].x_gms);
            ++counters_.gms_guidance_reads;
        }
    }
    return guidance;
}

StepStats Trainer::train_step(std::span<const PatchBundle> batch) {
    if (batch.size() < 2) throw ValidationError("train_step: batch size must be >= 2");
    const int n = static_cast<int>(batch.size());
    const Raster& first = batch[0].y_ms;

    Tensor guidance = guidance_batch(batch);
    Tensor ms(n, first.c, first.h, first.w);
    Tensor target(n, first.c, first.h, first.w);
    for (int i = 0; i < n; ++i) {
        set_batch_sample(ms, i, batch[i].x_ms);
        set_batch_sample(target, i, batch[i].y_ms);
    }

    // Single generator forward; its output feeds the D update as a constant
    // and the G update through the recorded tape.
    gen_->zero_grad();
    Tensor fake = gen_->forward(guidance, ms, Mode::train);

    const Tensor real_stack = stack_condition(guidance, ms, target);
    const Tensor fake_stack = stack_condition(guidance, ms, fake);

    // --- Discriminator update (Eq. (1): objective over real vs fake) ---
    disc_->zero_grad();
    Tensor real_scores = disc_->forward(real_stack, Mode::train);
    Tensor fake_scores = disc_->forward(fake_stack, Mode::train);
    const double d_loss = losses::discriminator_objective(real_scores.v, fake_scores.v, cfg_.loss);
    Tensor grad_real(real_scores.n, real_scores.c, real_scores.h, real_scores.w);
    Tensor grad_fake(fake_scores.n, fake_scores.c, fake_scores.h, fake_scores.w);
    if (cfg_.loss.adversarial == losses::Adversarial::ragan)
        losses::ragan_pair_grad(real_scores.v, fake_scores.v, grad_real.v, grad_fake.v);
    else
        losses::vanilla_d_grad(real_scores.v, fake_scores.v, grad_real.v, grad_fake.v);
    disc_->backward(grad_fake);  // pops the fake tape
    disc_->backward(grad_real);  // pops the real tape
    opt_d_.step(disc_->parameters());

    // --- Generator update (Eq. (2): L1 + alpha * adversarial) ---
    const double l_rec = losses::l1_reconstruction(fake, target);
    Tensor d_fake = losses::l1_reconstruction_grad(fake, target);
    double l_adv = 0.0;
    {
        // Fresh scores from the just-updated discriminator. The real-stack
        // pass feeds only the relativistic mean, so it records no tape.
        Tensor real2;
        if (cfg_.loss.adversarial == losses::Adversarial::ragan)
            real2 = disc_->forward(real_stack, Mode::train, /*record=*/false);
        Tensor fake2 = disc_->forward(fake_stack, Mode::train);
        std::vector<double> grad_scores(fake2.size());
        l_adv = losses::generator_adversarial(real2.v, fake2.v, cfg_.loss, grad_scores);
        Tensor grad_tensor(fake2.n, fake2.c, fake2.h, fake2.w);
        for (size_t i = 0; i < grad_scores.size(); ++i)
            grad_tensor.v[i] = cfg_.loss.alpha * grad_scores[i];
        Tensor d_stack = disc_->backward(grad_tensor);
        // The generator output occupies the last output_channels of the stack.
        const int offset = 1 + first.c;
        for (int i = 0; i < n; ++i)
            for (int ci = 0; ci < first.c; ++ci) {
                const double* src = d_stack.plane(i, offset + ci);
                double* dst = d_fake.plane(i, ci);
                for (size_t j = 0; j < static_cast<size_t>(first.h) * first.w; ++j)
                    dst[j] += src[j];
            }
    }
    gen_->backward(d_fake);
    opt_g_.step(gen_->parameters());

    ++step_;
    StepStats stats;
    stats.step = step_;
    stats.d_loss = d_loss;
    stats.l_rec = l_rec;
    stats.l_adv = l_adv;
    stats.g_loss = losses::generator_objective(l_rec, l_adv, cfg_.loss);
    if (!std::isfinite(stats.d_loss) || !std::isfinite(stats.g_loss))
        throw TrainingDivergenceError("non-finite loss", step_);
    loss_history_.push_back(stats);
    if (loss_history_.size() > kLossHistoryCap) loss_history_.pop_front();
    return stats;
}

double Trainer::evaluate_holdout(const BundleLoader& loader, int epoch) {
    // Held-out patches are degraded at the fixed ratio regardless of the
    // training augmentation; guidance follows the training objective
    // (grayscale for the colorization modes, reduced PAN for pansrgan).
    AugmentSpec eval_augment = cfg_.augment;
    eval_augment.mode = AugmentMode::fixed_ratio;
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < cfg_.holdout_count && i < static_cast<int>(loader.size()); ++i) {
        const PatchBundle bundle = loader.load_with(static_cast<size_t>(i), epoch, eval_augment);
        if (cfg_.mode == TrainMode::pansrgan && !bundle.x_pan)
            throw ValidationError("held-out evaluation in pansrgan mode needs y_pan rasters");
        const Raster& guidance_raster = cfg_.mode == TrainMode::pansrgan
                                            ? *bundle.x_pan
                                            : bundle.x_gms;
        Tensor pred = gen_->forward(raster_to_tensor(guidance_raster),
                                    raster_to_tensor(bundle.x_ms), Mode::eval);
        const Raster pred_raster = tensor_to_raster(pred, 0, ValueRange::unit_signed);
        const int window = std::min({32, bundle.y_ms.h, bundle.y_ms.w});
        sum += metrics::qave(to_unit_range(pred_raster), to_unit_range(bundle.y_ms), window,
                             window);
        ++count;
    }
    return count > 0 ? sum / count : 0.0;
}

void Trainer::run(const BundleLoader& loader, const fs::path& ckpt_root, const Sink& sink,
                  int until_epoch) {
    if (loader.manifest().split != Split::train)
        throw ValidationError("train_loop: manifest split must be train");
    const size_t total = loader.size();
    if (total == 0) throw ValidationError("train_loop: empty manifest");
    const size_t holdout = std::min<size_t>(cfg_.holdout_count, total);
    const size_t n_train = total - holdout;
    if (n_train < static_cast<size_t>(cfg_.batch_size))
        throw ValidationError("train_loop: fewer training entries than one batch");

    std::error_code ec;
    fs::create_directories(ckpt_root, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + ckpt_root.string());

    const int last_epoch =
        until_epoch > 0 ? std::min(until_epoch, cfg_.epochs) : cfg_.epochs;
    std::vector<size_t> order(n_train);
    for (int e = epoch_ + 1; e <= last_epoch; ++e) {
        for (size_t i = 0; i < n_train; ++i) order[i] = holdout + i;
        // Epoch shuffle from its own derived stream, so interrupted runs
        // replay the exact same batch sequence on resume.
        Rng shuffle_rng(Rng::mix({cfg_.seed, 0x7368756666ULL, static_cast<uint64_t>(e)}));
        for (size_t i = n_train; i > 1; --i) {
            const size_t j = static_cast<size_t>(
                shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        const size_t steps = n_train / static_cast<size_t>(cfg_.batch_size);
        for (size_t s = 0; s < steps; ++s) {
            std::vector<PatchBundle> batch;
            batch.reserve(cfg_.batch_size);
            for (int k = 0; k < cfg_.batch_size; ++k)
                batch.push_back(loader.load(order[s * cfg_.batch_size + k], e, &counters_));
            const StepStats stats = train_step(batch);
            if (sink)
                sink(json{{"event", "step"},
                          {"epoch", e},
                          {"step", stats.step},
                          {"d_loss", stats.d_loss},
                          {"g_loss", stats.g_loss},
                          {"l_rec", stats.l_rec},
                          {"l_adv", stats.l_adv}});
        }

        epoch_ = e;
        if (holdout > 0 && e % cfg_.eval_every == 0) {
            const double score = evaluate_holdout(loader, e);
            eval_history_.push_back({e, score});
            if (sink) sink(json{{"event", "eval"}, {"epoch", e}, {"holdout_qave", score}});
        }

        char name[32];
        std::snprintf(name, sizeof(name), "ckpt_%04d", e);
        save_checkpoint(ckpt_root / name);
        if (sink) sink(json{{"event", "checkpoint"}, {"epoch", e}, {"path", name}});
    }
}

void Trainer::save_checkpoint(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir.string());

    io::write_container(dir / "generator.ct", gen_->to_container());
    io::write_container(dir / "discriminator.ct", disc_->to_container());
    io::write_container(dir / "optim_g.ct", opt_g_.to_container(gen_->parameters()));
    io::write_container(dir / "optim_d.ct", opt_d_.to_container(disc_->parameters()));

    json meta;
    meta["epoch"] = epoch_;
    meta["step"] = step_;
    meta["config"] = train_config_to_json(cfg_);
    meta["eval_history"] = json::array();
    for (const auto& ev : eval_history_)
        meta["eval_history"].push_back({{"epoch", ev.epoch}, {"qave", ev.qave}});
    meta["loss_history"] = json::array();
    for (const auto& st : loss_history_)
        meta["loss_history"].push_back({{"step", st.step},
                                        {"d_loss", st.d_loss},
                                        {"g_loss", st.g_loss},
                                        {"l_rec", st.l_rec},
                                        {"l_adv", st.l_adv}});
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint metadata in " + dir.string());
    out << meta.dump(2) << "\n";
}

void Trainer::set_epochs(int epochs) {
    if (epochs < 1) throw ValidationError("set_epochs: epochs must be >= 1");
    cfg_.epochs = epochs;
}

Trainer Trainer::load_checkpoint(const fs::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw IoError("cannot open checkpoint metadata in " + dir.string());
    json meta;
    in >> meta;
    TrainConfig cfg = train_config_from_json(meta.at("config"));

    auto gen = std::make_unique<PanColorGenerator>(
        PanColorGenerator::from_container(io::read_container(dir / "generator.ct")));
    auto disc = std::make_unique<PatchDiscriminator>(
        PatchDiscriminator::from_container(io::read_container(dir / "discriminator.ct")));

    Trainer t(std::move(cfg), std::move(gen), std::move(disc));
    t.opt_g_.from_container(io::read_container(dir / "optim_g.ct"), t.gen_->parameters());
    t.opt_d_.from_container(io::read_container(dir / "optim_d.ct"), t.disc_->parameters());
    t.epoch_ = meta.at("epoch").get<int>();
    t.step_ = meta.at("step").get<long>();
    for (const auto& ev : meta.at("eval_history"))
        t.eval_history_.push_back({ev.at("epoch").get<int>(), ev.at("qave").get<double>()});
    for (const auto& st : meta.at("loss_history"))
        t.loss_history_.push_back({st.at("step").get<long>(), st.at("d_loss").get<double>(),
                                   st.at("g_loss").get<double>(), st.at("l_rec").get<double>(),
                                   st.at("l_adv").get<double>()});
    return t;
}

}  // namespace pancolor
