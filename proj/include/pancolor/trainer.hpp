#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pancolor/dataset.hpp"
#include "pancolor/discriminator.hpp"
#include "pancolor/generator.hpp"
#include "pancolor/losses.hpp"
#include "pancolor/nn/adam.hpp"
#include "pancolor/pipeline.hpp"

namespace pancolor {

enum class TrainMode { pancolorgan, pancolorgan_rd, pansrgan };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
    TrainMode mode = TrainMode::pancolorgan;
    int batch_size = 16;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    int epochs = 100;
    uint64_t seed = 0;
    losses::LossConfig loss;
    AugmentSpec augment;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    // Manifest entries reserved (from the front) for per-epoch reduced
    // resolution evaluation; 0 disables it.
    int holdout_count = 0;
    int eval_every = 1;

    void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct StepStats {
    long step = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;  // composite generator objective
    double l_rec = 0.0;
    double l_adv = 0.0;
};

struct EpochEval {
    int epoch = 0;
    double qave = 0.0;
};

// Best checkpoint among the last quarter of evaluated epochs (argmax of the
// held-out Q-average; ties resolve to the later epoch). Returns the epoch id.
int select_checkpoint(const std::vector<EpochEval>& history);

// Alternating D/G optimization: one discriminator step on the conditioned
// real/fake stacks (generator output held constant), then one generator step
// on L1 + alpha * adversarial with fresh discriminator scores.
class Trainer {
public:
    explicit Trainer(const TrainConfig& cfg);

    StepStats train_step(std::span<const PatchBundle> batch);

    using Sink = std::function<void(const nlohmann::json&)>;
    // Runs epochs epoch()+1 .. cfg.epochs over the loader, checkpointing
    // under ckpt_root/ckpt_NNNN each epoch. until_epoch > 0 stops earlier
    // (an interrupted run that resumes from its last checkpoint).
    void run(const BundleLoader& loader, const std::filesystem::path& ckpt_root,
             const Sink& sink = {}, int until_epoch = -1);

    void save_checkpoint(const std::filesystem::path& dir) const;
    static Trainer load_checkpoint(const std::filesystem::path& dir);

    // Extends (or shortens) the target epoch count, e.g. when resuming a
    // finished run with a larger budget.
    void set_epochs(int epochs);

    PanColorGenerator& generator() { return *gen_; }
    PatchDiscriminator& discriminator() { return *disc_; }
    const TrainConfig& config() const { return cfg_; }
    int epoch() const { return epoch_; }
    long step() const { return step_; }
    const PipelineCounters& counters() const { return counters_; }
    const std::vector<EpochEval>& eval_history() const { return eval_history_; }
    const std::deque<StepStats>& loss_history() const { return loss_history_; }

private:
    Trainer(TrainConfig cfg, std::unique_ptr<PanColorGenerator> gen,
            std::unique_ptr<PatchDiscriminator> disc);

    nn::Tensor guidance_batch(std::span<const PatchBundle> batch);
    double evaluate_holdout(const BundleLoader& loader, int epoch);

    TrainConfig cfg_;
    std::unique_ptr<PanColorGenerator> gen_;
    std::unique_ptr<PatchDiscriminator> disc_;
    nn::Adam opt_g_;
    nn::Adam opt_d_;
    int epoch_ = 0;
    long step_ = 0;
    std::deque<StepStats> loss_history_;  // bounded ring
    std::vector<EpochEval> eval_history_;
    PipelineCounters counters_;
};

}  // namespace pancolor
