#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "pancolor/nn/layers.hpp"
#include "pancolor/nn/tensor.hpp"
#include "pancolor/tensor_io.hpp"

namespace pancolor {

// Conditional patch discriminator: five 4x4 stride-2 convolutions over the
// 9-channel conditioned stack, then a 4x4 stride-1 projection to one channel
// of RAW scores. The sigmoid lives in the loss module (the relativistic
// average formulation needs pre-sigmoid scores), and the first stage carries
// no normalization unless first_stage_norm is set.
struct DiscriminatorConfig {
    int in_channels = 9;
    std::vector<int> widths = {64, 128, 256, 512, 512};
    int kernel = 4;
    int stride = 2;
    int padding = 1;
    bool first_stage_norm = false;
    double leaky_slope = 0.2;

    void validate() const;
};

// Spatial extent of the score map for a square input of the given extent.
int discriminator_output_extent(const DiscriminatorConfig& cfg, int input_extent);

class PatchDiscriminator {
public:
    PatchDiscriminator(DiscriminatorConfig cfg, uint64_t init_seed);

    // stack: (N, in_channels, H, W) -> raw scores (N, 1, h', w').
    nn::Tensor forward(const nn::Tensor& stack, nn::Mode mode, bool record = true);
    // Returns the gradient with respect to the stack.
    nn::Tensor backward(const nn::Tensor& dscores);

    std::vector<nn::Parameter*> parameters();
    std::vector<std::pair<std::string, nn::Tensor*>> buffers();
    void zero_grad();
    size_t parameter_count();

    const DiscriminatorConfig& config() const { return cfg_; }

    io::Container to_container() const;
    static PatchDiscriminator from_container(const io::Container& c);

private:
    DiscriminatorConfig cfg_;
    uint64_t init_seed_ = 0;
    std::vector<nn::Conv2d> convs_;
    std::vector<std::unique_ptr<nn::BatchNorm2d>> norms_;  // norms_[0] null unless configured
    std::vector<nn::LeakyReLU> acts_;
    std::unique_ptr<nn::Conv2d> final_conv_;
};

struct ScoreStatistics {
    double mean;
    double min;
    double max;
};

// Exact streaming statistics over a non-empty score map.
ScoreStatistics score_statistics(const nn::Tensor& map);

nlohmann::json discriminator_config_to_json(const DiscriminatorConfig& cfg);
DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j);

}  // namespace pancolor
