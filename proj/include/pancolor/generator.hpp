#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pancolor/nn/layers.hpp"
#include "pancolor/nn/tensor.hpp"
#include "pancolor/tensor_io.hpp"

namespace pancolor {

// Colorization generator configuration. The guidance branch extracts spatial
// detail from the single-band input; the color branch runs a parallel conv
// chain over the degraded multispectral input and its features are
// concatenated into the guidance trunk at every stage listed in
// injection_points (all stages except the first, by default). A residual
// stack transforms the bottleneck and the decoder synthesizes the output with
// nearest-neighbour upsampling, 3x3 convolutions and skip concatenations from
// the trunk. Every convolution is followed by batch normalization and
// LeakyReLU except the output projection, which ends in tanh.
struct GeneratorConfig {
    int base_channels = 32;
    int encoder_depth = 4;
    std::vector<int> injection_points = {2, 3, 4};
    int residual_blocks = 1;
    int guidance_channels = 1;
    int color_channels = 4;
    int output_channels = 4;
    double leaky_slope = 0.2;

    void validate() const;

    // Channel width of encoder stage i (1-based): base doubling per stage.
    int stage_width(int stage) const { return base_channels << (stage - 1); }
    bool injects_at(int stage) const;
    // Width of the trunk after stage i, including injected color features.
    int trunk_width(int stage) const;
    int bottleneck_width() const { return trunk_width(encoder_depth); }
    // Decoder stage j (1-based, j = 1 nearest the bottleneck) output width.
    int decoder_width(int stage) const;
};

// Receptive field of the bottleneck with respect to the guidance input,
// by conv-arithmetic recursion over the encoder and residual stack.
int count_receptive_field(const GeneratorConfig& cfg);

nlohmann::json generator_config_to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

class PanColorGenerator {
public:
    PanColorGenerator(GeneratorConfig cfg, uint64_t init_seed);

    // guidance: (N, guidance_channels, H, W); ms_up: (N, color_channels, H, W).
    // H and W must be divisible by 2^encoder_depth. Output values lie strictly
    // inside (-1, 1).
    nn::Tensor forward(const nn::Tensor& guidance, const nn::Tensor& ms_up, nn::Mode mode,
                       bool record = true);

    // Backpropagates dL/d(output); accumulates parameter gradients and
    // returns (d_guidance, d_ms).
    std::pair<nn::Tensor, nn::Tensor> backward(const nn::Tensor& dy);

    std::vector<nn::Parameter*> parameters();
    std::vector<std::pair<std::string, nn::Tensor*>> buffers();
    void zero_grad();
    size_t parameter_count();

    const GeneratorConfig& config() const { return cfg_; }

    io::Container to_container() const;
    static PanColorGenerator from_container(const io::Container& c);

private:
    struct ConvBlock {
        ConvBlock(const std::string& name, int in_c, int out_c, int stride, double slope)
            : conv(name, in_c, out_c, 3, stride, 1), bn(name + ".bn", out_c), act(slope) {}
        nn::Tensor forward(const nn::Tensor& x, nn::Mode m, bool record) {
            return act.forward(bn.forward(conv.forward(x, m, record), m, record), m, record);
        }
        nn::Tensor backward(const nn::Tensor& dy) {
            return conv.backward(bn.backward(act.backward(dy)));
        }
        nn::Conv2d conv;
        nn::BatchNorm2d bn;
        nn::LeakyReLU act;
    };
    struct ResBlock {
        ResBlock(const std::string& name, int ch, double slope)
            : a(name + ".a", ch, ch, 1, slope), b(name + ".b", ch, ch, 1, slope) {}
        nn::Tensor forward(const nn::Tensor& x, nn::Mode m, bool record) {
            nn::Tensor branch = b.forward(a.forward(x, m, record), m, record);
            nn::Tensor y = x;
            for (size_t i = 0; i < y.size(); ++i) y.v[i] += branch.v[i];
            return y;
        }
        nn::Tensor backward(const nn::Tensor& dy) {
            nn::Tensor dx = a.backward(b.backward(dy));
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dy.v[i];
            return dx;
        }
        ConvBlock a, b;
    };

    GeneratorConfig cfg_;
    uint64_t init_seed_ = 0;
    std::vector<ConvBlock> guidance_;
    std::vector<ConvBlock> color_;
    std::vector<ResBlock> residual_;
    std::vector<ConvBlock> decoder_;
    std::unique_ptr<nn::Conv2d> out_conv_;
    nn::Tanh out_act_;

    // Backward bookkeeping: trunk tensors feed both the next encoder stage
    // and a decoder skip, so their shapes are recorded during forward.
    std::vector<nn::Tensor> trunk_shapes_;
    bool has_tape_ = false;

    void build();
};

}  // namespace pancolor
