#include "pancolor/generator.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace pancolor {

using nn::Mode;
using nn::Tensor;

void GeneratorConfig::validate() const {
    if (base_channels < 8) throw ValidationError("GeneratorConfig: base_channels must be >= 8");
    if (encoder_depth < 1) throw ValidationError("GeneratorConfig: encoder_depth must be >= 1");
    if (residual_blocks < 1) throw ValidationError("GeneratorConfig: residual_blocks must be >= 1");
    if (guidance_channels < 1 || color_channels < 1 || output_channels < 1)
        throw ValidationError("GeneratorConfig: channel counts must be >= 1");
    for (int p : injection_points)
        if (p < 2 || p > encoder_depth)
            throw ValidationError("GeneratorConfig: injection points must lie in [2, encoder_depth]");
}

bool GeneratorConfig::injects_at(int stage) const {
    return std::find(injection_points.begin(), injection_points.end(), stage) !=
           injection_points.end();
}

int GeneratorConfig::trunk_width(int stage) const {
    return stage_width(stage) + (injects_at(stage) ? stage_width(stage) : 0);
}

int GeneratorConfig::decoder_width(int stage) const {
    const int skip_stage = encoder_depth - stage;
    return skip_stage >= 1 ? stage_width(skip_stage) : base_channels;
}

int count_receptive_field(const GeneratorConfig& cfg) {
    std::vector<nn::ConvLayerSpec> chain;
    for (int i = 0; i < cfg.encoder_depth; ++i) chain.push_back({3, 2});
    for (int i = 0; i < 2 * cfg.residual_blocks; ++i) chain.push_back({3, 1});
    return nn::receptive_field(chain);
}

PanColorGenerator::PanColorGenerator(GeneratorConfig cfg, uint64_t init_seed)
    : cfg_(std::move(cfg)), init_seed_(init_seed) {
    cfg_.validate();
    build();
    Rng rng(init_seed_);
    for (auto& blk : guidance_) blk.conv.init(rng);
    for (auto& blk : color_) blk.conv.init(rng);
    for (auto& blk : residual_) {
        blk.a.conv.init(rng);
        blk.b.conv.init(rng);
    }
    for (auto& blk : decoder_) blk.conv.init(rng);
    out_conv_->init(rng);
}

void PanColorGenerator::build() {
    const double slope = cfg_.leaky_slope;
    for (int i = 1; i <= cfg_.encoder_depth; ++i) {
        const int g_in = i == 1 ? cfg_.guidance_channels : cfg_.trunk_width(i - 1);
        guidance_.emplace_back("g.guid" + std::to_string(i), g_in, cfg_.stage_width(i), 2, slope);
        const int c_in = i == 1 ? cfg_.color_channels : cfg_.stage_width(i - 1);
        color_.emplace_back("g.color" + std::to_string(i), c_in, cfg_.stage_width(i), 2, slope);
    }
    for (int r = 0; r < cfg_.residual_blocks; ++r)
        residual_.emplace_back("g.res" + std::to_string(r + 1), cfg_.bottleneck_width(), slope);
    int prev = cfg_.bottleneck_width();
    for (int j = 1; j <= cfg_.encoder_depth; ++j) {
        const int skip_stage = cfg_.encoder_depth - j;
        const int in_c = prev + (skip_stage >= 1 ? cfg_.trunk_width(skip_stage) : 0);
        const int out_c = cfg_.decoder_width(j);
        decoder_.emplace_back("g.dec" + std::to_string(j), in_c, out_c, 1, slope);
        prev = out_c;
    }
    out_conv_ = std::make_unique<nn::Conv2d>("g.out", prev, cfg_.output_channels, 3, 1, 1);
}

Tensor PanColorGenerator::forward(const Tensor& guidance, const Tensor& ms_up, Mode mode,
                                  bool record) {
    if (guidance.c != cfg_.guidance_channels)
        throw ValidationError("generator: guidance channel count mismatch");
    if (ms_up.c != cfg_.color_channels)
        throw ValidationError("generator: color input channel count mismatch");
    if (guidance.n != ms_up.n || guidance.h != ms_up.h || guidance.w != ms_up.w)
        throw ValidationError("generator: guidance and color inputs must share batch and size");
    const int div = 1 << cfg_.encoder_depth;
    if (guidance.h % div != 0 || guidance.w % div != 0)
        throw ValidationError("generator: input extent must be divisible by 2^encoder_depth");
    for (double v : guidance.v)
        if (!std::isfinite(v)) throw ValidationError("generator: non-finite guidance input");
    for (double v : ms_up.v)
        if (!std::isfinite(v)) throw ValidationError("generator: non-finite color input");

    const bool rec = mode == Mode::train && record;
    std::vector<Tensor> trunk;  // trunk[i] = features after stage i+1
    trunk.reserve(cfg_.encoder_depth);
    Tensor g;  // current guidance trunk
    Tensor c = ms_up;
    for (int i = 1; i <= cfg_.encoder_depth; ++i) {
        g = guidance_[i - 1].forward(i == 1 ? guidance : g, mode, rec);
        c = color_[i - 1].forward(c, mode, rec);
        if (cfg_.injects_at(i)) g = nn::concat_channels(g, c);
        trunk.push_back(g);
    }

    Tensor bottleneck = trunk.back();
    for (auto& blk : residual_) bottleneck = blk.forward(bottleneck, mode, rec);

    Tensor d = bottleneck;
    for (int j = 1; j <= cfg_.encoder_depth; ++j) {
        d = nn::upsample_nearest2x(d);
        const int skip_stage = cfg_.encoder_depth - j;
        if (skip_stage >= 1) d = nn::concat_channels(d, trunk[skip_stage - 1]);
        d = decoder_[j - 1].forward(d, mode, rec);
    }
    Tensor y = out_act_.forward(out_conv_->forward(d, mode, rec), mode, rec);
    // tanh saturates to exactly +-1.0 for |x| beyond ~19; nudge back inside
    // the open interval the contract promises.
    for (double& v : y.v) {
        if (v >= 1.0) v = std::nextafter(1.0, 0.0);
        if (v <= -1.0) v = std::nextafter(-1.0, 0.0);
    }

    if (rec) {
        trunk_shapes_.clear();
        for (const Tensor& t : trunk) trunk_shapes_.push_back(Tensor(t.n, t.c, t.h, t.w));
        has_tape_ = true;
    }
    return y;
}

std::pair<Tensor, Tensor> PanColorGenerator::backward(const Tensor& dy) {
    if (!has_tape_) throw ValidationError("generator: backward without train-mode forward");

    Tensor d = out_conv_->backward(out_act_.backward(dy));

    // Skip gradients accumulate per trunk stage while unwinding the decoder.
    std::vector<Tensor> skip_grad(cfg_.encoder_depth);
    for (int j = cfg_.encoder_depth; j >= 1; --j) {
        d = decoder_[j - 1].backward(d);
        const int skip_stage = cfg_.encoder_depth - j;
        if (skip_stage >= 1) {
            const Tensor& shape = trunk_shapes_[skip_stage - 1];
            Tensor d_up(d.n, d.c - shape.c, d.h, d.w);
            Tensor d_skip(shape.n, shape.c, shape.h, shape.w);
            nn::split_channels(d, d_up, d_skip);
            skip_grad[skip_stage - 1] = std::move(d_skip);
            d = nn::upsample_nearest2x_backward(d_up);
        } else {
            d = nn::upsample_nearest2x_backward(d);
        }
    }

    for (auto it = residual_.rbegin(); it != residual_.rend(); ++it) d = it->backward(d);

    // Unwind the encoder trunk; color-stage gradients collect separately.
    std::vector<Tensor> color_grad(cfg_.encoder_depth);
    Tensor d_guidance;
    for (int i = cfg_.encoder_depth; i >= 1; --i) {
        Tensor dg;
        if (cfg_.injects_at(i)) {
            const int gw = cfg_.stage_width(i);
            dg = Tensor(d.n, gw, d.h, d.w);
            Tensor dc(d.n, d.c - gw, d.h, d.w);
            nn::split_channels(d, dg, dc);
            color_grad[i - 1] = std::move(dc);
        } else {
            dg = std::move(d);
        }
        Tensor d_prev = guidance_[i - 1].backward(dg);
        if (i > 1) {
            d = std::move(d_prev);
            if (skip_grad[i - 2].size() > 0)
                for (size_t k = 0; k < d.size(); ++k) d.v[k] += skip_grad[i - 2].v[k];
        } else {
            d_guidance = std::move(d_prev);
        }
    }

    Tensor d_color;
    for (int i = cfg_.encoder_depth; i >= 1; --i) {
        Tensor dc;
        if (color_grad[i - 1].size() > 0) {
            dc = std::move(color_grad[i - 1]);
            if (d_color.size() > 0)
                for (size_t k = 0; k < dc.size(); ++k) dc.v[k] += d_color.v[k];
        } else if (d_color.size() > 0) {
            dc = std::move(d_color);
        } else {
            // Stage output unused anywhere downstream: zero gradient.
            dc = Tensor(trunk_shapes_[i - 1].n, cfg_.stage_width(i), trunk_shapes_[i - 1].h,
                        trunk_shapes_[i - 1].w);
        }
        d_color = color_[i - 1].backward(dc);
    }
    has_tape_ = false;
    return {std::move(d_guidance), std::move(d_color)};
}

std::vector<nn::Parameter*> PanColorGenerator::parameters() {
    std::vector<nn::Parameter*> out;
    auto add = [&out](std::vector<nn::Parameter*> ps) {
        out.insert(out.end(), ps.begin(), ps.end());
    };
    for (auto& blk : guidance_) {
        add(blk.conv.params());
        add(blk.bn.params());
    }
    for (auto& blk : color_) {
        add(blk.conv.params());
        add(blk.bn.params());
    }
    for (auto& blk : residual_) {
        add(blk.a.conv.params());
        add(blk.a.bn.params());
        add(blk.b.conv.params());
        add(blk.b.bn.params());
    }
    for (auto& blk : decoder_) {
        add(blk.conv.params());
        add(blk.bn.params());
    }
    add(out_conv_->params());
    return out;
}

std::vector<std::pair<std::string, Tensor*>> PanColorGenerator::buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto add = [&out](std::vector<std::pair<std::string, Tensor*>> bs) {
        out.insert(out.end(), bs.begin(), bs.end());
    };
    for (auto& blk : guidance_) add(blk.bn.buffers());
    for (auto& blk : color_) add(blk.bn.buffers());
    for (auto& blk : residual_) {
        add(blk.a.bn.buffers());
        add(blk.b.bn.buffers());
    }
    for (auto& blk : decoder_) add(blk.bn.buffers());
    return out;
}

void PanColorGenerator::zero_grad() {
    for (nn::Parameter* p : parameters()) p->zero_grad();
}

size_t PanColorGenerator::parameter_count() {
    size_t n = 0;
    for (nn::Parameter* p : parameters()) n += p->value.size();
    return n;
}

namespace {

io::TensorBlob tensor_to_blob(const Tensor& t) {
    io::TensorBlob blob;
    blob.dims = {static_cast<uint32_t>(t.n), static_cast<uint32_t>(t.c),
                 static_cast<uint32_t>(t.h), static_cast<uint32_t>(t.w)};
    blob.values = t.v;
    return blob;
}

void blob_into_tensor(const io::TensorBlob& blob, Tensor& t, const std::string& name) {
    if (blob.values.size() != t.size())
        throw ValidationError("checkpoint tensor size mismatch at " + name);
    t.v = blob.values;
}

}  // namespace

nlohmann::json generator_config_to_json(const GeneratorConfig& cfg) {
    return nlohmann::json{{"base_channels", cfg.base_channels},
                          {"encoder_depth", cfg.encoder_depth},
                          {"injection_points", cfg.injection_points},
                          {"residual_blocks", cfg.residual_blocks},
                          {"guidance_channels", cfg.guidance_channels},
                          {"color_channels", cfg.color_channels},
                          {"output_channels", cfg.output_channels},
                          {"leaky_slope", cfg.leaky_slope}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig cfg;
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.encoder_depth = j.at("encoder_depth").get<int>();
    cfg.injection_points = j.at("injection_points").get<std::vector<int>>();
    cfg.residual_blocks = j.at("residual_blocks").get<int>();
    cfg.guidance_channels = j.at("guidance_channels").get<int>();
    cfg.color_channels = j.at("color_channels").get<int>();
    cfg.output_channels = j.at("output_channels").get<int>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    return cfg;
}

io::Container PanColorGenerator::to_container() const {
    io::Container c;
    nlohmann::json meta;
    meta["kind"] = "generator";
    meta["config"] = generator_config_to_json(cfg_);
    meta["init_seed"] = init_seed_;
    c.meta_json = meta.dump();
    auto* self = const_cast<PanColorGenerator*>(this);
    for (nn::Parameter* p : self->parameters())
        c.tensors.emplace_back(p->name, tensor_to_blob(p->value));
    for (auto& [name, buf] : self->buffers()) c.tensors.emplace_back(name, tensor_to_blob(*buf));
    return c;
}

PanColorGenerator PanColorGenerator::from_container(const io::Container& c) {
    const auto meta = nlohmann::json::parse(c.meta_json);
    if (meta.value("kind", "") != "generator")
        throw ValidationError("container does not hold a generator checkpoint");
    PanColorGenerator g(generator_config_from_json(meta.at("config")),
                        meta.value("init_seed", uint64_t{0}));
    size_t idx = 0;
    for (nn::Parameter* p : g.parameters()) {
        if (idx >= c.tensors.size() || c.tensors[idx].first != p->name)
            throw ValidationError("generator checkpoint missing tensor " + p->name);
        blob_into_tensor(c.tensors[idx].second, p->value, p->name);
        ++idx;
    }
    for (auto& [name, buf] : g.buffers()) {
        if (idx >= c.tensors.size() || c.tensors[idx].first != name)
            throw ValidationError("generator checkpoint missing buffer " + name);
        blob_into_tensor(c.tensors[idx].second, *buf, name);
        ++idx;
    }
    return g;
}

}  // namespace pancolor
