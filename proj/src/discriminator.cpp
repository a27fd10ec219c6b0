#include "pancolor/discriminator.hpp"

#include <algorithm>
#include <limits>

namespace pancolor {

using nn::Mode;
using nn::Tensor;

void DiscriminatorConfig::validate() const {
    if (in_channels < 1) throw ValidationError("DiscriminatorConfig: in_channels must be >= 1");
    if (widths.size() != 5) throw ValidationError("DiscriminatorConfig: exactly 5 stage widths");
    for (size_t i = 1; i < widths.size(); ++i)
        if (widths[i] < widths[i - 1])
            throw ValidationError("DiscriminatorConfig: widths must be non-decreasing");
    if (widths.front() < 1) throw ValidationError("DiscriminatorConfig: widths must be positive");
    if (kernel < 1 || stride < 1 || padding < 0)
        throw ValidationError("DiscriminatorConfig: bad kernel/stride/padding");
}

int discriminator_output_extent(const DiscriminatorConfig& cfg, int input_extent) {
    int e = input_extent;
    for (size_t i = 0; i < cfg.widths.size(); ++i)
        e = nn::Conv2d::out_extent(e, cfg.kernel, cfg.stride, cfg.padding);
    return nn::Conv2d::out_extent(e, cfg.kernel, 1, cfg.padding);
}

PatchDiscriminator::PatchDiscriminator(DiscriminatorConfig cfg, uint64_t init_seed)
    : cfg_(std::move(cfg)), init_seed_(init_seed) {
    cfg_.validate();
    int in_c = cfg_.in_channels;
    for (size_t i = 0; i < cfg_.widths.size(); ++i) {
        const std::string name = "d.stage" + std::to_string(i + 1);
        convs_.emplace_back(name, in_c, cfg_.widths[i], cfg_.kernel, cfg_.stride, cfg_.padding);
        if (i > 0 || cfg_.first_stage_norm)
            norms_.push_back(std::make_unique<nn::BatchNorm2d>(name + ".bn", cfg_.widths[i]));
        else
            norms_.push_back(nullptr);
        acts_.emplace_back(cfg_.leaky_slope);
        in_c = cfg_.widths[i];
    }
    final_conv_ = std::make_unique<nn::Conv2d>("d.final", in_c, 1, cfg_.kernel, 1, cfg_.padding);
    Rng rng(init_seed_);
    for (auto& conv : convs_) conv.init(rng);
    final_conv_->init(rng);
}

Tensor PatchDiscriminator::forward(const Tensor& stack, Mode mode, bool record) {
    if (stack.c != cfg_.in_channels)
        throw ValidationError("discriminator: expected " + std::to_string(cfg_.in_channels) +
                              " channels, got " + std::to_string(stack.c));
    Tensor x = stack;
    for (size_t i = 0; i < convs_.size(); ++i) {
        x = convs_[i].forward(x, mode, record);
        if (norms_[i]) x = norms_[i]->forward(x, mode, record);
        x = acts_[i].forward(x, mode, record);
    }
    return final_conv_->forward(x, mode, record);
}

Tensor PatchDiscriminator::backward(const Tensor& dscores) {
    Tensor d = final_conv_->backward(dscores);
    for (size_t i = convs_.size(); i-- > 0;) {
        d = acts_[i].backward(d);
        if (norms_[i]) d = norms_[i]->backward(d);
        d = convs_[i].backward(d);
    }
    return d;
}

std::vector<nn::Parameter*> PatchDiscriminator::parameters() {
    std::vector<nn::Parameter*> out;
    for (size_t i = 0; i < convs_.size(); ++i) {
        auto ps = convs_[i].params();
        out.insert(out.end(), ps.begin(), ps.end());
        if (norms_[i]) {
            auto ns = norms_[i]->params();
            out.insert(out.end(), ns.begin(), ns.end());
        }
    }
    auto fs = final_conv_->params();
    out.insert(out.end(), fs.begin(), fs.end());
    return out;
}

std::vector<std::pair<std::string, Tensor*>> PatchDiscriminator::buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& n : norms_) {
        if (!n) continue;
        auto bs = n->buffers();
        out.insert(out.end(), bs.begin(), bs.end());
    }
    return out;
}

void PatchDiscriminator::zero_grad() {
    for (nn::Parameter* p : parameters()) p->zero_grad();
}

size_t PatchDiscriminator::parameter_count() {
    size_t n = 0;
    for (nn::Parameter* p : parameters()) n += p->value.size();
    return n;
}

ScoreStatistics score_statistics(const nn::Tensor& map) {
    if (map.size() == 0) throw ValidationError("score_statistics: empty map");
    ScoreStatistics s{0.0, std::numeric_limits<double>::infinity(),
                      -std::numeric_limits<double>::infinity()};
    double sum = 0.0;
    for (double v : map.v) {
        sum += v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(map.size());
    return s;
}

nlohmann::json discriminator_config_to_json(const DiscriminatorConfig& cfg) {
    return nlohmann::json{{"in_channels", cfg.in_channels}, {"widths", cfg.widths},
                          {"kernel", cfg.kernel},           {"stride", cfg.stride},
                          {"padding", cfg.padding},         {"first_stage_norm", cfg.first_stage_norm},
                          {"leaky_slope", cfg.leaky_slope}};
}

DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j) {
    DiscriminatorConfig cfg;
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.widths = j.at("widths").get<std::vector<int>>();
    cfg.kernel = j.at("kernel").get<int>();
    cfg.stride = j.at("stride").get<int>();
    cfg.padding = j.at("padding").get<int>();
    cfg.first_stage_norm = j.at("first_stage_norm").get<bool>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    return cfg;
}

namespace {

io::TensorBlob tensor_to_blob(const Tensor& t) {
    io::TensorBlob blob;
    blob.dims = {static_cast<uint32_t>(t.n), static_cast<uint32_t>(t.c),
                 static_cast<uint32_t>(t.h), static_cast<uint32_t>(t.w)};
    blob.values = t.v;
    return blob;
}

}  // namespace

io::Container PatchDiscriminator::to_container() const {
    io::Container c;
    nlohmann::json meta;
    meta["kind"] = "discriminator";
    meta["config"] = discriminator_config_to_json(cfg_);
    meta["init_seed"] = init_seed_;
    c.meta_json = meta.dump();
    auto* self = const_cast<PatchDiscriminator*>(this);
    for (nn::Parameter* p : self->parameters())
        c.tensors.emplace_back(p->name, tensor_to_blob(p->value));
    for (auto& [name, buf] : self->buffers()) c.tensors.emplace_back(name, tensor_to_blob(*buf));
    return c;
}

PatchDiscriminator PatchDiscriminator::from_container(const io::Container& c) {
    const auto meta = nlohmann::json::parse(c.meta_json);
    if (meta.value("kind", "") != "discriminator")
        throw ValidationError("container does not hold a discriminator checkpoint");
    PatchDiscriminator d(discriminator_config_from_json(meta.at("config")),
                         meta.value("init_seed", uint64_t{0}));
    size_t idx = 0;
    for (nn::Parameter* p : d.parameters()) {
        if (idx >= c.tensors.size() || c.tensors[idx].first != p->name)
            throw ValidationError("discriminator checkpoint missing tensor " + p->name);
        if (c.tensors[idx].second.values.size() != p->value.size())
            throw ValidationError("discriminator checkpoint size mismatch at " + p->name);
        p->value.v = c.tensors[idx].second.values;
        ++idx;
    }
    for (auto& [name, buf] : d.buffers()) {
        if (idx >= c.tensors.size() || c.tensors[idx].first != name)
            throw ValidationError("discriminator checkpoint missing buffer " + name);
        if (c.tensors[idx].second.values.size() != buf->size())
            throw ValidationError("discriminator checkpoint size mismatch at " + name);
        buf->v = c.tensors[idx].second.values;
        ++idx;
    }
    return d;
}

}  // namespace pancolor
