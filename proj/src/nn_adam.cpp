#include "pancolor/nn/adam.hpp"

#include <cmath>

#include "json.hpp"

namespace pancolor::nn {

void Adam::ensure_state(const std::vector<Parameter*>& params) {
    if (!m_.empty()) {
        if (m_.size() != params.size())
            throw ValidationError("Adam: parameter list changed size mid-run");
        return;
    }
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Parameter* p : params) {
        m_.emplace_back(p->value.n, p->value.c, p->value.h, p->value.w);
        v_.emplace_back(p->value.n, p->value.c, p->value.h, p->value.w);
    }
}

void Adam::step(const std::vector<Parameter*>& params) {
    ensure_state(params);
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        for (size_t i = 0; i < p.value.size(); ++i) {
            double g = p.grad.v[i];
            if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p.value.v[i];
            m.v[i] = cfg_.beta1 * m.v[i] + (1.0 - cfg_.beta1) * g;
            v.v[i] = cfg_.beta2 * v.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

namespace {

io::TensorBlob to_blob(const Tensor& t) {
    io::TensorBlob blob;
    blob.dims = {static_cast<uint32_t>(t.n), static_cast<uint32_t>(t.c),
                 static_cast<uint32_t>(t.h), static_cast<uint32_t>(t.w)};
    blob.values = t.v;
    return blob;
}

}  // namespace

io::Container Adam::to_container(const std::vector<Parameter*>& params) const {
    io::Container c;
    nlohmann::json meta;
    meta["t"] = t_;
    meta["lr"] = cfg_.lr;
    meta["beta1"] = cfg_.beta1;
    meta["beta2"] = cfg_.beta2;
    meta["eps"] = cfg_.eps;
    meta["weight_decay"] = cfg_.weight_decay;
    c.meta_json = meta.dump();
    if (!m_.empty()) {
        for (size_t i = 0; i < params.size(); ++i) {
            c.tensors.emplace_back("m." + params[i]->name, to_blob(m_[i]));
            c.tensors.emplace_back("v." + params[i]->name, to_blob(v_[i]));
        }
    }
    return c;
}

void Adam::from_container(const io::Container& c, const std::vector<Parameter*>& params) {
    const auto meta = nlohmann::json::parse(c.meta_json);
    t_ = meta.at("t").get<int64_t>();
    m_.clear();
    v_.clear();
    if (c.tensors.empty()) return;
    if (c.tensors.size() != params.size() * 2)
        throw ValidationError("Adam: checkpoint tensor count mismatch");
    ensure_state(params);
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& [mname, mblob] = c.tensors[2 * i];
        const auto& [vname, vblob] = c.tensors[2 * i + 1];
        if (mname != "m." + params[i]->name || vname != "v." + params[i]->name)
            throw ValidationError("Adam: checkpoint parameter order mismatch at " + mname);
        if (mblob.values.size() != m_[i].size() || vblob.values.size() != v_[i].size())
            throw ValidationError("Adam: checkpoint tensor size mismatch at " + mname);
        m_[i].v = mblob.values;
        v_[i].v = vblob.values;
    }
}

}  // namespace pancolor::nn
