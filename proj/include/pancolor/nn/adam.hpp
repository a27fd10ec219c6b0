#pragma once

#include <cstdint>
#include <vector>

#include "pancolor/nn/tensor.hpp"
#include "pancolor/tensor_io.hpp"

namespace pancolor::nn {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Adam with bias correction. Moment tensors are created lazily on the first
// step and serialize alongside the model so training resumes bit-exactly.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void step(const std::vector<Parameter*>& params);

    int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

    io::Container to_container(const std::vector<Parameter*>& params) const;
    void from_container(const io::Container& c, const std::vector<Parameter*>& params);

private:
    void ensure_state(const std::vector<Parameter*>& params);

    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace pancolor::nn
