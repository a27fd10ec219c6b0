#pragma once

#include <string>
#include <vector>

#include "pancolor/nn/tensor.hpp"
#include "pancolor/rng.hpp"

namespace pancolor::nn {

// Layers keep a LIFO stack of forward tapes: every recorded train-mode
// forward pushes one entry and every backward pops one, so a module may run
// twice (e.g. a discriminator over its real and fake stacks) before the
// matching backwards arrive in reverse order. Eval forwards, and train
// forwards with record = false (statistics update but no gradient path),
// leave the tape untouched. Gradients accumulate into Parameter::grad until
// zero_grad.

class Conv2d {
public:
    Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad);

    // DCGAN-convention init: weights from N(0, init_std), biases zero.
    void init(Rng& rng, double init_std = 0.02);

    Tensor forward(const Tensor& x, Mode mode, bool record = true);
    Tensor backward(const Tensor& dy);

    std::vector<Parameter*> params() { return {&weight_, &bias_}; }
    int in_channels() const { return in_c_; }
    int out_channels() const { return out_c_; }

    static int out_extent(int in, int kernel, int stride, int pad) {
        return (in + 2 * pad - kernel) / stride + 1;
    }

private:
    void im2col(const Tensor& x, int sample, std::vector<double>& col) const;

    int in_c_, out_c_, kernel_, stride_, pad_;
    Parameter weight_;  // (out_c, in_c, k, k)
    Parameter bias_;    // (out_c, 1, 1, 1)
    std::vector<Tensor> tape_;
};

class BatchNorm2d {
public:
    BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5);

    Tensor forward(const Tensor& x, Mode mode, bool record = true);
    Tensor backward(const Tensor& dy);

    std::vector<Parameter*> params() { return {&gamma_, &beta_}; }
    // Running statistics: not optimized, but part of the checkpoint.
    std::vector<std::pair<std::string, Tensor*>> buffers() {
        return {{name_ + ".running_mean", &running_mean_}, {name_ + ".running_var", &running_var_}};
    }

private:
    struct Tape {
        Tensor xhat;
        std::vector<double> invstd;
    };

    std::string name_;
    int channels_;
    double momentum_, eps_;
    Parameter gamma_, beta_;
    Tensor running_mean_, running_var_;
    std::vector<Tape> tape_;
};

class LeakyReLU {
public:
    explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
    Tensor forward(const Tensor& x, Mode mode, bool record = true);
    Tensor backward(const Tensor& dy);

private:
    double slope_;
    std::vector<Tensor> tape_;
};

class Tanh {
public:
    Tensor forward(const Tensor& x, Mode mode, bool record = true);
    Tensor backward(const Tensor& dy);

private:
    std::vector<Tensor> tape_;
};

// Nearest-neighbour 2x upsampling and its adjoint (2x2 block sum).
Tensor upsample_nearest2x(const Tensor& x);
Tensor upsample_nearest2x_backward(const Tensor& dy);

Tensor concat_channels(const Tensor& a, const Tensor& b);
// Splits the gradient of concat_channels(a, b) back into the two inputs.
void split_channels(const Tensor& dy, Tensor& da, Tensor& db);

// Theoretical receptive field of a chain of (kernel, stride) layers.
struct ConvLayerSpec {
    int kernel;
    int stride;
};
int receptive_field(const std::vector<ConvLayerSpec>& chain);

}  // namespace pancolor::nn
