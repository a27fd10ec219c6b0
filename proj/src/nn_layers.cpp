#include "pancolor/nn/layers.hpp"

#include <Eigen/Core>

#include <cmath>

namespace pancolor::nn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<MatRM>;
using MapConst = Eigen::Map<const MatRM>;

namespace {

// Eigen initializes its GEMM blocking-size globals lazily on the first
// product; force that before any worker threads exist (tile inference and
// evaluation run layer forwards concurrently).
const bool eigen_ready = [] {
    Eigen::initParallel();
    return true;
}();

}  // namespace

Conv2d::Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad)
    : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), pad_(pad),
      weight_(name + ".weight", Tensor(out_c, in_c, kernel, kernel)),
      bias_(name + ".bias", Tensor(out_c, 1, 1, 1)) {
    if (in_c < 1 || out_c < 1 || kernel < 1 || stride < 1 || pad < 0)
        throw ValidationError("Conv2d: invalid configuration for " + name);
}

void Conv2d::init(Rng& rng, double init_std) {
    for (double& v : weight_.value.v) v = rng.normal(0.0, init_std);
    bias_.value.fill(0.0);
}

void Conv2d::im2col(const Tensor& x, int sample, std::vector<double>& col) const {
    const int oh = out_extent(x.h, kernel_, stride_, pad_);
    const int ow = out_extent(x.w, kernel_, stride_, pad_);
    const size_t patch = static_cast<size_t>(oh) * ow;
    col.assign(static_cast<size_t>(in_c_) * kernel_ * kernel_ * patch, 0.0);
    size_t row = 0;
    for (int ci = 0; ci < in_c_; ++ci) {
        const double* src = x.plane(sample, ci);
        for (int ky = 0; ky < kernel_; ++ky) {
            for (int kx = 0; kx < kernel_; ++kx, ++row) {
                double* dst = col.data() + row * patch;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= x.h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride_ - pad_ + kx;
                        if (ix < 0 || ix >= x.w) continue;
                        dst[static_cast<size_t>(oy) * ow + ox] =
                            src[static_cast<size_t>(iy) * x.w + ix];
                    }
                }
            }
        }
    }
}

Tensor Conv2d::forward(const Tensor& x, Mode mode, bool record) {
    if (x.c != in_c_)
        throw ValidationError(weight_.name + ": expected " + std::to_string(in_c_) +
                              " input channels, got " + std::to_string(x.c));
    const int oh = out_extent(x.h, kernel_, stride_, pad_);
    const int ow = out_extent(x.w, kernel_, stride_, pad_);
    if (oh < 1 || ow < 1)
        throw ValidationError(weight_.name + ": input " + x.shape_str() +
                              " too small for this convolution");
    Tensor y(x.n, out_c_, oh, ow);
    const size_t patch = static_cast<size_t>(oh) * ow;
    const int k2 = in_c_ * kernel_ * kernel_;
    std::vector<double> col;
    MapConst wmat(weight_.value.v.data(), out_c_, k2);
    for (int i = 0; i < x.n; ++i) {
        im2col(x, i, col);
        MapConst cmat(col.data(), k2, static_cast<Eigen::Index>(patch));
        MapMat ymat(y.plane(i, 0), out_c_, static_cast<Eigen::Index>(patch));
        ymat.noalias() = wmat * cmat;
        for (int oc = 0; oc < out_c_; ++oc)
            ymat.row(oc).array() += bias_.value.v[static_cast<size_t>(oc)];
    }
    if (mode == Mode::train && record) tape_.push_back(x);
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    if (tape_.empty()) throw ValidationError(weight_.name + ": backward without recorded forward");
    const Tensor x = std::move(tape_.back());
    tape_.pop_back();
    const int oh = dy.h, ow = dy.w;
    const size_t patch = static_cast<size_t>(oh) * ow;
    const int k2 = in_c_ * kernel_ * kernel_;
    Tensor dx(x.n, x.c, x.h, x.w);
    std::vector<double> col;
    std::vector<double> dcol(static_cast<size_t>(k2) * patch);
    MapConst wmat(weight_.value.v.data(), out_c_, k2);
    MapMat dwmat(weight_.grad.v.data(), out_c_, k2);
    for (int i = 0; i < x.n; ++i) {
        im2col(x, i, col);
        MapConst cmat(col.data(), k2, static_cast<Eigen::Index>(patch));
        MapConst dymat(dy.plane(i, 0), out_c_, static_cast<Eigen::Index>(patch));
        dwmat.noalias() += dymat * cmat.transpose();
        for (int oc = 0; oc < out_c_; ++oc)
            bias_.grad.v[static_cast<size_t>(oc)] += dymat.row(oc).sum();
        MapMat dcmat(dcol.data(), k2, static_cast<Eigen::Index>(patch));
        dcmat.noalias() = wmat.transpose() * dymat;
        // col2im scatter-add.
        size_t row = 0;
        for (int ci = 0; ci < in_c_; ++ci) {
            double* dst = dx.plane(i, ci);
            for (int ky = 0; ky < kernel_; ++ky) {
                for (int kx = 0; kx < kernel_; ++kx, ++row) {
                    const double* src = dcol.data() + row * patch;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= x.w) continue;
                            dst[static_cast<size_t>(iy) * x.w + ix] +=
                                src[static_cast<size_t>(oy) * ow + ox];
                        }
                    }
                }
            }
        }
    }
    return dx;
}

BatchNorm2d::BatchNorm2d(std::string name, int channels, double momentum, double eps)
    : name_(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps),
      gamma_(name_ + ".gamma", Tensor(channels, 1, 1, 1)),
      beta_(name_ + ".beta", Tensor(channels, 1, 1, 1)),
      running_mean_(channels, 1, 1, 1), running_var_(channels, 1, 1, 1) {
    gamma_.value.fill(1.0);
    running_var_.fill(1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode, bool record) {
    if (x.c != channels_) throw ValidationError(name_ + ": channel mismatch");
    Tensor y(x.n, x.c, x.h, x.w);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    if (mode == Mode::train) {
        if (x.n < 2)
            throw ValidationError(name_ +
                                  ": normalization degeneracy, train mode needs batch size >= 2");
        const double m = static_cast<double>(x.n) * plane;
        Tape tape;
        tape.xhat = Tensor(x.n, x.c, x.h, x.w);
        tape.invstd.assign(channels_, 0.0);
        for (int ci = 0; ci < channels_; ++ci) {
            double sum = 0.0, sumsq = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const double* p = x.plane(i, ci);
                for (size_t j = 0; j < plane; ++j) {
                    sum += p[j];
                    sumsq += p[j] * p[j];
                }
            }
            const double mean = sum / m;
            const double var = sumsq / m - mean * mean;  // biased, used for normalization
            const double invstd = 1.0 / std::sqrt(var + eps_);
            tape.invstd[ci] = invstd;
            const double g = gamma_.value.v[ci], b = beta_.value.v[ci];
            for (int i = 0; i < x.n; ++i) {
                const double* p = x.plane(i, ci);
                double* xh = tape.xhat.plane(i, ci);
                double* out = y.plane(i, ci);
                for (size_t j = 0; j < plane; ++j) {
                    xh[j] = (p[j] - mean) * invstd;
                    out[j] = g * xh[j] + b;
                }
            }
            // Running averages keep the unbiased variance, momentum 0.1.
            const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
            running_mean_.v[ci] = (1.0 - momentum_) * running_mean_.v[ci] + momentum_ * mean;
            running_var_.v[ci] = (1.0 - momentum_) * running_var_.v[ci] + momentum_ * unbiased;
        }
        if (record) tape_.push_back(std::move(tape));
    } else {
        for (int ci = 0; ci < channels_; ++ci) {
            const double invstd = 1.0 / std::sqrt(running_var_.v[ci] + eps_);
            const double mean = running_mean_.v[ci];
            const double g = gamma_.value.v[ci], b = beta_.value.v[ci];
            for (int i = 0; i < x.n; ++i) {
                const double* p = x.plane(i, ci);
                double* out = y.plane(i, ci);
                for (size_t j = 0; j < plane; ++j) out[j] = g * (p[j] - mean) * invstd + b;
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
    if (tape_.empty()) throw ValidationError(name_ + ": backward without recorded forward");
    const Tape tape = std::move(tape_.back());
    tape_.pop_back();
    check_same_shape(dy, tape.xhat, "BatchNorm2d::backward");
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    const size_t plane = static_cast<size_t>(dy.h) * dy.w;
    const double m = static_cast<double>(dy.n) * plane;
    for (int ci = 0; ci < channels_; ++ci) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < dy.n; ++i) {
            const double* d = dy.plane(i, ci);
            const double* xh = tape.xhat.plane(i, ci);
            for (size_t j = 0; j < plane; ++j) {
                sum_dy += d[j];
                sum_dy_xhat += d[j] * xh[j];
            }
        }
        gamma_.grad.v[ci] += sum_dy_xhat;
        beta_.grad.v[ci] += sum_dy;
        const double g = gamma_.value.v[ci];
        const double invstd = tape.invstd[ci];
        // dx = gamma*invstd/m * (m*dy - sum(dy) - xhat * sum(dy*xhat))
        const double scale = g * invstd / m;
        for (int i = 0; i < dy.n; ++i) {
            const double* d = dy.plane(i, ci);
            const double* xh = tape.xhat.plane(i, ci);
            double* out = dx.plane(i, ci);
            for (size_t j = 0; j < plane; ++j)
                out[j] = scale * (m * d[j] - sum_dy - xh[j] * sum_dy_xhat);
        }
    }
    return dx;
}

Tensor LeakyReLU::forward(const Tensor& x, Mode mode, bool record) {
    Tensor y(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > 0.0 ? x.v[i] : slope_ * x.v[i];
    if (mode == Mode::train && record) tape_.push_back(x);
    return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) {
    if (tape_.empty()) throw ValidationError("LeakyReLU: backward without recorded forward");
    const Tensor x = std::move(tape_.back());
    tape_.pop_back();
    check_same_shape(dy, x, "LeakyReLU::backward");
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    for (size_t i = 0; i < dy.size(); ++i) dx.v[i] = x.v[i] > 0.0 ? dy.v[i] : slope_ * dy.v[i];
    return dx;
}

Tensor Tanh::forward(const Tensor& x, Mode mode, bool record) {
    Tensor y(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.size(); ++i) y.v[i] = std::tanh(x.v[i]);
    if (mode == Mode::train && record) tape_.push_back(y);
    return y;
}

Tensor Tanh::backward(const Tensor& dy) {
    if (tape_.empty()) throw ValidationError("Tanh: backward without recorded forward");
    const Tensor y = std::move(tape_.back());
    tape_.pop_back();
    check_same_shape(dy, y, "Tanh::backward");
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    for (size_t i = 0; i < dy.size(); ++i) dx.v[i] = dy.v[i] * (1.0 - y.v[i] * y.v[i]);
    return dx;
}

Tensor upsample_nearest2x(const Tensor& x) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int i = 0; i < x.n; ++i)
        for (int ci = 0; ci < x.c; ++ci) {
            const double* src = x.plane(i, ci);
            double* dst = y.plane(i, ci);
            for (int yy = 0; yy < y.h; ++yy) {
                const double* row = src + static_cast<size_t>(yy / 2) * x.w;
                double* out = dst + static_cast<size_t>(yy) * y.w;
                for (int xx = 0; xx < y.w; ++xx) out[xx] = row[xx / 2];
            }
        }
    return y;
}

Tensor upsample_nearest2x_backward(const Tensor& dy) {
    if (dy.h % 2 != 0 || dy.w % 2 != 0)
        throw ValidationError("upsample backward: odd spatial extent");
    Tensor dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int i = 0; i < dy.n; ++i)
        for (int ci = 0; ci < dy.c; ++ci) {
            const double* src = dy.plane(i, ci);
            double* dst = dx.plane(i, ci);
            for (int yy = 0; yy < dy.h; ++yy)
                for (int xx = 0; xx < dy.w; ++xx)
                    dst[static_cast<size_t>(yy / 2) * dx.w + xx / 2] +=
                        src[static_cast<size_t>(yy) * dy.w + xx];
        }
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw ValidationError("concat_channels: spatial/batch mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
    Tensor y(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int i = 0; i < a.n; ++i) {
        for (int ci = 0; ci < a.c; ++ci)
            std::copy(a.plane(i, ci), a.plane(i, ci) + plane, y.plane(i, ci));
        for (int ci = 0; ci < b.c; ++ci)
            std::copy(b.plane(i, ci), b.plane(i, ci) + plane, y.plane(i, a.c + ci));
    }
    return y;
}

void split_channels(const Tensor& dy, Tensor& da, Tensor& db) {
    if (dy.c != da.c + db.c || dy.n != da.n || dy.h != da.h || dy.w != da.w)
        throw ValidationError("split_channels: shape mismatch");
    const size_t plane = static_cast<size_t>(dy.h) * dy.w;
    for (int i = 0; i < dy.n; ++i) {
        for (int ci = 0; ci < da.c; ++ci)
            std::copy(dy.plane(i, ci), dy.plane(i, ci) + plane, da.plane(i, ci));
        for (int ci = 0; ci < db.c; ++ci)
            std::copy(dy.plane(i, da.c + ci), dy.plane(i, da.c + ci) + plane, db.plane(i, ci));
    }
}

int receptive_field(const std::vector<ConvLayerSpec>& chain) {
    int field = 1;
    int jump = 1;
    for (const auto& layer : chain) {
        field += (layer.kernel - 1) * jump;
        jump *= layer.stride;
    }
    return field;
}

}  // namespace pancolor::nn
