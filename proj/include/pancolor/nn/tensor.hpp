#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pancolor/errors.hpp"

namespace pancolor::nn {

// Dense NCHW tensor, double precision throughout. Training and gradient
// verification both run in 64-bit; rasters are converted on the way in/out.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

    static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }

    double& at(int i, int ci, int y, int x) {
        return v[((static_cast<size_t>(i) * c + ci) * h + y) * w + x];
    }
    double at(int i, int ci, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + ci) * h + y) * w + x];
    }

    double* plane(int i, int ci) { return v.data() + (static_cast<size_t>(i) * c + ci) * h * w; }
    const double* plane(int i, int ci) const {
        return v.data() + (static_cast<size_t>(i) * c + ci) * h * w;
    }

    void fill(double value) { v.assign(v.size(), value); }
};

enum class Mode { train, eval };

// A named, trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string name_, Tensor value_)
        : name(std::move(name_)), value(std::move(value_)),
          grad(value.n, value.c, value.h, value.w) {}

    void zero_grad() { grad.fill(0.0); }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ValidationError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
}

}  // namespace pancolor::nn
