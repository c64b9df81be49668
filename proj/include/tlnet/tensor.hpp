#pragma once

#include <cstdint>
#include <vector>

#include "tlnet/errors.hpp"

namespace tlnet {

/// Dense (n, c, h, w) row-major tensor of 64-bit reals.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), data(size_t(n_) * c_ * h_ * w_, fill) {}

    size_t size() const { return data.size(); }

    double& at(int in, int ic, int iy, int ix) {
        return data[((size_t(in) * c + ic) * h + iy) * w + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return data[((size_t(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeMismatch(what);
}

}  // namespace tlnet
