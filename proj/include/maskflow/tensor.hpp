#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "maskflow/errors.hpp"

namespace maskflow {

// Dense row-major n-d array. Video tensors are (T, C, H, W), token grids
// (N, D), conv kernels (Cout, Cin, kt, kh, kw).
template <typename S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> sh) : shape(std::move(sh)), v(count(shape)) {}
    Tensor(std::initializer_list<int> sh) : Tensor(std::vector<int>(sh)) {}

    static int64_t count(const std::vector<int>& sh) {
        int64_t n = 1;
        for (int d : sh) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    S* data() { return v.data(); }
    const S* data() const { return v.data(); }
    S& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
    const S& operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

    void fill(S x) { std::fill(v.begin(), v.end(), x); }
    void zero() { fill(S(0)); }

    // (T, C, H, W) accessor for the common video layout.
    S& at4(int t, int c, int y, int x) {
        return v[((static_cast<int64_t>(t) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    S at4(int t, int c, int y, int x) const {
        return v[((static_cast<int64_t>(t) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    // (N, D) accessor for token layouts.
    S& at2(int i, int j) { return v[static_cast<int64_t>(i) * shape[1] + j]; }
    S at2(int i, int j) const { return v[static_cast<int64_t>(i) * shape[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    Tensor& operator+=(const Tensor& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
        return *this;
    }
    Tensor& operator*=(S a) {
        for (auto& x : v) x *= a;
        return *this;
    }
};

template <typename S>
bool all_finite(const Tensor<S>& t) {
    for (S x : t.v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

template <typename S>
double l2_norm(const Tensor<S>& t) {
    double s = 0;
    for (S x : t.v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
    double m = 0;
    for (size_t i = 0; i < a.v.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.v[i]) - static_cast<double>(b.v[i])));
    return m;
}

template <typename S>
double mean_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
    double s = 0;
    for (size_t i = 0; i < a.v.size(); ++i)
        s += std::abs(static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]));
    return a.v.empty() ? 0.0 : s / static_cast<double>(a.v.size());
}

// Relative max deviation, guarded for near-zero references.
template <typename S>
double rel_max_diff(const Tensor<S>& a, const Tensor<S>& b) {
    double m = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        double x = static_cast<double>(a.v[i]), y = static_cast<double>(b.v[i]);
        double denom = std::max({std::abs(x), std::abs(y), 1e-12});
        m = std::max(m, std::abs(x - y) / denom);
    }
    return m;
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace maskflow
