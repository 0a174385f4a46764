#pragma once

#include <cmath>

#include "maskflow/linalg.hpp"
#include "maskflow/params.hpp"

namespace maskflow {

// ---------------------------------------------------------------- Linear ---

template <typename S>
struct LinearCache {
    Tensor<S> x;  // (N, Din)
};

// y = x * W^T + b, W stored (Dout, Din).
template <typename S>
struct Linear {
    int w = -1, b = -1;
    int din = 0, dout = 0;

    void init(ParamStore<S>& P, const std::string& name, int din_, int dout_, Rng& rng,
              double w_std, bool zero_weight = false, bool with_bias = true) {
        din = din_;
        dout = dout_;
        Tensor<S> wt({dout, din});
        if (!zero_weight) init_normal(wt, rng, w_std);
        w = P.add(name + ".weight", std::move(wt));
        if (with_bias) {
            Tensor<S> bt({dout});
            b = P.add(name + ".bias", std::move(bt));
        }
    }

    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& x, LinearCache<S>& c) const {
        const int N = x.dim(0);
        Tensor<S> y({N, dout});
        matmul(x.data(), P[w].data(), y.data(), N, din, dout, false, true);
        if (b >= 0) {
            const S* bias = P[b].data();
            for (int i = 0; i < N; ++i) {
                S* row = y.data() + static_cast<int64_t>(i) * dout;
                for (int j = 0; j < dout; ++j) row[j] += bias[j];
            }
        }
        c.x = x;
        return y;
    }

    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& gy, const LinearCache<S>& c,
                       GradStore<S>& G) const {
        const int N = gy.dim(0);
        matmul(gy.data(), c.x.data(), G[w].data(), dout, N, din, true, false, true);
        if (b >= 0) {
            S* gb = G[b].data();
            for (int i = 0; i < N; ++i) {
                const S* row = gy.data() + static_cast<int64_t>(i) * dout;
                for (int j = 0; j < dout; ++j) gb[j] += row[j];
            }
        }
        Tensor<S> gx({N, din});
        matmul(gy.data(), P[w].data(), gx.data(), N, dout, din);
        return gx;
    }
};

// ---------------------------------------------------------------- Conv3d ---

template <typename S>
struct Conv3dCache {
    Tensor<S> cols;          // im2col of the input
    std::vector<int> x_shape;
};

template <typename S>
struct Conv3d {
    ConvGeom geom;
    int w = -1, b = -1;

    void init(ParamStore<S>& P, const std::string& name, const ConvGeom& g, Rng& rng, double w_std) {
        geom = g;
        Tensor<S> wt({g.cout, g.cin, g.kt, g.kh, g.kw});
        init_normal(wt, rng, w_std);
        w = P.add(name + ".weight", std::move(wt));
        Tensor<S> bt({g.cout});
        b = P.add(name + ".bias", std::move(bt));
    }

    // x: (T, Cin, H, W) -> (T', Cout, H', W')
    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& x, Conv3dCache<S>& c) const {
        check(x.dim(1) == geom.cin, "conv3d: input channel mismatch");
        const int To = geom.out_t(x.dim(0)), Ho = geom.out_h(x.dim(2)), Wo = geom.out_w(x.dim(3));
        im2col(x, geom, c.cols);
        c.x_shape = x.shape;
        const int rows = To * Ho * Wo;
        const int K = static_cast<int>(geom.kernel_cols());
        Tensor<S> flat({rows, geom.cout});
        matmul(c.cols.data(), P[w].data(), flat.data(), rows, K, geom.cout, false, true);
        Tensor<S> y({To, geom.cout, Ho, Wo});
        const S* bias = P[b].data();
        for (int t = 0; t < To; ++t)
            for (int o = 0; o < geom.cout; ++o)
                for (int yy = 0; yy < Ho; ++yy)
                    for (int xx = 0; xx < Wo; ++xx)
                        y.at4(t, o, yy, xx) = flat.at2((t * Ho + yy) * Wo + xx, o) + bias[o];
        return y;
    }

    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& gy, const Conv3dCache<S>& c,
                       GradStore<S>& G) const {
        const int To = gy.dim(0), Ho = gy.dim(2), Wo = gy.dim(3);
        const int rows = To * Ho * Wo;
        const int K = static_cast<int>(geom.kernel_cols());
        Tensor<S> gflat({rows, geom.cout});
        S* gb = G[b].data();
        for (int t = 0; t < To; ++t)
            for (int o = 0; o < geom.cout; ++o)
                for (int yy = 0; yy < Ho; ++yy)
                    for (int xx = 0; xx < Wo; ++xx) {
                        S g = gy.at4(t, o, yy, xx);
                        gflat.at2((t * Ho + yy) * Wo + xx, o) = g;
                        gb[o] += g;
                    }
        matmul(gflat.data(), c.cols.data(), G[w].data(), geom.cout, rows, K, true, false, true);
        Tensor<S> gcols({rows, K});
        matmul(gflat.data(), P[w].data(), gcols.data(), rows, geom.cout, K);
        Tensor<S> gx(c.x_shape);
        col2im(gcols, geom, gx);
        return gx;
    }
};

// ------------------------------------------------------------------ SiLU ---

template <typename S>
struct SiluCache {
    Tensor<S> x;
};

template <typename S>
using EArr = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
template <typename S>
using ECArr = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;

template <typename S>
Tensor<S> silu_forward(const Tensor<S>& x, SiluCache<S>& c) {
    Tensor<S> y(x.shape);
    ECArr<S> xa(x.data(), x.numel());
    EArr<S> ya(y.data(), y.numel());
    ya = xa / (S(1) + (-xa).exp());
    c.x = x;
    return y;
}

template <typename S>
Tensor<S> silu_backward(const Tensor<S>& gy, const SiluCache<S>& c) {
    Tensor<S> gx(c.x.shape);
    ECArr<S> xa(c.x.data(), c.x.numel());
    ECArr<S> ga(gy.data(), gy.numel());
    EArr<S> oa(gx.data(), gx.numel());
    oa = S(1) / (S(1) + (-xa).exp());  // sigmoid
    oa = ga * (oa + xa * oa * (S(1) - oa));
    return gx;
}

// ------------------------------------------------------------- LayerNorm ---

// Non-affine layer norm over the last axis of an (N, D) tensor; scale/shift
// come from adaptive modulation outside.
template <typename S>
struct LayerNormCache {
    Tensor<S> xhat;     // (N, D)
    std::vector<S> inv_std;  // (N)
};

template <typename S>
Tensor<S> layernorm_forward(const Tensor<S>& x, LayerNormCache<S>& c, S eps = S(1e-6)) {
    const int N = x.dim(0), D = x.dim(1);
    Tensor<S> y({N, D});
    c.xhat = Tensor<S>({N, D});
    c.inv_std.assign(static_cast<size_t>(N), S(0));
    for (int i = 0; i < N; ++i) {
        const S* row = x.data() + static_cast<int64_t>(i) * D;
        S mu = 0;
        for (int j = 0; j < D; ++j) mu += row[j];
        mu /= static_cast<S>(D);
        S var = 0;
        for (int j = 0; j < D; ++j) {
            S d = row[j] - mu;
            var += d * d;
        }
        var /= static_cast<S>(D);
        S inv = S(1) / std::sqrt(var + eps);
        c.inv_std[static_cast<size_t>(i)] = inv;
        S* xh = c.xhat.data() + static_cast<int64_t>(i) * D;
        S* yr = y.data() + static_cast<int64_t>(i) * D;
        for (int j = 0; j < D; ++j) {
            xh[j] = (row[j] - mu) * inv;
            yr[j] = xh[j];
        }
    }
    return y;
}

template <typename S>
Tensor<S> layernorm_backward(const Tensor<S>& gy, const LayerNormCache<S>& c) {
    const int N = gy.dim(0), D = gy.dim(1);
    Tensor<S> gx({N, D});
    for (int i = 0; i < N; ++i) {
        const S* g = gy.data() + static_cast<int64_t>(i) * D;
        const S* xh = c.xhat.data() + static_cast<int64_t>(i) * D;
        S mean_g = 0, mean_gx = 0;
        for (int j = 0; j < D; ++j) {
            mean_g += g[j];
            mean_gx += g[j] * xh[j];
        }
        mean_g /= static_cast<S>(D);
        mean_gx /= static_cast<S>(D);
        S inv = c.inv_std[static_cast<size_t>(i)];
        S* out = gx.data() + static_cast<int64_t>(i) * D;
        for (int j = 0; j < D; ++j) out[j] = inv * (g[j] - mean_g - xh[j] * mean_gx);
    }
    return gx;
}

}  // namespace maskflow
