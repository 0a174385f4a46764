#pragma once

#include <Eigen/Dense>

#include "maskflow/tensor.hpp"

namespace maskflow {

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EMap = Eigen::Map<EMat<S>>;
template <typename S>
using ECMap = Eigen::Map<const EMat<S>>;

// C(M,N) = alpha * op(A) * op(B) + (accumulate ? C : 0), all row-major.
template <typename S>
void matmul(const S* A, const S* B, S* C, int M, int K, int N,
            bool transA = false, bool transB = false, bool accumulate = false) {
    ECMap<S> a(A, transA ? K : M, transA ? M : K);
    ECMap<S> b(B, transB ? N : K, transB ? K : N);
    EMap<S> c(C, M, N);
    if (!transA && !transB) {
        if (accumulate) c.noalias() += a * b; else c.noalias() = a * b;
    } else if (transA && !transB) {
        if (accumulate) c.noalias() += a.transpose() * b; else c.noalias() = a.transpose() * b;
    } else if (!transA && transB) {
        if (accumulate) c.noalias() += a * b.transpose(); else c.noalias() = a * b.transpose();
    } else {
        if (accumulate) c.noalias() += a.transpose() * b.transpose(); else c.noalias() = a.transpose() * b.transpose();
    }
}

struct ConvGeom {
    int cin = 0, cout = 0;
    int kt = 1, kh = 3, kw = 3;
    int st = 1, sh = 1, sw = 1;
    int pt = 0, ph = 1, pw = 1;

    int out_dim(int in, int k, int s, int p) const { return (in + 2 * p - k) / s + 1; }
    int out_t(int t) const { return out_dim(t, kt, st, pt); }
    int out_h(int h) const { return out_dim(h, kh, sh, ph); }
    int out_w(int w) const { return out_dim(w, kw, sw, pw); }
    int64_t kernel_cols() const { return static_cast<int64_t>(cin) * kt * kh * kw; }
};

// Lowers (T,C,H,W) input windows to a (T'*H'*W', Cin*kt*kh*kw) matrix.
// Column order is (c, kz, ky, kx), c-major; row order is the (t,h,w) raster.
template <typename S>
void im2col(const Tensor<S>& x, const ConvGeom& g, Tensor<S>& cols) {
    const int T = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int To = g.out_t(T), Ho = g.out_h(H), Wo = g.out_w(W);
    const int64_t K = g.kernel_cols();
    cols.shape = {To * Ho * Wo, static_cast<int>(K)};
    cols.v.assign(static_cast<size_t>(To) * Ho * Wo * K, S(0));
    S* out = cols.data();
    const S* in = x.data();
    for (int to = 0; to < To; ++to) {
        for (int ho = 0; ho < Ho; ++ho) {
            for (int wo = 0; wo < Wo; ++wo) {
                S* row = out + ((static_cast<int64_t>(to) * Ho + ho) * Wo + wo) * K;
                for (int c = 0; c < C; ++c) {
                    for (int kz = 0; kz < g.kt; ++kz) {
                        int tz = to * g.st - g.pt + kz;
                        if (tz < 0 || tz >= T) { row += g.kh * g.kw; continue; }
                        for (int ky = 0; ky < g.kh; ++ky) {
                            int yy = ho * g.sh - g.ph + ky;
                            if (yy < 0 || yy >= H) { row += g.kw; continue; }
                            const S* src = in + ((static_cast<int64_t>(tz) * C + c) * H + yy) * W;
                            for (int kx = 0; kx < g.kw; ++kx) {
                                int xx = wo * g.sw - g.pw + kx;
                                *row++ = (xx >= 0 && xx < W) ? src[xx] : S(0);
                            }
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add of column gradients back to the input layout.
template <typename S>
void col2im(const Tensor<S>& cols, const ConvGeom& g, Tensor<S>& gx) {
    const int T = gx.dim(0), C = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
    const int To = g.out_t(T), Ho = g.out_h(H), Wo = g.out_w(W);
    const int64_t K = g.kernel_cols();
    const S* in = cols.data();
    S* out = gx.data();
    for (int to = 0; to < To; ++to) {
        for (int ho = 0; ho < Ho; ++ho) {
            for (int wo = 0; wo < Wo; ++wo) {
                const S* row = in + ((static_cast<int64_t>(to) * Ho + ho) * Wo + wo) * K;
                for (int c = 0; c < C; ++c) {
                    for (int kz = 0; kz < g.kt; ++kz) {
                        int tz = to * g.st - g.pt + kz;
                        if (tz < 0 || tz >= T) { row += g.kh * g.kw; continue; }
                        for (int ky = 0; ky < g.kh; ++ky) {
                            int yy = ho * g.sh - g.ph + ky;
                            if (yy < 0 || yy >= H) { row += g.kw; continue; }
                            S* dst = out + ((static_cast<int64_t>(tz) * C + c) * H + yy) * W;
                            for (int kx = 0; kx < g.kw; ++kx) {
                                int xx = wo * g.sw - g.pw + kx;
                                if (xx >= 0 && xx < W) dst[xx] += *row;
                                ++row;
                            }
                        }
                    }
                }
            }
        }
    }
}

// (T,C,H,W) -> (T*H*W, C) with token index t*H*W + h*W + w.
template <typename S>
Tensor<S> grid_to_tokens(const Tensor<S>& x) {
    const int T = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<S> out({T * H * W, C});
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x2 = 0; x2 < W; ++x2)
                    out.at2((t * H + y) * W + x2, c) = x.at4(t, c, y, x2);
    return out;
}

template <typename S>
Tensor<S> tokens_to_grid(const Tensor<S>& tok, int T, int C, int H, int W) {
    Tensor<S> out({T, C, H, W});
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x2 = 0; x2 < W; ++x2)
                    out.at4(t, c, y, x2) = tok.at2((t * H + y) * W + x2, c);
    return out;
}

}  // namespace maskflow
