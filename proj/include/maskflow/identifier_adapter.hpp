#pragma once

#include <vector>

#include "maskflow/identifier_assigner.hpp"
#include "maskflow/layers.hpp"

namespace maskflow {

// Stacked 3D convolutions over identity labels. The first layer's kernel is
// the Identifier Weight Bank: one input-channel slice per identifier plus
// slice 0 for the background. Two stride-(1,2,2) stages bring the output to
// the pose-encoder / token grid (H/4, W/4).
template <typename S>
struct AdapterCache {
    LabelMap labels;
    Tensor<S> wt;            // bank kernel transposed to (cin, taps, cout) for gathering
    Tensor<S> pre1;          // conv1 output before SiLU
    SiluCache<S> silu1;
    Conv3dCache<S> trunk;
    Tensor<S> onehot;        // kept only by the dense route
    Conv3dCache<S> dense1;   // idem
};

template <typename S>
struct AdapterStack {
    int n = 7;
    int hidden = 32;
    int d_model = 96;
    Conv3d<S> bank;   // (n+1) -> hidden, kernel 3x3x3, stride (1,2,2)
    Conv3d<S> trunk;  // hidden -> d_model, kernel 3x3x3, stride (1,2,2)

    void init(ParamStore<S>& P, const std::string& name, int n_, int hidden_, int d_model_, Rng& rng,
              double w_std = 0.02) {
        n = n_;
        hidden = hidden_;
        d_model = d_model_;
        ConvGeom g1;
        g1.cin = n + 1;
        g1.cout = hidden;
        g1.kt = 3; g1.kh = 3; g1.kw = 3;
        g1.st = 1; g1.sh = 2; g1.sw = 2;
        g1.pt = 1; g1.ph = 1; g1.pw = 1;
        bank.init(P, name + ".bank", g1, rng, w_std);
        ConvGeom g2 = g1;
        g2.cin = hidden;
        g2.cout = d_model;
        trunk.init(P, name + ".trunk", g2, rng, w_std);
    }

    static constexpr int kTaps = 27;

    void transpose_bank(const ParamStore<S>& P, Tensor<S>& wt) const {
        const Tensor<S>& w = P[bank.w];  // (hidden, n+1, 3,3,3)
        wt = Tensor<S>({n + 1, kTaps, hidden});
        for (int o = 0; o < hidden; ++o)
            for (int c = 0; c <= n; ++c)
                for (int tap = 0; tap < kTaps; ++tap)
                    wt[(static_cast<int64_t>(c) * kTaps + tap) * hidden + o] =
                        w[(static_cast<int64_t>(o) * (n + 1) + c) * kTaps + tap];
    }

    // Label-gather evaluation of the first layer. Each input tap excites at
    // most one bank slice, so the tap-ordered accumulation is bitwise
    // invariant under joint (label, slice) permutations.
    Tensor<S> bank_forward_labels(const ParamStore<S>& P, const LabelMap& lm, AdapterCache<S>& c) const {
        const int T = lm.t, H = lm.h, W = lm.w;
        const int Ho = bank.geom.out_h(H), Wo = bank.geom.out_w(W), To = bank.geom.out_t(T);
        transpose_bank(P, c.wt);
        c.labels = lm;
        Tensor<S> y({To, hidden, Ho, Wo});
        const S* bias = P[bank.b].data();
        std::vector<S> acc(static_cast<size_t>(hidden));
        for (int to = 0; to < To; ++to)
            for (int yo = 0; yo < Ho; ++yo)
                for (int xo = 0; xo < Wo; ++xo) {
                    for (int o = 0; o < hidden; ++o) acc[static_cast<size_t>(o)] = bias[o];
                    int tap = 0;
                    for (int kz = 0; kz < 3; ++kz) {
                        int tz = to - 1 + kz;
                        for (int ky = 0; ky < 3; ++ky) {
                            int yy = yo * 2 - 1 + ky;
                            for (int kx = 0; kx < 3; ++kx, ++tap) {
                                int xx = xo * 2 - 1 + kx;
                                if (tz < 0 || tz >= T || yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                                int l = lm.at(tz, yy, xx);
                                const S* col = c.wt.data() + (static_cast<int64_t>(l) * kTaps + tap) * hidden;
                                for (int o = 0; o < hidden; ++o) acc[static_cast<size_t>(o)] += col[o];
                            }
                        }
                    }
                    for (int o = 0; o < hidden; ++o) y.at4(to, o, yo, xo) = acc[static_cast<size_t>(o)];
                }
        return y;
    }

    void bank_backward_labels(const Tensor<S>& gy, const AdapterCache<S>& c, GradStore<S>& G) const {
        const LabelMap& lm = c.labels;
        const int T = lm.t, H = lm.h, W = lm.w;
        const int To = gy.dim(0), Ho = gy.dim(2), Wo = gy.dim(3);
        Tensor<S> gwt({n + 1, kTaps, hidden});
        S* gb = G[bank.b].data();
        std::vector<S> grow(static_cast<size_t>(hidden));
        for (int to = 0; to < To; ++to)
            for (int yo = 0; yo < Ho; ++yo)
                for (int xo = 0; xo < Wo; ++xo) {
                    for (int o = 0; o < hidden; ++o) {
                        grow[static_cast<size_t>(o)] = gy.at4(to, o, yo, xo);
                        gb[o] += grow[static_cast<size_t>(o)];
                    }
                    int tap = 0;
                    for (int kz = 0; kz < 3; ++kz) {
                        int tz = to - 1 + kz;
                        for (int ky = 0; ky < 3; ++ky) {
                            int yy = yo * 2 - 1 + ky;
                            for (int kx = 0; kx < 3; ++kx, ++tap) {
                                int xx = xo * 2 - 1 + kx;
                                if (tz < 0 || tz >= T || yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                                int l = lm.at(tz, yy, xx);
                                S* col = gwt.data() + (static_cast<int64_t>(l) * kTaps + tap) * hidden;
                                for (int o = 0; o < hidden; ++o) col[o] += grow[static_cast<size_t>(o)];
                            }
                        }
                    }
                }
        Tensor<S>& gw = G[bank.w];
        for (int o = 0; o < hidden; ++o)
            for (int cc = 0; cc <= n; ++cc)
                for (int tap = 0; tap < kTaps; ++tap)
                    gw[(static_cast<int64_t>(o) * (n + 1) + cc) * kTaps + tap] +=
                        gwt[(static_cast<int64_t>(cc) * kTaps + tap) * hidden + o];
    }

    // Primary forward: strict one-hot input, gather evaluation.
    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& onehot, AdapterCache<S>& c) const {
        check(onehot.dim(1) == n + 1, "adapter_forward: one-hot channel count " + std::to_string(onehot.dim(1)) +
                                          " does not match bank capacity n+1=" + std::to_string(n + 1));
        LabelMap lm = strict_labels(onehot);
        Tensor<S> h1 = bank_forward_labels(P, lm, c);
        c.pre1 = h1;
        Tensor<S> a1 = silu_forward(h1, c.silu1);
        return trunk.forward(P, a1, c.trunk);
    }

    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& gy, AdapterCache<S>& c, GradStore<S>& G) const {
        Tensor<S> ga1 = trunk.backward(P, gy, c.trunk, G);
        Tensor<S> gh1 = silu_backward(ga1, c.silu1);
        bank_backward_labels(gh1, c, G);
        return gh1;  // gradient w.r.t. conv1 pre-activation (input is data, not a parameter)
    }

    // Dense full-width evaluation: the one-hot tensor goes through the
    // ordinary im2col convolution over all n+1 channels.
    Tensor<S> forward_dense(const ParamStore<S>& P, const Tensor<S>& onehot, AdapterCache<S>& c) const {
        check(onehot.dim(1) == n + 1, "adapter_forward_dense: channel mismatch");
        c.onehot = onehot;
        Tensor<S> h1 = bank.forward(P, onehot, c.dense1);
        c.pre1 = h1;
        Tensor<S> a1 = silu_forward(h1, c.silu1);
        return trunk.forward(P, a1, c.trunk);
    }

    void backward_dense(const ParamStore<S>& P, const Tensor<S>& gy, AdapterCache<S>& c, GradStore<S>& G) const {
        Tensor<S> ga1 = trunk.backward(P, gy, c.trunk, G);
        Tensor<S> gh1 = silu_backward(ga1, c.silu1);
        bank.backward(P, gh1, c.dense1, G);
    }

    // Compact-gather evaluation: convolve only the active channels with the
    // gathered bank slices (equivalence oracle for the full path).
    Tensor<S> forward_compact(const ParamStore<S>& P, const Tensor<S>& onehot,
                              const std::vector<int>& active_labels) const {
        std::vector<int> chans = {0};
        for (int l : active_labels) chans.push_back(l);
        const int T = onehot.dim(0), H = onehot.dim(2), W = onehot.dim(3);
        Tensor<S> small({T, static_cast<int>(chans.size()), H, W});
        for (size_t ci = 0; ci < chans.size(); ++ci)
            for (int f = 0; f < T; ++f)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        small.at4(f, static_cast<int>(ci), y, x) = onehot.at4(f, chans[ci], y, x);

        ParamStore<S> Q;
        Conv3d<S> conv1;
        ConvGeom g1 = bank.geom;
        g1.cin = static_cast<int>(chans.size());
        conv1.geom = g1;
        Tensor<S> wsmall({hidden, g1.cin, 3, 3, 3});
        const Tensor<S>& w = P[bank.w];
        for (int o = 0; o < hidden; ++o)
            for (size_t ci = 0; ci < chans.size(); ++ci)
                for (int tap = 0; tap < kTaps; ++tap)
                    wsmall[(static_cast<int64_t>(o) * g1.cin + static_cast<int>(ci)) * kTaps + tap] =
                        w[(static_cast<int64_t>(o) * (n + 1) + chans[ci]) * kTaps + tap];
        conv1.w = Q.add("compact.weight", std::move(wsmall));
        Tensor<S> bcopy = P[bank.b];
        conv1.b = Q.add("compact.bias", std::move(bcopy));

        Conv3dCache<S> cc;
        Tensor<S> h1 = conv1.forward(Q, small, cc);
        SiluCache<S> sc;
        Tensor<S> a1 = silu_forward(h1, sc);
        Conv3dCache<S> tc;
        return trunk.forward(P, a1, tc);
    }

    static LabelMap strict_labels(const Tensor<S>& onehot) {
        const int T = onehot.dim(0), C = onehot.dim(1), H = onehot.dim(2), W = onehot.dim(3);
        LabelMap lm;
        lm.t = T;
        lm.h = H;
        lm.w = W;
        lm.data.assign(static_cast<size_t>(T) * H * W, 0);
        for (int f = 0; f < T; ++f)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    int hot = -1;
                    for (int c = 0; c < C; ++c) {
                        S v = onehot.at4(f, c, y, x);
                        if (v == S(1)) {
                            check(hot < 0, "adapter: one-hot input violates partition of unity");
                            hot = c;
                        } else {
                            check(v == S(0), "adapter: one-hot input must be binary");
                        }
                    }
                    check(hot >= 0, "adapter: one-hot input violates partition of unity");
                    lm.at(f, y, x) = hot;
                }
        return lm;
    }
};

// Returns a copy of the parameters with bank input slices 1..n reordered so
// that slice pi(c) of the result equals slice c of the input.
template <typename S>
ParamStore<S> permute_bank_params(const ParamStore<S>& P, const AdapterStack<S>& stack,
                                  const LabelPermutation& pi) {
    pi.validate();
    check(pi.n() == stack.n, "permute_bank: permutation size does not match bank capacity");
    ParamStore<S> out = P;
    const Tensor<S>& w = P[stack.bank.w];
    Tensor<S>& wo = out[stack.bank.w];
    const int taps = AdapterStack<S>::kTaps;
    for (int o = 0; o < stack.hidden; ++o)
        for (int c = 0; c <= stack.n; ++c) {
            int dst = (c == 0) ? 0 : pi(c);
            for (int tap = 0; tap < taps; ++tap)
                wo[(static_cast<int64_t>(o) * (stack.n + 1) + dst) * taps + tap] =
                    w[(static_cast<int64_t>(o) * (stack.n + 1) + c) * taps + tap];
        }
    return out;
}

// Per-slice L2 norms of the bank-weight gradient under the given upstream
// gradient; slices whose one-hot channel is identically zero come out as
// exactly 0.
template <typename S>
std::vector<double> active_channel_gradients(const Tensor<S>& onehot, const AdapterStack<S>& stack,
                                             const ParamStore<S>& P, const Tensor<S>& upstream) {
    AdapterCache<S> cache;
    Tensor<S> y = stack.forward(P, onehot, cache);
    check(y.same_shape(upstream), "active_channel_gradients: upstream gradient shape mismatch");
    GradStore<S> G(P);
    AdapterCache<S> c2 = cache;
    stack.backward(P, upstream, c2, G);
    const Tensor<S>& gw = G[stack.bank.w];
    std::vector<double> norms(static_cast<size_t>(stack.n) + 1, 0.0);
    const int taps = AdapterStack<S>::kTaps;
    for (int o = 0; o < stack.hidden; ++o)
        for (int c = 0; c <= stack.n; ++c)
            for (int tap = 0; tap < taps; ++tap) {
                double v = static_cast<double>(gw[(static_cast<int64_t>(o) * (stack.n + 1) + c) * taps + tap]);
                norms[static_cast<size_t>(c)] += v * v;
            }
    for (auto& v : norms) v = std::sqrt(v);
    return norms;
}

}  // namespace maskflow
