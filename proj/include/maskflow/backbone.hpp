#pragma once

#include <vector>

#include "maskflow/conditioning.hpp"
#include "maskflow/layers.hpp"

namespace maskflow {

struct BackboneConfig {
    int d_model = 96;
    int n_layers = 4;
    int n_heads = 4;
    double mlp_ratio = 4.0;
    int grid_t = 8, grid_h = 8, grid_w = 8;

    int mlp_dim() const { return static_cast<int>(d_model * mlp_ratio); }
    int tokens() const { return grid_t * grid_h * grid_w; }

    void validate() const {
        check(d_model % n_heads == 0, "backbone: d_model must be divisible by n_heads");
        check(n_layers >= 1 && n_heads >= 1, "backbone: layers and heads must be positive");
    }
};

// Collects softmax row sums when attached; used by debug-mode checks.
struct AttentionProbe {
    double max_row_sum_err = 0.0;
};

// Sinusoidal features of the diffusion time, fixed (no parameters).
template <typename S>
Tensor<S> time_features(S t, int d) {
    const int half = d / 2;
    Tensor<S> out({d});
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        double arg = 1000.0 * static_cast<double>(t) * freq;
        out[i] = static_cast<S>(std::cos(arg));
        out[half + i] = static_cast<S>(std::sin(arg));
    }
    return out;
}

template <typename S>
struct BlockCache {
    LayerNormCache<S> ln1, ln2;
    LinearCache<S> mod;
    Tensor<S> mod_out;         // (1, 6D)
    Tensor<S> h1_mod, h2_mod;  // modulated LN outputs (attention/mlp inputs)
    Tensor<S> q, k, v;         // (N, D) each
    std::vector<Tensor<S>> probs;  // per head (N, N)
    Tensor<S> attn_concat;     // (N, D) pre out-proj
    LinearCache<S> qkv, proj, mlp1, mlp2;
    SiluCache<S> mlp_silu;
    Tensor<S> attn_out, mlp_out;  // post-projection branch outputs (pre-gate)
};

template <typename S>
struct TransformerBlock {
    Linear<S> mod;   // D -> 6D, zero-init (adaLN-Zero)
    Linear<S> qkv;   // D -> 3D
    Linear<S> proj;  // D -> D
    Linear<S> mlp1, mlp2;
    int d = 96, heads = 4, dh = 24, mlp_d = 384;

    void init(ParamStore<S>& P, const std::string& name, const BackboneConfig& cfg, Rng& rng) {
        d = cfg.d_model;
        heads = cfg.n_heads;
        dh = d / heads;
        mlp_d = cfg.mlp_dim();
        mod.init(P, name + ".mod", d, 6 * d, rng, 0.0, true);
        qkv.init(P, name + ".qkv", d, 3 * d, rng, 0.02);
        proj.init(P, name + ".proj", d, d, rng, 0.02);
        mlp1.init(P, name + ".mlp1", d, mlp_d, rng, 0.02);
        mlp2.init(P, name + ".mlp2", mlp_d, d, rng, 0.02);
    }

    static void modulate(const Tensor<S>& h, const S* shift, const S* scale, Tensor<S>& out) {
        const int N = h.dim(0), D = h.dim(1);
        out = Tensor<S>({N, D});
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < D; ++j) out.at2(i, j) = h.at2(i, j) * (S(1) + scale[j]) + shift[j];
    }

    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& x, const Tensor<S>& tact,
                      BlockCache<S>& c, AttentionProbe* probe = nullptr) const {
        const int N = x.dim(0);
        c.mod_out = mod.forward(P, tact, c.mod);  // tact: (1, D)
        const S* m = c.mod_out.data();
        const S* sh1 = m;
        const S* sc1 = m + d;
        const S* g1 = m + 2 * d;
        const S* sh2 = m + 3 * d;
        const S* sc2 = m + 4 * d;
        const S* g2 = m + 5 * d;

        Tensor<S> h1 = layernorm_forward(x, c.ln1);
        modulate(h1, sh1, sc1, c.h1_mod);

        Tensor<S> qkv_out = qkv.forward(P, c.h1_mod, c.qkv);  // (N, 3D)
        c.q = Tensor<S>({N, d});
        c.k = Tensor<S>({N, d});
        c.v = Tensor<S>({N, d});
        for (int i = 0; i < N; ++i) {
            const S* row = qkv_out.data() + static_cast<int64_t>(i) * 3 * d;
            for (int j = 0; j < d; ++j) {
                c.q.at2(i, j) = row[j];
                c.k.at2(i, j) = row[d + j];
                c.v.at2(i, j) = row[2 * d + j];
            }
        }

        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
        c.probs.assign(static_cast<size_t>(heads), Tensor<S>());
        c.attn_concat = Tensor<S>({N, d});
        for (int hd = 0; hd < heads; ++hd) {
            Tensor<S> scores({N, N});
            // strided head views: q[:, hd*dh : (hd+1)*dh]
            ECMap<S> qm(c.q.data(), N, d), km(c.k.data(), N, d), vm(c.v.data(), N, d);
            EMap<S> sm(scores.data(), N, N);
            auto qh = qm.block(0, hd * dh, N, dh);
            auto kh = km.block(0, hd * dh, N, dh);
            sm.noalias() = qh * kh.transpose();
            sm *= scale;
            for (int i = 0; i < N; ++i) {
                EArr<S> row(scores.data() + static_cast<int64_t>(i) * N, N);
                S mx = row.maxCoeff();
                row = (row - mx).exp();
                row /= row.sum();
                if (probe) {
                    double rs = 0;
                    for (int j = 0; j < N; ++j) rs += static_cast<double>(row[j]);
                    probe->max_row_sum_err = std::max(probe->max_row_sum_err, std::abs(rs - 1.0));
                }
            }
            EMap<S> pm(scores.data(), N, N);
            EMap<S> am(c.attn_concat.data(), N, d);
            am.block(0, hd * dh, N, dh).noalias() = pm * vm.block(0, hd * dh, N, dh);
            c.probs[static_cast<size_t>(hd)] = std::move(scores);
        }

        c.attn_out = proj.forward(P, c.attn_concat, c.proj);
        Tensor<S> x_mid = x;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j) x_mid.at2(i, j) += g1[j] * c.attn_out.at2(i, j);

        Tensor<S> h2 = layernorm_forward(x_mid, c.ln2);
        modulate(h2, sh2, sc2, c.h2_mod);
        Tensor<S> m1 = mlp1.forward(P, c.h2_mod, c.mlp1);
        Tensor<S> a1 = silu_forward(m1, c.mlp_silu);
        c.mlp_out = mlp2.forward(P, a1, c.mlp2);

        Tensor<S> out = x_mid;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j) out.at2(i, j) += g2[j] * c.mlp_out.at2(i, j);
        return out;
    }

    // Returns gradient w.r.t. x; accumulates the modulation-vector gradient
    // into g_tact (shared time pathway).
    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& gy, BlockCache<S>& c, GradStore<S>& G,
                       Tensor<S>& g_tact) const {
        const int N = gy.dim(0);
        const S* m = c.mod_out.data();
        const S* sc1 = m + d;
        const S* g1 = m + 2 * d;
        const S* sc2 = m + 4 * d;
        const S* g2 = m + 5 * d;
        Tensor<S> gmod({1, 6 * d});
        S* gm = gmod.data();

        // out = x_mid + g2 * mlp_out
        Tensor<S> g_mlp_out({N, d});
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j) {
                S g = gy.at2(i, j);
                g_mlp_out.at2(i, j) = g * g2[j];
                gm[5 * d + j] += g * c.mlp_out.at2(i, j);
            }
        Tensor<S> g_a1 = mlp2.backward(P, g_mlp_out, c.mlp2, G);
        Tensor<S> g_m1 = silu_backward(g_a1, c.mlp_silu);
        Tensor<S> g_h2mod = mlp1.backward(P, g_m1, c.mlp1, G);

        // h2_mod = h2 * (1 + sc2) + sh2; the non-affine LN output is its xhat
        Tensor<S> g_h2({N, d});
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j) {
                S g = g_h2mod.at2(i, j);
                g_h2.at2(i, j) = g * (S(1) + sc2[j]);
                gm[3 * d + j] += g;
                gm[4 * d + j] += g * c.ln2.xhat.at2(i, j);
            }
        Tensor<S> g_xmid = layernorm_backward(g_h2, c.ln2);
        g_xmid += gy;  // residual

        // x_mid = x + g1 * attn_out
        Tensor<S> g_attn_out({N, d});
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j) {
                S g = g_xmid.at2(i, j);
                g_attn_out.at2(i, j) = g * g1[j];
                gm[2 * d + j] += g * c.attn_out.at2(i, j);
            }
        Tensor<S> g_concat = proj.backward(P, g_attn_out, c.proj, G);

        Tensor<S> gq({N, d}), gk({N, d}), gv({N, d});
        gq.zero(); gk.zero(); gv.zero();
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
        for (int hd = 0; hd < heads; ++hd) {
            const Tensor<S>& Pm = c.probs[static_cast<size_t>(hd)];
            ECMap<S> pm(Pm.data(), N, N);
            ECMap<S> gcm(g_concat.data(), N, d), vm(c.v.data(), N, d);
            EMap<S> gvm(gv.data(), N, d);
            auto gch = gcm.block(0, hd * dh, N, dh);
            gvm.block(0, hd * dh, N, dh).noalias() += pm.transpose() * gch;
            Tensor<S> gP({N, N});
            EMap<S> gpm(gP.data(), N, N);
            gpm.noalias() = gch * vm.block(0, hd * dh, N, dh).transpose();
            // softmax backward, row-wise
            for (int i = 0; i < N; ++i) {
                const S* pr = Pm.data() + static_cast<int64_t>(i) * N;
                S* gr = gP.data() + static_cast<int64_t>(i) * N;
                S dot = 0;
                for (int j = 0; j < N; ++j) dot += gr[j] * pr[j];
                for (int j = 0; j < N; ++j) gr[j] = pr[j] * (gr[j] - dot);
            }
            ECMap<S> qm(c.q.data(), N, d), km(c.k.data(), N, d);
            EMap<S> gqm(gq.data(), N, d), gkm(gk.data(), N, d);
            gqm.block(0, hd * dh, N, dh).noalias() += gpm * km.block(0, hd * dh, N, dh) * scale;
            gkm.block(0, hd * dh, N, dh).noalias() += gpm.transpose() * qm.block(0, hd * dh, N, dh) * scale;
        }
        Tensor<S> g_qkv({N, 3 * d});
        for (int i = 0; i < N; ++i) {
            S* row = g_qkv.data() + static_cast<int64_t>(i) * 3 * d;
            for (int j = 0; j < d; ++j) {
                row[j] = gq.at2(i, j);
                row[d + j] = gk.at2(i, j);
                row[2 * d + j] = gv.at2(i, j);
            }
        }
        Tensor<S> g_h1mod = qkv.backward(P, g_qkv, c.qkv, G);

        Tensor<S> g_h1({N, d});
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j) {
                S g = g_h1mod.at2(i, j);
                g_h1.at2(i, j) = g * (S(1) + sc1[j]);
                gm[j] += g;
                gm[d + j] += g * c.ln1.xhat.at2(i, j);
            }
        Tensor<S> gx = layernorm_backward(g_h1, c.ln1);
        gx += g_xmid;

        Tensor<S> g_t = mod.backward(P, gmod, c.mod, G);  // (1, D)
        g_tact += g_t;
        return gx;
    }
};

template <typename S>
struct BackboneCache {
    Tensor<S> x_entry;             // tokens + positions
    LinearCache<S> tm1, tm2;       // time MLP
    SiluCache<S> tm_silu, tact_silu;
    Tensor<S> tact;                // silu(time vector), (1, D)
    std::vector<BlockCache<S>> blocks;
    LayerNormCache<S> ln_f;
    LinearCache<S> mod_f, out_proj;
    Tensor<S> mod_f_out;
    Tensor<S> h_f;                 // final LN output (pre-modulation)
};

template <typename S>
struct Backbone {
    BackboneConfig cfg;
    int pos_t = -1, pos_h = -1, pos_w = -1;
    Linear<S> time_mlp1, time_mlp2;
    std::vector<TransformerBlock<S>> blocks;
    Linear<S> mod_final;  // D -> 2D, zero-init
    Linear<S> out_proj;   // D -> D, zero-init

    void init(ParamStore<S>& P, const BackboneConfig& cfg_, Rng& rng) {
        cfg = cfg_;
        cfg.validate();
        const int d = cfg.d_model;
        Tensor<S> pt({cfg.grid_t, d}), ph({cfg.grid_h, d}), pw({cfg.grid_w, d});
        init_normal(pt, rng, 0.02);
        init_normal(ph, rng, 0.02);
        init_normal(pw, rng, 0.02);
        pos_t = P.add("backbone.pos_t", std::move(pt));
        pos_h = P.add("backbone.pos_h", std::move(ph));
        pos_w = P.add("backbone.pos_w", std::move(pw));
        time_mlp1.init(P, "backbone.time_mlp1", d, d, rng, 0.02);
        time_mlp2.init(P, "backbone.time_mlp2", d, d, rng, 0.02);
        blocks.resize(static_cast<size_t>(cfg.n_layers));
        for (int i = 0; i < cfg.n_layers; ++i)
            blocks[static_cast<size_t>(i)].init(P, "backbone.block" + std::to_string(i), cfg, rng);
        mod_final.init(P, "backbone.mod_final", d, 2 * d, rng, 0.0, true);
        out_proj.init(P, "backbone.out_proj", d, d, rng, 0.0, true);
    }

    // tokens: (N, D) in (t, h, w) raster order; t in [0, 1].
    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& tokens, S t, BackboneCache<S>& c,
                      AttentionProbe* probe = nullptr) const {
        check(tokens.dim(0) == cfg.tokens(), "backbone: token count does not match configured grid");
        check(tokens.dim(1) == cfg.d_model, "backbone: token width does not match d_model");
        if (!all_finite(tokens))
            throw ValidationError("backbone: non-finite values in input tokens (NaN/Inf)");

        const int d = cfg.d_model;
        c.x_entry = tokens;
        const Tensor<S>&pt = P[pos_t], &ph = P[pos_h], &pw = P[pos_w];
        for (int tt = 0; tt < cfg.grid_t; ++tt)
            for (int hh = 0; hh < cfg.grid_h; ++hh)
                for (int ww = 0; ww < cfg.grid_w; ++ww) {
                    S* row = c.x_entry.data() +
                             (static_cast<int64_t>(tt) * cfg.grid_h * cfg.grid_w + hh * cfg.grid_w + ww) * d;
                    for (int j = 0; j < d; ++j)
                        row[j] += pt.at2(tt, j) + ph.at2(hh, j) + pw.at2(ww, j);
                }

        Tensor<S> feat = time_features(t, d);
        feat.shape = {1, d};
        Tensor<S> tm = time_mlp1.forward(P, feat, c.tm1);
        Tensor<S> ta = silu_forward(tm, c.tm_silu);
        Tensor<S> tv = time_mlp2.forward(P, ta, c.tm2);
        c.tact = silu_forward(tv, c.tact_silu);

        c.blocks.assign(blocks.size(), {});
        Tensor<S> x = c.x_entry;
        for (size_t i = 0; i < blocks.size(); ++i)
            x = blocks[i].forward(P, x, c.tact, c.blocks[i], probe);

        c.h_f = layernorm_forward(x, c.ln_f);
        c.mod_f_out = mod_final.forward(P, c.tact, c.mod_f);
        const S* mf = c.mod_f_out.data();
        Tensor<S> hmod;
        TransformerBlock<S>::modulate(c.h_f, mf, mf + d, hmod);
        return out_proj.forward(P, hmod, c.out_proj);
    }

    // Returns gradient w.r.t. the input tokens.
    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& gy, BackboneCache<S>& c, GradStore<S>& G) const {
        const int d = cfg.d_model;
        const int N = gy.dim(0);
        Tensor<S> g_tact({1, d});

        Tensor<S> g_hmod = out_proj.backward(P, gy, c.out_proj, G);
        const S* mf = c.mod_f_out.data();
        Tensor<S> g_modf({1, 2 * d});
        Tensor<S> g_hf({N, d});
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j) {
                S g = g_hmod.at2(i, j);
                g_hf.at2(i, j) = g * (S(1) + mf[d + j]);
                g_modf[j] += g;
                g_modf[d + j] += g * c.h_f.at2(i, j);
            }
        g_tact += mod_final.backward(P, g_modf, c.mod_f, G);
        Tensor<S> gx = layernorm_backward(g_hf, c.ln_f);

        for (int i = static_cast<int>(blocks.size()) - 1; i >= 0; --i)
            gx = blocks[static_cast<size_t>(i)].backward(P, gx, c.blocks[static_cast<size_t>(i)], G, g_tact);

        // time pathway
        Tensor<S> g_tv = silu_backward(g_tact, c.tact_silu);
        Tensor<S> g_ta = time_mlp2.backward(P, g_tv, c.tm2, G);
        Tensor<S> g_tm = silu_backward(g_ta, c.tm_silu);
        time_mlp1.backward(P, g_tm, c.tm1, G);  // sinusoidal features are fixed

        // positional embeddings
        Tensor<S>&gpt = G[pos_t], &gph = G[pos_h], &gpw = G[pos_w];
        for (int tt = 0; tt < cfg.grid_t; ++tt)
            for (int hh = 0; hh < cfg.grid_h; ++hh)
                for (int ww = 0; ww < cfg.grid_w; ++ww) {
                    const S* row = gx.data() +
                                   (static_cast<int64_t>(tt) * cfg.grid_h * cfg.grid_w + hh * cfg.grid_w + ww) * d;
                    for (int j = 0; j < d; ++j) {
                        gpt.at2(tt, j) += row[j];
                        gph.at2(hh, j) += row[j];
                        gpw.at2(ww, j) += row[j];
                    }
                }
        return gx;
    }
};

// Velocity head: linear D -> C*p*p plus the exact raster inverse of patchify.
template <typename S>
struct UnpatchifyHead {
    Linear<S> linear;
    int patch = 4, channels = 3;

    void init(ParamStore<S>& P, int d_model, Rng& rng) {
        linear.init(P, "unpatchify", d_model, channels * patch * patch, rng, 0.02);
    }

    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& tokens, int T, int H, int W,
                      LinearCache<S>& c) const {
        Tensor<S> flat = linear.forward(P, tokens, c);
        return unpatchify_raw(flat, T, channels, H, W, patch);
    }

    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& g_video, const LinearCache<S>& c,
                       GradStore<S>& G) const {
        Tensor<S> g_flat = patchify_raw(g_video, patch);
        return linear.backward(P, g_flat, c, G);
    }
};

}  // namespace maskflow
