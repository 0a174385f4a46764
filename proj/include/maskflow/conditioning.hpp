#pragma once

#include "maskflow/identifier_adapter.hpp"
#include "maskflow/layers.hpp"

namespace maskflow {

enum class ConditioningMode { mask_driven, addition_driven, no_identifier };

inline const char* to_string(ConditioningMode m) {
    switch (m) {
        case ConditioningMode::mask_driven: return "mask_driven";
        case ConditioningMode::addition_driven: return "addition_driven";
        default: return "no_identifier";
    }
}
inline ConditioningMode mode_from_string(const std::string& s) {
    if (s == "mask_driven") return ConditioningMode::mask_driven;
    if (s == "addition_driven") return ConditioningMode::addition_driven;
    if (s == "no_identifier") return ConditioningMode::no_identifier;
    throw ValidationError("unknown conditioning mode: " + s);
}

template <typename S>
struct TokenGrid {
    Tensor<S> tokens;  // (T'*H'*W', D), raster index t*H'*W' + h*W' + w
    int tp = 0, hp = 0, wp = 0;

    int count() const { return tp * hp * wp; }
};

// ----------------------------------------------------- patchify (raw part) ---

// (T, C, H, W) -> (T*(H/p)*(W/p), C*p*p); per-token layout is channel-major
// over the p x p patch. Pure rearrangement, exactly invertible.
template <typename S>
Tensor<S> patchify_raw(const Tensor<S>& x, int p) {
    const int T = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    check(H % p == 0 && W % p == 0, "patchify_raw: spatial dims not divisible by patch size");
    const int Hp = H / p, Wp = W / p;
    Tensor<S> out({T * Hp * Wp, C * p * p});
    for (int t = 0; t < T; ++t)
        for (int gh = 0; gh < Hp; ++gh)
            for (int gw = 0; gw < Wp; ++gw) {
                S* row = out.data() + (static_cast<int64_t>(t) * Hp * Wp + gh * Wp + gw) * (C * p * p);
                for (int c = 0; c < C; ++c)
                    for (int py = 0; py < p; ++py)
                        for (int px = 0; px < p; ++px) *row++ = x.at4(t, c, gh * p + py, gw * p + px);
            }
    return out;
}

// Exact inverse of patchify_raw for token vectors of size C*p*p.
template <typename S>
Tensor<S> unpatchify_raw(const Tensor<S>& tokens, int T, int C, int H, int W, int p) {
    check(H % p == 0 && W % p == 0, "unpatchify_raw: spatial dims not divisible by patch size");
    const int Hp = H / p, Wp = W / p;
    check(tokens.dim(0) == T * Hp * Wp, "unpatchify_raw: token count inconsistent with grid");
    check(tokens.dim(1) == C * p * p, "unpatchify_raw: token width inconsistent with patch");
    Tensor<S> out({T, C, H, W});
    for (int t = 0; t < T; ++t)
        for (int gh = 0; gh < Hp; ++gh)
            for (int gw = 0; gw < Wp; ++gw) {
                const S* row = tokens.data() + (static_cast<int64_t>(t) * Hp * Wp + gh * Wp + gw) * (C * p * p);
                for (int c = 0; c < C; ++c)
                    for (int py = 0; py < p; ++py)
                        for (int px = 0; px < p; ++px) out.at4(t, c, gh * p + py, gw * p + px) = *row++;
            }
    return out;
}

// -------------------------------------------------------------- encoders ---

// Two stride-2 2D conv layers over the reference pose, emitting one feature
// vector per spatial grid cell.
template <typename S>
struct ImageEncoderCache {
    Conv3dCache<S> c1, c2;
    SiluCache<S> silu;
};

template <typename S>
struct ImageEncoder {
    Conv3d<S> c1, c2;
    int hidden = 32, d_model = 96;

    void init(ParamStore<S>& P, const std::string& name, int hidden_, int d_model_, Rng& rng, double w_std = 0.02) {
        hidden = hidden_;
        d_model = d_model_;
        ConvGeom g1;
        g1.cin = 3; g1.cout = hidden;
        g1.kt = 1; g1.kh = 3; g1.kw = 3;
        g1.st = 1; g1.sh = 2; g1.sw = 2;
        g1.pt = 0; g1.ph = 1; g1.pw = 1;
        c1.init(P, name + ".conv1", g1, rng, w_std);
        ConvGeom g2 = g1;
        g2.cin = hidden; g2.cout = d_model;
        c2.init(P, name + ".conv2", g2, rng, w_std);
    }

    // (1, 3, H, W) -> (1, D, H/4, W/4)
    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& x, ImageEncoderCache<S>& c) const {
        Tensor<S> h = c1.forward(P, x, c.c1);
        Tensor<S> a = silu_forward(h, c.silu);
        return c2.forward(P, a, c.c2);
    }

    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& gy, ImageEncoderCache<S>& c, GradStore<S>& G) const {
        Tensor<S> ga = c2.backward(P, gy, c.c2, G);
        Tensor<S> gh = silu_backward(ga, c.silu);
        return c1.backward(P, gh, c.c1, G);
    }
};

// 3D conv encoder over a (T, C, H, W) stream, mirroring the adapter trunk's
// stride schedule so the grids line up for fusion.
template <typename S>
struct StreamEncoderCache {
    Conv3dCache<S> c1, c2;
    SiluCache<S> silu;
};

template <typename S>
struct StreamEncoder3d {
    Conv3d<S> c1, c2;
    int cin = 3, hidden = 32, d_model = 96;

    void init(ParamStore<S>& P, const std::string& name, int cin_, int hidden_, int d_model_, Rng& rng,
              double w_std = 0.02) {
        cin = cin_;
        hidden = hidden_;
        d_model = d_model_;
        ConvGeom g1;
        g1.cin = cin; g1.cout = hidden;
        g1.kt = 3; g1.kh = 3; g1.kw = 3;
        g1.st = 1; g1.sh = 2; g1.sw = 2;
        g1.pt = 1; g1.ph = 1; g1.pw = 1;
        c1.init(P, name + ".conv1", g1, rng, w_std);
        ConvGeom g2 = g1;
        g2.cin = hidden; g2.cout = d_model;
        c2.init(P, name + ".conv2", g2, rng, w_std);
    }

    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& x, StreamEncoderCache<S>& c) const {
        Tensor<S> h = c1.forward(P, x, c.c1);
        Tensor<S> a = silu_forward(h, c.silu);
        return c2.forward(P, a, c.c2);
    }

    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& gy, StreamEncoderCache<S>& c, GradStore<S>& G) const {
        Tensor<S> ga = c2.backward(P, gy, c.c2, G);
        Tensor<S> gh = silu_backward(ga, c.silu);
        return c1.backward(P, gh, c.c1, G);
    }
};

// ------------------------------------------------------- reference stream ---

template <typename S>
struct ReferenceStreamCache {
    ImageEncoderCache<S> img;
    LinearCache<S> patch;
    Tensor<S> img_tokens;  // (H'*W', D)
    int T = 0, Hp = 0, Wp = 0;
};

template <typename S>
struct ReferenceStream {
    ImageEncoder<S> image_encoder;
    Linear<S> patchify;  // C_lat*2 * p*p -> D
    int patch = 4;
    int d_model = 96;

    void init(ParamStore<S>& P, int hidden, int d_model_, Rng& rng) {
        d_model = d_model_;
        image_encoder.init(P, "image_encoder", hidden, d_model, rng);
        patchify.init(P, "patchify", 6 * patch * patch, d_model, rng, 0.02);
    }

    // Reference pixels pass through in place of a VAE latent, are broadcast
    // along time, concatenated channel-wise with the noisy sample and
    // patchified; the encoded reference pose is added token-wise (broadcast
    // over time, one feature per spatial cell).
    TokenGrid<S> forward(const ParamStore<S>& P, const Tensor<S>& ref_image, const Tensor<S>& ref_pose,
                         const Tensor<S>& noisy, ReferenceStreamCache<S>& c) const {
        const int T = noisy.dim(0), H = noisy.dim(2), W = noisy.dim(3);
        check(ref_image.dim(0) == 1 && ref_image.dim(1) == 3, "encode_reference: reference image must be (1,3,H,W)");
        check(ref_image.dim(2) == H && ref_image.dim(3) == W, "encode_reference: reference/noise shape mismatch");
        check(ref_pose.same_shape(ref_image), "encode_reference: reference pose shape mismatch");
        c.T = T;
        c.Hp = H / patch;
        c.Wp = W / patch;

        Tensor<S> img_feat = image_encoder.forward(P, ref_pose, c.img);  // (1, D, H/4, W/4)
        c.img_tokens = grid_to_tokens(img_feat);                          // (H'*W', D)

        const int Hp = H / patch, Wp = W / patch;
        Tensor<S> raw({T * Hp * Wp, 6 * patch * patch});
        for (int t = 0; t < T; ++t)
            for (int gh = 0; gh < Hp; ++gh)
                for (int gw = 0; gw < Wp; ++gw) {
                    S* row = raw.data() + (static_cast<int64_t>(t) * Hp * Wp + gh * Wp + gw) * raw.dim(1);
                    for (int ch = 0; ch < 3; ++ch)
                        for (int py = 0; py < patch; ++py)
                            for (int px = 0; px < patch; ++px)
                                *row++ = ref_image.at4(0, ch, gh * patch + py, gw * patch + px);
                    for (int ch = 0; ch < 3; ++ch)
                        for (int py = 0; py < patch; ++py)
                            for (int px = 0; px < patch; ++px)
                                *row++ = noisy.at4(t, ch, gh * patch + py, gw * patch + px);
                }

        TokenGrid<S> out;
        out.tp = T;
        out.hp = Hp;
        out.wp = Wp;
        out.tokens = patchify.forward(P, raw, c.patch);
        const int cells = Hp * Wp;
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < cells; ++i)
                for (int d = 0; d < d_model; ++d)
                    out.tokens.at2(t * cells + i, d) += c.img_tokens.at2(i, d);
        return out;
    }

    // Returns the gradient w.r.t. the noisy sample (needed by samplers that
    // differentiate; conditioning images are data).
    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& g_tokens, ReferenceStreamCache<S>& c,
                       GradStore<S>& G) const {
        const int T = c.T, Hp = c.Hp, Wp = c.Wp, cells = Hp * Wp;
        Tensor<S> g_img_tokens({cells, d_model});
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < cells; ++i)
                for (int d = 0; d < d_model; ++d) g_img_tokens.at2(i, d) += g_tokens.at2(t * cells + i, d);
        Tensor<S> g_img_grid = tokens_to_grid(g_img_tokens, 1, d_model, Hp, Wp);
        image_encoder.backward(P, g_img_grid, c.img, G);

        Tensor<S> g_raw = patchify.backward(P, g_tokens, c.patch, G);
        const int p = patch;
        Tensor<S> g_noisy({T, 3, Hp * p, Wp * p});
        for (int t = 0; t < T; ++t)
            for (int gh = 0; gh < Hp; ++gh)
                for (int gw = 0; gw < Wp; ++gw) {
                    const S* row = g_raw.data() + (static_cast<int64_t>(t) * Hp * Wp + gh * Wp + gw) * g_raw.dim(1) +
                                   3 * p * p;
                    for (int ch = 0; ch < 3; ++ch)
                        for (int py = 0; py < p; ++py)
                            for (int px = 0; px < p; ++px) g_noisy.at4(t, ch, gh * p + py, gw * p + px) = *row++;
                }
        return g_noisy;
    }
};

// ---------------------------------------------------------- motion stream ---

template <typename S>
struct MotionStreamCache {
    StreamEncoderCache<S> pose;
    AdapterCache<S> adapter;
    // addition-driven: one encoder/branch cache per entity
    std::vector<StreamEncoderCache<S>> pose_per_entity;
    std::vector<StreamEncoderCache<S>> mask_per_entity;
    std::vector<Tensor<S>> masked_poses;
};

template <typename S>
struct MotionStream {
    ConditioningMode mode = ConditioningMode::mask_driven;
    StreamEncoder3d<S> pose_encoder;
    AdapterStack<S> adapter;      // mask_driven
    StreamEncoder3d<S> mask_branch;  // addition_driven
    int d_model = 96;

    void init(ParamStore<S>& P, ConditioningMode mode_, int n, int hidden, int d_model_, Rng& rng) {
        mode = mode_;
        d_model = d_model_;
        pose_encoder.init(P, "pose_encoder", 3, hidden, d_model, rng);
        if (mode == ConditioningMode::mask_driven) adapter.init(P, "identifier_adapter", n, hidden, d_model, rng);
        if (mode == ConditioningMode::addition_driven) mask_branch.init(P, "mask_branch", 1, hidden, d_model, rng);
    }

    // mask_driven / no_identifier: (T,3,H,W) pose + full one-hot labels.
    Tensor<S> forward(const ParamStore<S>& P, const Tensor<S>& pose_video, const Tensor<S>& onehot,
                      MotionStreamCache<S>& c) const {
        Tensor<S> feat = pose_encoder.forward(P, pose_video, c.pose);
        if (mode == ConditioningMode::mask_driven) {
            Tensor<S> idf = adapter.forward(P, onehot, c.adapter);
            check(idf.same_shape(feat), "encode_motion: pose and identity feature grids disagree");
            feat += idf;
        }
        return feat;
    }

    Tensor<S> backward(const ParamStore<S>& P, const Tensor<S>& gy, MotionStreamCache<S>& c, GradStore<S>& G) const {
        if (mode == ConditioningMode::mask_driven) adapter.backward(P, gy, c.adapter, G);
        return pose_encoder.backward(P, gy, c.pose, G);
    }

    // addition_driven: per-entity poses isolated by tracking masks, a shared
    // mask-conditioned branch, features summed. Capacity-free in k.
    Tensor<S> forward_addition(const ParamStore<S>& P, const Tensor<S>& pose_video,
                               const std::vector<TensorF>& masks, MotionStreamCache<S>& c) const {
        check(mode == ConditioningMode::addition_driven, "forward_addition requires addition_driven mode");
        check(!masks.empty(), "encode_motion_addition_baseline: empty mask list");
        const int k = static_cast<int>(masks.size());
        c.pose_per_entity.assign(static_cast<size_t>(k), {});
        c.mask_per_entity.assign(static_cast<size_t>(k), {});
        c.masked_poses.assign(static_cast<size_t>(k), {});
        Tensor<S> total;
        for (int i = 0; i < k; ++i) {
            const TensorF& m = masks[static_cast<size_t>(i)];
            check(m.dim(0) == pose_video.dim(0), "encode_motion_addition_baseline: mask/pose length mismatch");
            Tensor<S> masked(pose_video.shape);
            const int T = pose_video.dim(0), H = pose_video.dim(2), W = pose_video.dim(3);
            for (int t = 0; t < T; ++t)
                for (int ch = 0; ch < 3; ++ch)
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x)
                            masked.at4(t, ch, y, x) = pose_video.at4(t, ch, y, x) * static_cast<S>(m.at4(t, 0, y, x));
            c.masked_poses[static_cast<size_t>(i)] = masked;
            Tensor<S> mask_s({m.dim(0), 1, m.dim(2), m.dim(3)});
            for (int64_t j = 0; j < m.numel(); ++j) mask_s[j] = static_cast<S>(m[j]);
            Tensor<S> f = pose_encoder.forward(P, masked, c.pose_per_entity[static_cast<size_t>(i)]);
            Tensor<S> b = mask_branch.forward(P, mask_s, c.mask_per_entity[static_cast<size_t>(i)]);
            f += b;
            if (i == 0) total = std::move(f);
            else total += f;
        }
        return total;
    }

    void backward_addition(const ParamStore<S>& P, const Tensor<S>& gy, MotionStreamCache<S>& c,
                           GradStore<S>& G) const {
        for (size_t i = 0; i < c.pose_per_entity.size(); ++i) {
            pose_encoder.backward(P, gy, c.pose_per_entity[i], G);
            mask_branch.backward(P, gy, c.mask_per_entity[i], G);
        }
    }
};

// ------------------------------------------------------------------ fuse ---

// Token-wise sum; motion features are flattened in the same (t, h, w) raster
// order as patchify.
template <typename S>
TokenGrid<S> fuse(const TokenGrid<S>& reference, const Tensor<S>& motion_grid) {
    check(motion_grid.dim(0) == reference.tp && motion_grid.dim(2) == reference.hp &&
              motion_grid.dim(3) == reference.wp,
          "fuse: motion feature grid does not match reference token grid");
    check(motion_grid.dim(1) == reference.tokens.dim(1), "fuse: channel width mismatch");
    TokenGrid<S> out = reference;
    Tensor<S> m = grid_to_tokens(motion_grid);
    out.tokens += m;
    return out;
}

}  // namespace maskflow
