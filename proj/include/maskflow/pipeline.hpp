#pragma once

#include "maskflow/backbone.hpp"
#include "maskflow/conditioning.hpp"
#include "maskflow/identifier_assigner.hpp"
#include "maskflow/sprite_world.hpp"

namespace maskflow {

struct ModelConfig {
    int h = 32, w = 32, t = 8;
    int bank_capacity = 7;
    int d_model = 96;
    int n_layers = 4;
    int n_heads = 4;
    double mlp_ratio = 4.0;
    int conv_hidden = 32;
    int patch = 4;
    ConditioningMode mode = ConditioningMode::mask_driven;

    BackboneConfig backbone() const {
        BackboneConfig b;
        b.d_model = d_model;
        b.n_layers = n_layers;
        b.n_heads = n_heads;
        b.mlp_ratio = mlp_ratio;
        b.grid_t = t;
        b.grid_h = h / patch;
        b.grid_w = w / patch;
        return b;
    }
};

// Per-sample conditioning bundle in the model's scalar type.
template <typename S>
struct Condition {
    Tensor<S> ref_image;   // (1, 3, H, W)
    Tensor<S> ref_pose;    // (1, 3, H, W)
    Tensor<S> pose_video;  // (T, 3, H, W)
    Tensor<S> onehot;      // (T, n+1, H, W); empty for no_identifier / addition_driven
    std::vector<TensorF> masks;  // addition_driven only
};

template <typename S>
Tensor<S> to_scalar(const TensorF& x) {
    Tensor<S> out(x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) out[i] = static_cast<S>(x[i]);
    return out;
}

template <typename S>
Condition<S> make_condition(const SceneSample& scene, const IdentityAssignment& assignment, int bank_capacity,
                            ConditioningMode mode) {
    Condition<S> c;
    c.ref_image = to_scalar<S>(scene.reference_image);
    c.pose_video = to_scalar<S>(scene.pose_video);
    const int H = scene.meta.h, W = scene.meta.w;
    c.ref_pose = Tensor<S>({1, 3, H, W});
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) c.ref_pose.at4(0, ch, y, x) = c.pose_video.at4(0, ch, y, x);
    if (mode == ConditioningMode::mask_driven) {
        for (int l : assignment.labels)
            if (l > bank_capacity)
                throw CapacityError("label " + std::to_string(l) + " exceeds bank capacity n=" +
                                    std::to_string(bank_capacity));
        LabelMap lm = assign_labels(scene.masks, assignment);
        c.onehot = one_hot<S>(lm, bank_capacity);
    } else if (mode == ConditioningMode::addition_driven) {
        c.masks = scene.masks;
    }
    return c;
}

template <typename S>
struct PipelineCache {
    ReferenceStreamCache<S> reference;
    MotionStreamCache<S> motion;
    BackboneCache<S> backbone;
    LinearCache<S> head;
};

// The full velocity model: conditioning encoders, token fusion, transformer
// backbone and the unpatchify head.
template <typename S>
struct VideoDenoiser {
    ModelConfig cfg;
    ParamStore<S> params;
    ReferenceStream<S> reference;
    MotionStream<S> motion;
    Backbone<S> backbone;
    UnpatchifyHead<S> head;

    void init(const ModelConfig& cfg_, uint64_t seed) {
        cfg = cfg_;
        check(cfg.h % cfg.patch == 0 && cfg.w % cfg.patch == 0, "model: geometry must divide the patch size");
        Rng rng(seed, "model.init");
        reference.patch = cfg.patch;
        reference.init(params, cfg.conv_hidden, cfg.d_model, rng);
        motion.init(params, cfg.mode, cfg.bank_capacity, cfg.conv_hidden, cfg.d_model, rng);
        backbone.init(params, cfg.backbone(), rng);
        head.patch = cfg.patch;
        head.init(params, cfg.d_model, rng);
    }

    // x: noisy sample (T, 3, H, W); t in [0, 1]. Uses the supplied store so
    // callers can evaluate permuted or perturbed parameter sets.
    Tensor<S> velocity(const ParamStore<S>& P, const Tensor<S>& x, S t, const Condition<S>& cond,
                       PipelineCache<S>& c, AttentionProbe* probe = nullptr) const {
        TokenGrid<S> ref_tokens = reference.forward(P, cond.ref_image, cond.ref_pose, x, c.reference);
        Tensor<S> motion_grid =
            (cfg.mode == ConditioningMode::addition_driven)
                ? motion.forward_addition(P, cond.pose_video, cond.masks, c.motion)
                : motion.forward(P, cond.pose_video, cond.onehot, c.motion);
        TokenGrid<S> fused = fuse(ref_tokens, motion_grid);
        Tensor<S> y = backbone.forward(P, fused.tokens, t, c.backbone, probe);
        return head.forward(P, y, cfg.t, cfg.h, cfg.w, c.head);
    }

    Tensor<S> velocity(const Tensor<S>& x, S t, const Condition<S>& cond, PipelineCache<S>& c,
                       AttentionProbe* probe = nullptr) const {
        return velocity(params, x, t, cond, c, probe);
    }

    // Backward from a gradient w.r.t. the predicted velocity; returns the
    // gradient w.r.t. the noisy input x.
    Tensor<S> velocity_backward(const ParamStore<S>& P, const Tensor<S>& g_v, PipelineCache<S>& c,
                                GradStore<S>& G) const {
        Tensor<S> g_y = head.backward(P, g_v, c.head, G);
        Tensor<S> g_tokens = backbone.backward(P, g_y, c.backbone, G);
        Tensor<S> g_motion = tokens_to_grid(g_tokens, cfg.t, cfg.d_model, cfg.h / cfg.patch, cfg.w / cfg.patch);
        if (cfg.mode == ConditioningMode::addition_driven)
            motion.backward_addition(P, g_motion, c.motion, G);
        else
            motion.backward(P, g_motion, c.motion, G);
        return reference.backward(P, g_tokens, c.reference, G);
    }
};

}  // namespace maskflow
