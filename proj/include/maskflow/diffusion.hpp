#pragma once

#include <functional>

#include "maskflow/pipeline.hpp"

namespace maskflow {

// Linear interpolation path between data x0 and unit noise x1 with velocity
// target v = x1 - x0; x_t = (1-t) x0 + t x1 hits both endpoints exactly.
template <typename S>
struct FlowPath {
    Tensor<S> x_t;
    Tensor<S> velocity;

    static FlowPath make(const Tensor<S>& x0, const Tensor<S>& x1, S t) {
        check(x0.same_shape(x1), "flow path: x0/x1 shape mismatch");
        check(t >= S(0) && t <= S(1), "flow path: t must lie in [0,1]");
        FlowPath p;
        p.x_t = Tensor<S>(x0.shape);
        p.velocity = Tensor<S>(x0.shape);
        for (int64_t i = 0; i < x0.numel(); ++i) {
            p.x_t[i] = (S(1) - t) * x0[i] + t * x1[i];
            p.velocity[i] = x1[i] - x0[i];
        }
        return p;
    }
};

template <typename S>
Tensor<S> gaussian_noise(const std::vector<int>& shape, uint64_t seed) {
    Rng rng(seed, "diffusion.noise");
    Tensor<S> x(shape);
    for (auto& v : x.v) v = static_cast<S>(rng.normal());
    return x;
}

// Mean-squared velocity regression through the full pipeline. Gradients are
// accumulated into G when it is non-null.
template <typename S>
S training_loss(const VideoDenoiser<S>& model, const ParamStore<S>& P, const Tensor<S>& x0,
                const Condition<S>& cond, S t, uint64_t noise_seed, GradStore<S>* G,
                PipelineCache<S>& cache, const std::string& sample_id = "") {
    Tensor<S> x1 = gaussian_noise<S>(x0.shape, noise_seed);
    FlowPath<S> path = FlowPath<S>::make(x0, x1, t);
    Tensor<S> v_hat;
    try {
        v_hat = model.velocity(P, path.x_t, t, cond, cache);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) +
                              (sample_id.empty() ? std::string() : " [sample " + sample_id + "]"));
    }
    const int64_t n = v_hat.numel();
    S loss = 0;
    for (int64_t i = 0; i < n; ++i) {
        S d = v_hat[i] - path.velocity[i];
        loss += d * d;
    }
    loss /= static_cast<S>(n);
    if (!std::isfinite(static_cast<double>(loss)))
        throw ValidationError("training_loss: NaN/Inf loss" + (sample_id.empty() ? std::string() : " on sample " + sample_id));
    if (G) {
        Tensor<S> g_v(v_hat.shape);
        const S c = S(2) / static_cast<S>(n);
        for (int64_t i = 0; i < n; ++i) g_v[i] = c * (v_hat[i] - path.velocity[i]);
        model.velocity_backward(P, g_v, cache, *G);
    }
    return loss;
}

struct SamplerConfig {
    int steps = 25;
    uint64_t seed = 0;

    void validate() const { check(steps >= 1, "sampler: steps must be >= 1"); }
};

template <typename S>
using VelocityFn = std::function<Tensor<S>(const Tensor<S>& x, S t)>;

// Deterministic Euler integration of the learned flow from t=1 down to t=0
// over a uniform schedule; the output is clamped to [0, 1].
template <typename S>
Tensor<S> sample_video_with(const VelocityFn<S>& velocity, const std::vector<int>& shape,
                            const SamplerConfig& sampler) {
    sampler.validate();
    Tensor<S> x = gaussian_noise<S>(shape, sampler.seed);
    const S dt = S(1) / static_cast<S>(sampler.steps);
    for (int i = 0; i < sampler.steps; ++i) {
        S t = S(1) - static_cast<S>(i) * dt;
        Tensor<S> v = velocity(x, t);
        for (int64_t j = 0; j < x.numel(); ++j) x[j] -= dt * v[j];
    }
    for (auto& v : x.v) v = std::min(S(1), std::max(S(0), v));
    return x;
}

template <typename S>
Tensor<S> sample_video(const VideoDenoiser<S>& model, const ParamStore<S>& P, const Condition<S>& cond,
                       const SamplerConfig& sampler) {
    PipelineCache<S> cache;
    VelocityFn<S> fn = [&](const Tensor<S>& x, S t) { return model.velocity(P, x, t, cond, cache); };
    return sample_video_with<S>(fn, {model.cfg.t, 3, model.cfg.h, model.cfg.w}, sampler);
}

}  // namespace maskflow
