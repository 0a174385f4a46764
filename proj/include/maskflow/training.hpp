#pragma once

#include <omp.h>

#include <fstream>

#include "maskflow/checkpoint.hpp"
#include "maskflow/diffusion.hpp"
#include "maskflow/evaluation.hpp"

namespace maskflow {

struct TrainConfig {
    ModelConfig model;
    std::string manifest;
    int steps = 4000;
    int batch_size = 8;
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    uint64_t seed = 1;
    std::string stage = "stage1_swing_analog";
    bool fixed_labels = false;  // symmetry-control: always assign 1..k
    int metrics_every = 50;
    std::string run_dir;  // metrics + checkpoint location; empty keeps everything in memory
    bool verbose = false;

    ordered_json echo() const {
        ordered_json j;
        j["model"] = model_config_to_json(model);
        j["manifest"] = manifest;
        j["steps"] = steps;
        j["batch_size"] = batch_size;
        j["lr"] = lr;
        j["beta1"] = beta1;
        j["beta2"] = beta2;
        j["adam_eps"] = adam_eps;
        j["seed"] = seed;
        j["stage"] = stage;
        j["fixed_labels"] = fixed_labels;
        return j;
    }
};

struct TrainResult {
    CheckpointState state;
    std::vector<double> loss_history;                 // mean batch loss per step
    std::vector<double> cumulative_slice_grad_norms;  // (n+1), mask_driven only
    std::string checkpoint_dir;

    double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back(); }
};

namespace detail {

inline void adam_update(ParamStore<float>& P, const GradStore<float>& G, OptimizerState& opt, int64_t step1,
                        const TrainConfig& cfg) {
    const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
    const float corr1 = 1.0f - std::pow(b1, static_cast<float>(step1));
    const float corr2 = 1.0f - std::pow(b2, static_cast<float>(step1));
    const float lr = static_cast<float>(cfg.lr);
    const float eps = static_cast<float>(cfg.adam_eps);
    for (size_t i = 0; i < P.size(); ++i) {
        float* p = P.tensors[i].data();
        const float* g = G.tensors[i].data();
        float* m = opt.m[i].data();
        float* v = opt.v[i].data();
        const int64_t n = P.tensors[i].numel();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (1.0f - b1) * g[j];
            v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
            float mh = m[j] / corr1;
            float vh = v[j] / corr2;
            p[j] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

inline std::vector<double> bank_slice_norms(const VideoDenoiser<float>& model, const GradStore<float>& G) {
    if (model.cfg.mode != ConditioningMode::mask_driven) return {};
    const auto& stack = model.motion.adapter;
    const TensorF& gw = G[stack.bank.w];
    std::vector<double> norms(static_cast<size_t>(stack.n) + 1, 0.0);
    const int taps = AdapterStack<float>::kTaps;
    for (int o = 0; o < stack.hidden; ++o)
        for (int c = 0; c <= stack.n; ++c)
            for (int tap = 0; tap < taps; ++tap) {
                double v = gw[(static_cast<int64_t>(o) * (stack.n + 1) + c) * taps + tap];
                norms[static_cast<size_t>(c)] += v * v;
            }
    for (auto& v : norms) v = std::sqrt(v);
    return norms;
}

}  // namespace detail

// Scalable random-label training: every iteration draws a fresh injective
// assignment per sample, so all n bank slices get trained from k=2 data.
inline TrainResult train(const TrainConfig& cfg, const std::vector<SceneSample>* preloaded = nullptr,
                         const std::string& resume_dir = "") {
    std::vector<SceneSample> owned;
    const std::vector<SceneSample>* scenes = preloaded;
    if (!scenes) {
        owned = load_dataset(cfg.manifest);
        scenes = &owned;
    }
    check(!scenes->empty(), "train: dataset is empty");
    const int n = cfg.model.bank_capacity;
    for (const auto& s : *scenes)
        if (s.entity_count > n && cfg.model.mode == ConditioningMode::mask_driven)
            throw CapacityError("train: sample with k=" + std::to_string(s.entity_count) +
                                " exceeds bank capacity n=" + std::to_string(n));

    VideoDenoiser<float> model;
    model.init(cfg.model, derive_seed(cfg.seed, "model.init", 0));
    OptimizerState opt;
    opt.init_like(model.params);
    int64_t start_step = 0;
    if (!resume_dir.empty()) {
        CheckpointState st = load_checkpoint(resume_dir);
        check(model_config_to_json(st.model) == model_config_to_json(cfg.model),
              "resume: checkpoint model config does not match");
        model.params = st.params;
        if (!st.opt.empty()) opt = st.opt;
        start_step = st.step;
    }

    const int B = cfg.batch_size;
    std::vector<GradStore<float>> slot_grads;
    for (int s = 0; s < B; ++s) slot_grads.emplace_back(model.params);
    std::vector<PipelineCache<float>> caches(static_cast<size_t>(B));
    std::vector<float> slot_loss(static_cast<size_t>(B));
    GradStore<float> total(model.params);
    IdentityLabelBank bank{n};

    TrainResult result;
    result.loss_history.reserve(static_cast<size_t>(cfg.steps));
    result.cumulative_slice_grad_norms.assign(static_cast<size_t>(n) + 1, 0.0);

    std::ofstream metrics;
    if (!cfg.run_dir.empty()) {
        fs::create_directories(cfg.run_dir);
        metrics.open(fs::path(cfg.run_dir) / "metrics.jsonl", start_step == 0 ? std::ios::trunc : std::ios::app);
    }

    for (int64_t step = start_step; step < cfg.steps; ++step) {
#pragma omp parallel for schedule(static)
        for (int slot = 0; slot < B; ++slot) {
            const uint64_t g = static_cast<uint64_t>(step) * B + static_cast<uint64_t>(slot);
            const size_t idx = static_cast<size_t>(derive_seed(cfg.seed, "train.batch", g) % scenes->size());
            const SceneSample& scene = (*scenes)[idx];
            IdentityAssignment assignment =
                cfg.fixed_labels ? fixed_assignment(scene.entity_count)
                                 : sample_assignment(scene.entity_count, bank, derive_seed(cfg.seed, "train.assign", g));
            Condition<float> cond = make_condition<float>(scene, assignment, n, cfg.model.mode);
            Tensor<float> x0 = to_scalar<float>(scene.target_video);
            Rng trng(cfg.seed, "train.t", g);
            float t = static_cast<float>(trng.uniform());
            slot_grads[static_cast<size_t>(slot)].zero();
            slot_loss[static_cast<size_t>(slot)] =
                training_loss<float>(model, model.params, x0, cond, t, derive_seed(cfg.seed, "train.noise", g),
                                     &slot_grads[static_cast<size_t>(slot)], caches[static_cast<size_t>(slot)],
                                     "dataset[" + std::to_string(idx) + "] step " + std::to_string(step));
        }

        total.zero();
        double loss = 0;
        for (int slot = 0; slot < B; ++slot) {  // fixed reduction order keeps runs bitwise reproducible
            total.add(slot_grads[static_cast<size_t>(slot)]);
            loss += slot_loss[static_cast<size_t>(slot)];
        }
        total.scale(1.0f / static_cast<float>(B));
        loss /= B;

        detail::adam_update(model.params, total, opt, step + 1, cfg);
        result.loss_history.push_back(loss);

        std::vector<double> norms = detail::bank_slice_norms(model, total);
        for (size_t i = 0; i < norms.size(); ++i) result.cumulative_slice_grad_norms[i] += norms[i];

        if ((step % cfg.metrics_every == 0 || step + 1 == cfg.steps)) {
            if (metrics.is_open()) {
                ordered_json line;
                line["step"] = step;
                line["loss"] = loss;
                line["slice_grad_norms"] = norms;
                metrics << line.dump() << "\n";
                metrics.flush();
            }
            if (cfg.verbose) std::fprintf(stderr, "step %6lld  loss %.6f\n", static_cast<long long>(step), loss);
        }
    }

    result.state.model = cfg.model;
    result.state.params = std::move(model.params);
    result.state.opt = std::move(opt);
    result.state.step = cfg.steps;
    result.state.global_seed = cfg.seed;
    result.state.train_echo = cfg.echo();

    if (!cfg.run_dir.empty()) {
        fs::path ckpt = fs::path(cfg.run_dir) / "checkpoint";
        save_checkpoint(result.state, ckpt);
        result.checkpoint_dir = ckpt.string();
        ordered_json summary;
        summary["final_loss"] = result.final_loss();
        summary["steps"] = cfg.steps;
        summary["cumulative_slice_grad_norms"] = result.cumulative_slice_grad_norms;
        write_text_file(fs::path(cfg.run_dir) / "train_summary.json", summary.dump(2) + "\n");
    }
    return result;
}

// Reuses a finished run when its configuration echo matches; otherwise trains.
inline TrainResult train_or_load(const TrainConfig& cfg, const std::vector<SceneSample>* preloaded = nullptr) {
    if (!cfg.run_dir.empty()) {
        fs::path ckpt = fs::path(cfg.run_dir) / "checkpoint";
        fs::path summary_path = fs::path(cfg.run_dir) / "train_summary.json";
        if (fs::exists(ckpt / "index.json") && fs::exists(summary_path)) {
            CheckpointState st = load_checkpoint(ckpt);
            if (st.train_echo == cfg.echo() && st.step == cfg.steps) {
                TrainResult r;
                r.state = std::move(st);
                r.checkpoint_dir = ckpt.string();
                ordered_json summary = ordered_json::parse(read_text_file(summary_path));
                r.loss_history = {summary.at("final_loss").get<double>()};
                r.cumulative_slice_grad_norms =
                    summary.at("cumulative_slice_grad_norms").get<std::vector<double>>();
                return r;
            }
        }
    }
    return train(cfg, preloaded);
}

}  // namespace maskflow
