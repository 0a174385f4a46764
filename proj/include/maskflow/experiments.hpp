#pragma once

#include "maskflow/training.hpp"

namespace maskflow {

struct EvalRow {
    int64_t id = 0;
    FrameMetrics metrics;
    std::optional<double> identity;
    std::vector<int> labels;
};

struct EvalReport {
    MetricsReport aggregate;
    std::vector<EvalRow> rows;
    ordered_json to_json(const SamplerConfig& sampler, uint64_t eval_seed) const {
        ordered_json j;
        j["sampler"] = {{"steps", sampler.steps}, {"schedule", "uniform"}, {"seed", eval_seed}};
        j["rows"] = ordered_json::array();
        for (const auto& r : rows) {
            ordered_json jr;
            jr["id"] = r.id;
            jr["psnr_db"] = r.metrics.psnr_db;
            jr["ssim"] = r.metrics.ssim;
            jr["l1_e3"] = r.metrics.l1_e3;
            if (r.identity) jr["identity_accuracy"] = *r.identity;
            jr["labels"] = r.labels;
            j["rows"].push_back(jr);
        }
        ordered_json agg;
        agg["samples"] = aggregate.samples;
        agg["psnr_db"] = {{"mean", aggregate.psnr_db}, {"std", aggregate.psnr_std}};
        agg["ssim"] = {{"mean", aggregate.ssim}, {"std", aggregate.ssim_std}};
        agg["l1_e3"] = {{"mean", aggregate.l1_e3}, {"std", aggregate.l1_std}};
        if (aggregate.identity_acc)
            agg["identity_accuracy"] = {{"mean", *aggregate.identity_acc}, {"std", aggregate.identity_std}};
        j["aggregate"] = agg;
        return j;
    }

    std::string to_csv() const {
        std::string out = "PSNR,SSIM,L1(E-3),identity_accuracy\n";
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%.4f,%.6f,%.4f,%s\n", r.metrics.psnr_db, r.metrics.ssim,
                          r.metrics.l1_e3, r.identity ? std::to_string(*r.identity).c_str() : "");
            out += buf;
        }
        return out;
    }
};

// Generates every manifest sample with seeds derived from eval_seed and
// scores it against the stored target; fully deterministic.
inline EvalReport evaluate_set(const VideoDenoiser<float>& model, const std::vector<SceneSample>& scenes,
                               const SamplerConfig& sampler, uint64_t eval_seed) {
    if (scenes.empty()) throw ValidationError("empty evaluation set");
    const int n = model.cfg.bank_capacity;
    IdentityLabelBank bank{n};
    EvalReport report;
    report.rows.resize(scenes.size());
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(scenes.size()); ++i) {
        const SceneSample& scene = scenes[static_cast<size_t>(i)];
        IdentityAssignment a =
            sample_assignment(scene.entity_count, bank, derive_seed(eval_seed, "eval.assign", static_cast<uint64_t>(i)));
        Condition<float> cond = make_condition<float>(scene, a, n, model.cfg.mode);
        SamplerConfig sc = sampler;
        sc.seed = derive_seed(eval_seed, "eval.noise", static_cast<uint64_t>(i));
        TensorF gen = sample_video(model, model.params, cond, sc);
        EvalRow row;
        row.id = i;
        row.metrics = frame_metrics(gen, scene.target_video);
        IdentityAccuracy acc = identity_accuracy(gen, scene.masks, scene.meta.entities);
        row.identity = acc.accuracy;
        row.labels = a.labels;
        report.rows[static_cast<size_t>(i)] = std::move(row);
    }
    std::vector<FrameMetrics> fm;
    std::vector<std::optional<double>> ids;
    for (const auto& r : report.rows) {
        fm.push_back(r.metrics);
        ids.push_back(r.identity);
    }
    report.aggregate = aggregate_metrics(fm, ids);
    return report;
}

// ---------------------------------------------------------- symmetry probe ---

struct SymmetryProbeRow {
    int64_t id = 0;
    double l1_divergence = 0;      // mean per-pixel L1 between the two runs
    double identity_delta = 0;     // accuracy(A) - accuracy(pi o A)
};

struct SymmetryReport {
    double mean_l1 = 0;
    double mean_identity_delta = 0;
    std::vector<SymmetryProbeRow> rows;

    ordered_json to_json() const {
        ordered_json j;
        j["mean_l1_divergence"] = mean_l1;
        j["mean_identity_delta"] = mean_identity_delta;
        j["rows"] = ordered_json::array();
        for (const auto& r : rows) {
            j["rows"].push_back({{"id", r.id}, {"l1_divergence", r.l1_divergence},
                                 {"identity_delta", r.identity_delta}});
        }
        return j;
    }
};

// Generates each probe scene under assignment A and pi o A with identical
// sampling seeds; a model that binds identity to masks rather than channels
// diverges very little.
inline SymmetryReport symmetry_probe(const VideoDenoiser<float>& model, const std::vector<SceneSample>& probes,
                                     const LabelPermutation& pi, const SamplerConfig& sampler, uint64_t seed) {
    pi.validate();
    const int n = model.cfg.bank_capacity;
    IdentityLabelBank bank{n};
    SymmetryReport report;
    report.rows.resize(probes.size());
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(probes.size()); ++i) {
        const SceneSample& scene = probes[static_cast<size_t>(i)];
        IdentityAssignment a =
            sample_assignment(scene.entity_count, bank, derive_seed(seed, "probe.assign", static_cast<uint64_t>(i)));
        IdentityAssignment b = apply_permutation(pi, a);
        SamplerConfig sc = sampler;
        sc.seed = derive_seed(seed, "probe.noise", static_cast<uint64_t>(i));
        Condition<float> ca = make_condition<float>(scene, a, n, model.cfg.mode);
        Condition<float> cb = make_condition<float>(scene, b, n, model.cfg.mode);
        TensorF va = sample_video(model, model.params, ca, sc);
        TensorF vb = sample_video(model, model.params, cb, sc);
        SymmetryProbeRow row;
        row.id = i;
        row.l1_divergence = mean_abs_diff(va, vb);
        IdentityAccuracy ia = identity_accuracy(va, scene.masks, scene.meta.entities);
        IdentityAccuracy ib = identity_accuracy(vb, scene.masks, scene.meta.entities);
        if (ia.accuracy && ib.accuracy) row.identity_delta = *ia.accuracy - *ib.accuracy;
        report.rows[static_cast<size_t>(i)] = row;
    }
    for (const auto& r : report.rows) {
        report.mean_l1 += r.l1_divergence;
        report.mean_identity_delta += r.identity_delta;
    }
    if (!report.rows.empty()) {
        report.mean_l1 /= static_cast<double>(report.rows.size());
        report.mean_identity_delta /= static_cast<double>(report.rows.size());
    }
    return report;
}

// --------------------------------------------------------- ablation suite ---

struct AblationConfig {
    TrainConfig base;                 // mask_driven settings; variants derive from it
    std::string swap_eval_manifest;   // 2-entity circular_swap scenes
    std::string multi_eval_manifest;  // 3-entity scenes
    std::string single_eval_manifest; // optional, 1-entity scenes
    SamplerConfig sampler;
    uint64_t eval_seed = 9000;
    int symmetry_probes = 16;
    std::string out_dir;
};

struct AblationReport {
    ordered_json table;

    double get(const std::string& variant, const std::string& eval_set, const std::string& metric) const {
        return table.at(variant).at(eval_set).at(metric).get<double>();
    }
};

// Trains mask_driven, addition_driven, no_identifier and the fixed-label
// control under identical budgets and seeds, evaluates them on the held-out
// sets and probes symmetry.
inline AblationReport run_ablation_suite(const AblationConfig& cfg) {
    std::vector<SceneSample> train_scenes = load_dataset(cfg.base.manifest);
    std::vector<SceneSample> swap_eval = load_dataset(cfg.swap_eval_manifest);
    std::vector<SceneSample> multi_eval = load_dataset(cfg.multi_eval_manifest);

    auto variant_cfg = [&](const std::string& name, ConditioningMode mode, bool fixed) {
        TrainConfig c = cfg.base;
        c.model.mode = mode;
        c.fixed_labels = fixed;
        if (!cfg.out_dir.empty()) c.run_dir = (fs::path(cfg.out_dir) / name).string();
        return c;
    };

    struct Variant {
        std::string name;
        TrainConfig cfg;
        TrainResult result;
    };
    std::vector<Variant> variants;
    variants.push_back({"mask_driven", variant_cfg("mask_driven", ConditioningMode::mask_driven, false), {}});
    variants.push_back(
        {"addition_driven", variant_cfg("addition_driven", ConditioningMode::addition_driven, false), {}});
    variants.push_back({"no_identifier", variant_cfg("no_identifier", ConditioningMode::no_identifier, false), {}});
    variants.push_back({"fixed_labels", variant_cfg("fixed_labels", ConditioningMode::mask_driven, true), {}});

    ordered_json table = ordered_json::object();
    for (auto& v : variants) {
        v.result = train_or_load(v.cfg, &train_scenes);
        VideoDenoiser<float> model = model_from_checkpoint(v.result.state);
        ordered_json row = ordered_json::object();
        EvalReport swap_r = evaluate_set(model, swap_eval, cfg.sampler, cfg.eval_seed);
        row["swap_k2"] = swap_r.to_json(cfg.sampler, cfg.eval_seed)["aggregate"];
        EvalReport multi_r = evaluate_set(model, multi_eval, cfg.sampler, cfg.eval_seed + 1);
        row["multi_k3"] = multi_r.to_json(cfg.sampler, cfg.eval_seed + 1)["aggregate"];
        row["final_loss"] = v.result.final_loss();
        table[v.name] = row;
    }

    // symmetry regression: random-assignment model vs fixed-label control
    {
        std::vector<SceneSample> probes(swap_eval.begin(),
                                        swap_eval.begin() + std::min<size_t>(swap_eval.size(),
                                                                             static_cast<size_t>(cfg.symmetry_probes)));
        LabelPermutation pi = LabelPermutation::random(cfg.base.model.bank_capacity,
                                                       derive_seed(cfg.eval_seed, "ablation.pi", 0));
        VideoDenoiser<float> random_model = model_from_checkpoint(variants[0].result.state);
        VideoDenoiser<float> fixed_model = model_from_checkpoint(variants[3].result.state);
        SymmetryReport sr = symmetry_probe(random_model, probes, pi, cfg.sampler, cfg.eval_seed + 2);
        SymmetryReport sf = symmetry_probe(fixed_model, probes, pi, cfg.sampler, cfg.eval_seed + 2);
        table["symmetry"] = {{"random_assignment_l1", sr.mean_l1},
                             {"fixed_label_l1", sf.mean_l1},
                             {"probes", static_cast<int>(probes.size())}};
    }

    AblationReport report;
    report.table = std::move(table);
    if (!cfg.out_dir.empty())
        write_text_file(fs::path(cfg.out_dir) / "ablation_report.json", report.table.dump(2) + "\n");
    return report;
}

}  // namespace maskflow
