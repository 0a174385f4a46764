#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "maskflow/maskflow.hpp"

using namespace maskflow;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitCapacity = 3;

KeyValueConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    KeyValueConfig cfg = path.empty() ? KeyValueConfig{} : KeyValueConfig::parse_file(path);
    for (const auto& kv : overrides) cfg.apply_override(kv);
    return cfg;
}

TrainConfig train_config_from(const KeyValueConfig& c) {
    TrainConfig t;
    t.model = model_config_from(c);
    t.manifest = c.get_string("data.manifest", "");
    t.steps = c.get_int("train.steps", 4000);
    t.batch_size = c.get_int("train.batch_size", 8);
    t.lr = c.get_double("train.lr", 1e-4);
    t.beta1 = c.get_double("train.beta1", 0.9);
    t.beta2 = c.get_double("train.beta2", 0.999);
    t.seed = c.get_u64("global_seed", 1);
    t.stage = c.get_string("train.stage", "stage1_swing_analog");
    t.fixed_labels = c.get_string("train.label_policy", "random") == "fixed";
    t.metrics_every = c.get_int("train.metrics_every", 50);
    t.run_dir = c.get_string("run.dir", "runs/train");
    t.verbose = true;
    return t;
}

std::vector<int> parse_labels(const std::string& s) {
    std::vector<int> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stoi(item));
    return out;
}

// "--perm 1:3,3:1"; unlisted labels map to themselves.
LabelPermutation parse_perm(const std::string& s, int n) {
    LabelPermutation pi(n);
    if (s.empty()) return pi;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        auto colon = item.find(':');
        check(colon != std::string::npos, "--perm expects a:b pairs, got '" + item + "'");
        int a = std::stoi(item.substr(0, colon));
        int b = std::stoi(item.substr(colon + 1));
        check(a >= 1 && a <= n && b >= 1 && b <= n, "--perm labels must be in 1..n");
        pi.map[static_cast<size_t>(a)] = b;
    }
    pi.validate();
    return pi;
}

int run(int argc, char** argv) {
    CLI::App app{"mask-driven multi-entity identity conditioning for sprite-world video diffusion"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "run configuration file (dotted key = value lines)");
    app.add_option("--set", overrides, "override a config key (key=value), repeatable");

    auto* cmd_gen = app.add_subcommand("gen-data", "generate a sprite dataset and manifest");
    bool overwrite = false;
    std::string gen_out;
    cmd_gen->add_flag("--overwrite", overwrite, "replace an existing manifest");
    cmd_gen->add_option("--out", gen_out, "output directory (default data.dir from config)");

    auto* cmd_train = app.add_subcommand("train", "train a model per the config");
    std::string resume_dir;
    cmd_train->add_option("--resume", resume_dir, "checkpoint directory to resume from");

    auto* cmd_sample = app.add_subcommand("sample", "generate a video for one scene directory");
    std::string ckpt_path, scene_dir, labels_str, out_dir = "sample_out";
    int sample_steps = 25;
    uint64_t sample_seed = 0;
    cmd_sample->add_option("--ckpt", ckpt_path, "checkpoint directory")->required();
    cmd_sample->add_option("--scene", scene_dir, "scene sample directory")->required();
    cmd_sample->add_option("--labels", labels_str, "comma-separated identity labels per entity, e.g. 2,5");
    cmd_sample->add_option("--steps", sample_steps, "sampler steps");
    cmd_sample->add_option("--seed", sample_seed, "sampler seed");
    cmd_sample->add_option("--out", out_dir, "output directory for frame PNGs");

    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    std::string eval_ckpt, eval_manifest, report_path = "eval_report.json", csv_path;
    int eval_steps = 25;
    uint64_t eval_seed = 9000;
    cmd_eval->add_option("--ckpt", eval_ckpt, "checkpoint directory")->required();
    cmd_eval->add_option("--manifest", eval_manifest, "evaluation manifest")->required();
    cmd_eval->add_option("--steps", eval_steps, "sampler steps");
    cmd_eval->add_option("--seed", eval_seed, "evaluation seed");
    cmd_eval->add_option("--report", report_path, "JSON report output path");
    cmd_eval->add_option("--csv", csv_path, "optional CSV table output path");

    auto* cmd_ablate = app.add_subcommand("ablate", "train and compare conditioning variants");

    auto* cmd_probe = app.add_subcommand("symmetry-probe", "measure divergence under label permutation");
    std::string probe_ckpt, probe_manifest, perm_str;
    int probe_count = 16, probe_steps = 25;
    uint64_t probe_seed = 7000;
    cmd_probe->add_option("--ckpt", probe_ckpt, "checkpoint directory")->required();
    cmd_probe->add_option("--manifest", probe_manifest, "probe scene manifest")->required();
    cmd_probe->add_option("--perm", perm_str, "label permutation as a:b pairs, e.g. 1:3,3:1");
    cmd_probe->add_option("--probes", probe_count, "number of probe scenes");
    cmd_probe->add_option("--steps", probe_steps, "sampler steps");
    cmd_probe->add_option("--seed", probe_seed, "probe seed");

    CLI11_PARSE(app, argc, argv);
    KeyValueConfig cfg = load_config(config_path, overrides);

    if (cmd_gen->parsed()) {
        uint64_t gseed = cfg.get_u64("global_seed", 1);
        DatasetConfig dc = dataset_config_from(cfg, gseed);
        std::string out = gen_out.empty() ? cfg.get_string("data.dir", "data/train") : gen_out;
        Manifest man = generate_dataset(dc, out, overwrite);
        std::printf("wrote %zu samples to %s\n", man.entries.size(), out.c_str());
        return 0;
    }

    if (cmd_train->parsed()) {
        TrainConfig tc = train_config_from(cfg);
        check(!tc.manifest.empty(), "train: set data.manifest in the config");
        TrainResult r = train(tc, nullptr, resume_dir);
        std::printf("finished %d steps, final loss %.6f, checkpoint at %s\n", tc.steps, r.final_loss(),
                    r.checkpoint_dir.c_str());
        return 0;
    }

    if (cmd_sample->parsed()) {
        CheckpointState st = load_checkpoint(ckpt_path);
        SceneSample scene = load_sample(scene_dir);
        IdentityAssignment a;
        if (labels_str.empty()) {
            IdentityLabelBank bank{st.model.bank_capacity};
            a = sample_assignment(scene.entity_count, bank, sample_seed);
        } else {
            a.labels = parse_labels(labels_str);
        }
        check(static_cast<int>(a.labels.size()) == scene.entity_count,
              "sample: need one label per entity (scene has k=" + std::to_string(scene.entity_count) + ")");
        for (int l : a.labels)
            if (l > st.model.bank_capacity || l < 1)
                throw CapacityError("label " + std::to_string(l) + " outside bank capacity 1.." +
                                    std::to_string(st.model.bank_capacity));
        VideoDenoiser<float> model = model_from_checkpoint(st);
        Condition<float> cond = make_condition<float>(scene, a, st.model.bank_capacity, st.model.mode);
        SamplerConfig sc;
        sc.steps = sample_steps;
        sc.seed = sample_seed;
        TensorF video = sample_video(model, model.params, cond, sc);
        fs::create_directories(out_dir);
        for (int f = 0; f < video.dim(0); ++f)
            save_frame_png(fs::path(out_dir) / ("gen_" + zpad(f, 3) + ".png"), video, f);
        FrameMetrics m = frame_metrics(video, scene.target_video);
        IdentityAccuracy acc = identity_accuracy(video, scene.masks, scene.meta.entities);
        std::printf("wrote %d frames to %s  (psnr %.2f dB, ssim %.4f, l1e3 %.2f, identity %s)\n", video.dim(0),
                    out_dir.c_str(), m.psnr_db, m.ssim, m.l1_e3,
                    acc.accuracy ? std::to_string(*acc.accuracy).c_str() : "n/a");
        return 0;
    }

    if (cmd_eval->parsed()) {
        CheckpointState st = load_checkpoint(eval_ckpt);
        VideoDenoiser<float> model = model_from_checkpoint(st);
        std::vector<SceneSample> scenes = load_dataset(eval_manifest);
        SamplerConfig sc;
        sc.steps = eval_steps;
        EvalReport report = evaluate_set(model, scenes, sc, eval_seed);
        write_text_file(report_path, report.to_json(sc, eval_seed).dump(2) + "\n");
        if (!csv_path.empty()) write_text_file(csv_path, report.to_csv());
        std::printf("%-12s %8s %8s %10s %10s\n", "samples", "PSNR", "SSIM", "L1(E-3)", "identity");
        std::printf("%-12d %8.2f %8.4f %10.2f %10s\n", report.aggregate.samples, report.aggregate.psnr_db,
                    report.aggregate.ssim, report.aggregate.l1_e3,
                    report.aggregate.identity_acc ? std::to_string(*report.aggregate.identity_acc).c_str() : "n/a");
        std::printf("report written to %s\n", report_path.c_str());
        return 0;
    }

    if (cmd_ablate->parsed()) {
        AblationConfig ac;
        ac.base = train_config_from(cfg);
        check(!ac.base.manifest.empty(), "ablate: set data.manifest in the config");
        ac.swap_eval_manifest = cfg.get_string("eval.swap_manifest", "");
        ac.multi_eval_manifest = cfg.get_string("eval.multi_manifest", "");
        check(!ac.swap_eval_manifest.empty() && !ac.multi_eval_manifest.empty(),
              "ablate: set eval.swap_manifest and eval.multi_manifest in the config");
        ac.sampler.steps = cfg.get_int("sampler.steps", 25);
        ac.eval_seed = cfg.get_u64("eval.seed", 9000);
        ac.symmetry_probes = cfg.get_int("eval.symmetry_probes", 16);
        ac.out_dir = cfg.get_string("run.dir", "runs/ablation");
        ac.base.run_dir.clear();  // per-variant dirs are derived from out_dir
        AblationReport report = run_ablation_suite(ac);
        std::printf("%s\n", report.table.dump(2).c_str());
        return 0;
    }

    if (cmd_probe->parsed()) {
        CheckpointState st = load_checkpoint(probe_ckpt);
        VideoDenoiser<float> model = model_from_checkpoint(st);
        std::vector<SceneSample> scenes = load_dataset(probe_manifest);
        if (static_cast<int>(scenes.size()) > probe_count) scenes.resize(static_cast<size_t>(probe_count));
        LabelPermutation pi = perm_str.empty()
                                  ? LabelPermutation::random(st.model.bank_capacity, probe_seed)
                                  : parse_perm(perm_str, st.model.bank_capacity);
        SamplerConfig sc;
        sc.steps = probe_steps;
        SymmetryReport report = symmetry_probe(model, scenes, pi, sc, probe_seed);
        std::printf("%s\n", report.to_json().dump(2).c_str());
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CapacityError& e) {
        std::fprintf(stderr, "capacity error: %s\n", e.what());
        return kExitCapacity;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const IntegrityError& e) {
        std::fprintf(stderr, "integrity error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
