#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "maskflow/identifier_assigner.hpp"
#include "maskflow/png_io.hpp"
#include "maskflow/sprite_world.hpp"

namespace maskflow {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

inline uint8_t quantize8(float v) {
    float c = std::min(1.0f, std::max(0.0f, v));
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}
inline float dequantize8(uint8_t b) { return static_cast<float>(b) / 255.0f; }

inline std::string zpad(int64_t v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

inline void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IntegrityError("cannot write " + path.string());
    out << text;
}

inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("missing file: " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// --------------------------------------------------------------- samples ---

inline void save_frame_png(const fs::path& path, const TensorF& video, int frame) {
    const int H = video.dim(2), W = video.dim(3);
    std::vector<uint8_t> px(static_cast<size_t>(H) * W * 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                px[(static_cast<size_t>(y) * W + x) * 3 + c] = quantize8(video.at4(frame, c, y, x));
    write_png(path.string(), W, H, 3, px.data());
}

inline ordered_json meta_to_json(const SceneMeta& m) {
    ordered_json j;
    j["seed"] = m.seed;
    j["k"] = m.k;
    j["trajectory"] = to_string(m.trajectory);
    j["h"] = m.h;
    j["w"] = m.w;
    j["t"] = m.t;
    j["background"] = {{"gray_a", m.bg.gray_a}, {"gray_b", m.bg.gray_b}, {"cell", m.bg.cell},
                       {"phase_x", m.bg.phase_x}, {"phase_y", m.bg.phase_y}};
    j["depth_order"] = "ascending entity index, back to front";
    j["entities"] = ordered_json::array();
    for (const auto& e : m.entities) {
        ordered_json je;
        je["shape"] = to_string(e.shape_kind);
        je["color"] = {e.color[0], e.color[1], e.color[2]};
        je["radius_px"] = e.radius_px;
        je["texture_seed"] = e.texture_seed;
        j["entities"].push_back(je);
    }
    return j;
}

inline SceneMeta meta_from_json(const ordered_json& j) {
    SceneMeta m;
    m.seed = j.at("seed").get<uint64_t>();
    m.k = j.at("k").get<int>();
    m.trajectory = trajectory_from_string(j.at("trajectory").get<std::string>());
    m.h = j.at("h").get<int>();
    m.w = j.at("w").get<int>();
    m.t = j.at("t").get<int>();
    const auto& bg = j.at("background");
    m.bg.gray_a = bg.at("gray_a").get<double>();
    m.bg.gray_b = bg.at("gray_b").get<double>();
    m.bg.cell = bg.at("cell").get<int>();
    m.bg.phase_x = bg.at("phase_x").get<int>();
    m.bg.phase_y = bg.at("phase_y").get<int>();
    for (const auto& je : j.at("entities")) {
        EntitySpec e;
        e.shape_kind = shape_from_string(je.at("shape").get<std::string>());
        auto col = je.at("color");
        for (int c = 0; c < 3; ++c) e.color[static_cast<size_t>(c)] = col.at(static_cast<size_t>(c)).get<double>();
        e.radius_px = je.at("radius_px").get<int>();
        e.texture_seed = je.at("texture_seed").get<uint64_t>();
        m.entities.push_back(e);
    }
    check(static_cast<int>(m.entities.size()) == m.k, "meta.json: entity list does not match k");
    return m;
}

inline void save_sample(const SceneSample& s, const fs::path& dir) {
    fs::create_directories(dir);
    save_frame_png(dir / "ref.png", s.reference_image, 0);
    const int T = s.meta.t, H = s.meta.h, W = s.meta.w;
    for (int f = 0; f < T; ++f) {
        save_frame_png(dir / ("pose_" + zpad(f, 3) + ".png"), s.pose_video, f);
        save_frame_png(dir / ("frame_" + zpad(f, 3) + ".png"), s.target_video, f);
    }
    for (int i = 0; i < s.entity_count; ++i)
        for (int f = 0; f < T; ++f) {
            std::vector<uint8_t> px(static_cast<size_t>(H) * W);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    px[static_cast<size_t>(y) * W + x] =
                        s.masks[static_cast<size_t>(i)].at4(f, 0, y, x) > 0.5f ? 255 : 0;
            write_png((dir / ("mask_" + zpad(i, 2) + "_" + zpad(f, 3) + ".png")).string(), W, H, 1, px.data());
        }
    write_text_file(dir / "meta.json", meta_to_json(s.meta).dump(2) + "\n");
}

inline TensorF load_frames(const fs::path& dir, const std::string& stem, int t, int h, int w) {
    TensorF out({t, 3, h, w});
    for (int f = 0; f < t; ++f) {
        fs::path p = dir / (stem + "_" + zpad(f, 3) + ".png");
        PngImage img = read_png(p.string());
        check(img.width == w && img.height == h && img.channels == 3,
              "sample image shape disagrees with meta.json: " + p.string());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    out.at4(f, c, y, x) = dequantize8(img.pixels[(static_cast<size_t>(y) * w + x) * 3 + c]);
    }
    return out;
}

// Lossless reconstruction of a saved sample; masks bit-exact, images exact at
// 8-bit quantization.
inline SceneSample load_sample(const fs::path& dir) {
    SceneSample s;
    s.meta = meta_from_json(ordered_json::parse(read_text_file(dir / "meta.json")));
    const int T = s.meta.t, H = s.meta.h, W = s.meta.w;
    s.entity_count = s.meta.k;

    PngImage ref = read_png((dir / "ref.png").string());
    check(ref.width == W && ref.height == H && ref.channels == 3, "ref.png shape disagrees with meta.json");
    s.reference_image = TensorF({1, 3, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                s.reference_image.at4(0, c, y, x) = dequantize8(ref.pixels[(static_cast<size_t>(y) * W + x) * 3 + c]);

    s.pose_video = load_frames(dir, "pose", T, H, W);
    s.target_video = load_frames(dir, "frame", T, H, W);

    int mask_streams = 0;
    while (fs::exists(dir / ("mask_" + zpad(mask_streams, 2) + "_" + zpad(0, 3) + ".png"))) ++mask_streams;
    check(mask_streams == s.meta.k, "sample has " + std::to_string(mask_streams) + " mask streams but meta.json says k=" +
                                        std::to_string(s.meta.k));
    for (int i = 0; i < s.meta.k; ++i) {
        TensorF m({T, 1, H, W});
        for (int f = 0; f < T; ++f) {
            fs::path p = dir / ("mask_" + zpad(i, 2) + "_" + zpad(f, 3) + ".png");
            PngImage img = read_png(p.string());
            check(img.width == W && img.height == H && img.channels == 1,
                  "mask shape disagrees with meta.json: " + p.string());
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    uint8_t b = img.pixels[static_cast<size_t>(y) * W + x];
                    check(b == 0 || b == 255, "non-binary mask pixel (" + std::to_string(static_cast<int>(b)) +
                                                  ") in " + p.string());
                    m.at4(f, 0, y, x) = (b == 255) ? 1.0f : 0.0f;
                }
        }
        s.masks.push_back(std::move(m));
    }
    return s;
}

// ------------------------------------------------------ label map as PNG ---

// 8-bit indexed PNG whose pixel values are the label ids (palette entry c
// encodes id c as a gray level); lossless round trip for n <= 255.
inline void save_label_map_png(const LabelMap& lm, int frame, int n, const fs::path& path) {
    check(n <= 255, "label map PNG supports n <= 255");
    std::vector<uint8_t> palette;
    for (int c = 0; c <= n; ++c) {
        uint8_t g = static_cast<uint8_t>(c);
        palette.push_back(g);
        palette.push_back(g);
        palette.push_back(g);
    }
    std::vector<uint8_t> px(static_cast<size_t>(lm.h) * lm.w);
    for (int y = 0; y < lm.h; ++y)
        for (int x = 0; x < lm.w; ++x) {
            int v = lm.at(frame, y, x);
            check(v >= 0 && v <= n, "label map value out of palette range");
            px[static_cast<size_t>(y) * lm.w + x] = static_cast<uint8_t>(v);
        }
    write_png(path.string(), lm.w, lm.h, 1, px.data(), palette);
}

inline LabelMap load_label_map_png(const fs::path& path) {
    PngImage img = read_png(path.string(), /*keep_palette_indices=*/true);
    check(img.channels == 1, "label map PNG must be single-channel indexed");
    LabelMap lm;
    lm.t = 1;
    lm.h = img.height;
    lm.w = img.width;
    lm.data.resize(static_cast<size_t>(lm.h) * lm.w);
    for (size_t i = 0; i < lm.data.size(); ++i) lm.data[i] = img.pixels[i];
    return lm;
}

// -------------------------------------------------------------- datasets ---

struct DatasetConfig {
    int h = 32, w = 32, t = 8;
    int k_min = 2, k_max = 2;
    std::map<std::string, double> mix = {{"circular_swap", 0.35}, {"orbit", 0.35}, {"linear", 0.2},
                                         {"random_walk", 0.1}};
    uint64_t seed = 0;
    int count = 0;
    bool background_variant = false;
};

struct ManifestEntry {
    int64_t id = 0;
    std::string dir;
    int k = 0;
    std::string trajectory;
    uint64_t seed = 0;
};

struct Manifest {
    DatasetConfig config;
    std::vector<ManifestEntry> entries;
};

inline ordered_json dataset_config_to_json(const DatasetConfig& c) {
    ordered_json j;
    j["h"] = c.h;
    j["w"] = c.w;
    j["t"] = c.t;
    j["k_min"] = c.k_min;
    j["k_max"] = c.k_max;
    ordered_json mix;
    for (const auto& [k, v] : c.mix) mix[k] = v;
    j["mix"] = mix;
    j["seed"] = c.seed;
    j["count"] = c.count;
    j["background_variant"] = c.background_variant;
    return j;
}

inline DatasetConfig dataset_config_from_json(const ordered_json& j) {
    DatasetConfig c;
    c.h = j.at("h").get<int>();
    c.w = j.at("w").get<int>();
    c.t = j.at("t").get<int>();
    c.k_min = j.at("k_min").get<int>();
    c.k_max = j.at("k_max").get<int>();
    c.mix.clear();
    for (auto it = j.at("mix").begin(); it != j.at("mix").end(); ++it) c.mix[it.key()] = it.value().get<double>();
    c.seed = j.at("seed").get<uint64_t>();
    c.count = j.at("count").get<int>();
    c.background_variant = j.at("background_variant").get<bool>();
    return c;
}

// One scene drawn from the dataset distribution; pure function of (config, index).
inline SceneSample dataset_scene(const DatasetConfig& cfg, int64_t index) {
    Rng pick(cfg.seed, "dataset.pick", static_cast<uint64_t>(index));
    double total = 0;
    for (const auto& [k, v] : cfg.mix) total += v;
    check(total > 0, "dataset: empty trajectory mix");
    double u = pick.uniform() * total;
    std::string kind_name;
    for (const auto& [k, v] : cfg.mix) {
        if (u < v) { kind_name = k; break; }
        u -= v;
    }
    if (kind_name.empty()) kind_name = cfg.mix.rbegin()->first;
    TrajectoryKind kind = trajectory_from_string(kind_name);
    int k = cfg.k_min + static_cast<int>(pick.uniform_int(cfg.k_max - cfg.k_min + 1));
    if (kind == TrajectoryKind::circular_swap) k = 2;
    if (kind == TrajectoryKind::orbit && k == 1 && cfg.k_max >= 2) k = 2;
    uint64_t scene_seed = derive_seed(cfg.seed, "dataset.sample", static_cast<uint64_t>(index));
    SceneOptions opts;
    opts.background_variant = cfg.background_variant;
    return generate_scene(cfg.h, cfg.w, cfg.t, k, kind, scene_seed, opts);
}

inline Manifest generate_dataset(const DatasetConfig& cfg, const fs::path& out_dir, bool overwrite = false) {
    check(cfg.count >= 1, "generate_dataset: count must be >= 1");
    fs::path manifest_path = out_dir / "manifest.json";
    if (fs::exists(manifest_path) && !overwrite)
        throw ValidationError("manifest already exists (pass overwrite to replace): " + manifest_path.string());
    fs::create_directories(out_dir);

    Manifest man;
    man.config = cfg;
    for (int64_t i = 0; i < cfg.count; ++i) {
        SceneSample s = dataset_scene(cfg, i);
        std::string dir_name = "sample_" + zpad(i, 6);
        save_sample(s, out_dir / dir_name);
        ManifestEntry e;
        e.id = i;
        e.dir = dir_name;
        e.k = s.entity_count;
        e.trajectory = to_string(s.meta.trajectory);
        e.seed = s.meta.seed;
        man.entries.push_back(std::move(e));
    }

    ordered_json j;
    j["config"] = dataset_config_to_json(cfg);
    j["samples"] = ordered_json::array();
    for (const auto& e : man.entries) {
        ordered_json je;
        je["id"] = e.id;
        je["dir"] = e.dir;
        je["k"] = e.k;
        je["trajectory"] = e.trajectory;
        je["seed"] = e.seed;
        j["samples"].push_back(je);
    }
    write_text_file(manifest_path, j.dump(2) + "\n");
    return man;
}

inline Manifest load_manifest(const fs::path& manifest_path) {
    ordered_json j = ordered_json::parse(read_text_file(manifest_path));
    Manifest man;
    man.config = dataset_config_from_json(j.at("config"));
    for (const auto& je : j.at("samples")) {
        ManifestEntry e;
        e.id = je.at("id").get<int64_t>();
        e.dir = je.at("dir").get<std::string>();
        e.k = je.at("k").get<int>();
        e.trajectory = je.at("trajectory").get<std::string>();
        e.seed = je.at("seed").get<uint64_t>();
        man.entries.push_back(std::move(e));
    }
    return man;
}

inline std::vector<SceneSample> load_dataset(const fs::path& manifest_path) {
    Manifest man = load_manifest(manifest_path);
    std::vector<SceneSample> scenes;
    scenes.reserve(man.entries.size());
    fs::path base = manifest_path.parent_path();
    for (const auto& e : man.entries) scenes.push_back(load_sample(base / e.dir));
    return scenes;
}

}  // namespace maskflow
