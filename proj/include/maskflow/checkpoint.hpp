#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "maskflow/dataset_io.hpp"
#include "maskflow/pipeline.hpp"

namespace maskflow {

inline constexpr int kCheckpointVersion = 1;

inline ordered_json model_config_to_json(const ModelConfig& m) {
    ordered_json j;
    j["h"] = m.h;
    j["w"] = m.w;
    j["t"] = m.t;
    j["bank_capacity"] = m.bank_capacity;
    j["d_model"] = m.d_model;
    j["n_layers"] = m.n_layers;
    j["n_heads"] = m.n_heads;
    j["mlp_ratio"] = m.mlp_ratio;
    j["conv_hidden"] = m.conv_hidden;
    j["patch"] = m.patch;
    j["mode"] = to_string(m.mode);
    return j;
}

inline ModelConfig model_config_from_json(const ordered_json& j) {
    ModelConfig m;
    m.h = j.at("h").get<int>();
    m.w = j.at("w").get<int>();
    m.t = j.at("t").get<int>();
    m.bank_capacity = j.at("bank_capacity").get<int>();
    m.d_model = j.at("d_model").get<int>();
    m.n_layers = j.at("n_layers").get<int>();
    m.n_heads = j.at("n_heads").get<int>();
    m.mlp_ratio = j.at("mlp_ratio").get<double>();
    m.conv_hidden = j.at("conv_hidden").get<int>();
    m.patch = j.at("patch").get<int>();
    m.mode = mode_from_string(j.at("mode").get<std::string>());
    return m;
}

// Adam moment estimates; serialized alongside parameters so a resumed run
// reproduces the uninterrupted loss trajectory bitwise.
struct OptimizerState {
    std::vector<TensorF> m, v;

    void init_like(const ParamStore<float>& P) {
        m.clear();
        v.clear();
        for (const auto& t : P.tensors) {
            m.emplace_back(t.shape);
            v.emplace_back(t.shape);
        }
    }

    bool empty() const { return m.empty(); }
};

struct CheckpointState {
    ModelConfig model;
    ParamStore<float> params;  // tensor data filled on load (names/order from a fresh init)
    OptimizerState opt;
    int64_t step = 0;
    uint64_t global_seed = 0;
    ordered_json train_echo;  // run configuration echo, opaque here
};

namespace detail {

inline std::string group_of(const std::string& name) {
    auto dot = name.find('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

inline std::string hex64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

inline void save_checkpoint(const CheckpointState& st, const fs::path& dir) {
    fs::create_directories(dir);

    std::vector<std::pair<std::string, const TensorF*>> entries;
    for (size_t i = 0; i < st.params.size(); ++i)
        entries.emplace_back(st.params.names[i], &st.params.tensors[i]);
    if (!st.opt.empty()) {
        for (size_t i = 0; i < st.params.size(); ++i)
            entries.emplace_back("optimizer.m." + st.params.names[i], &st.opt.m[i]);
        for (size_t i = 0; i < st.params.size(); ++i)
            entries.emplace_back("optimizer.v." + st.params.names[i], &st.opt.v[i]);
    }

    std::string blob;
    ordered_json groups = ordered_json::object();
    for (const auto& [name, tensor] : entries) {
        ordered_json je;
        je["name"] = name;
        je["shape"] = tensor->shape;
        je["dtype"] = "f32";
        je["offset"] = blob.size();
        size_t nbytes = tensor->v.size() * sizeof(float);
        je["nbytes"] = nbytes;
        std::string g = detail::group_of(name);
        if (!groups.contains(g)) groups[g] = ordered_json::array();
        groups[g].push_back(je);
        size_t off = blob.size();
        blob.resize(off + nbytes);
        std::memcpy(blob.data() + off, tensor->v.data(), nbytes);
    }

    ordered_json index;
    index["format_version"] = kCheckpointVersion;
    index["step"] = st.step;
    index["global_seed"] = st.global_seed;
    index["model"] = model_config_to_json(st.model);
    if (!st.train_echo.is_null()) index["train"] = st.train_echo;
    index["data"] = {{"file", "data.bin"},
                     {"nbytes", blob.size()},
                     {"fnv1a64", detail::hex64(fnv1a64(blob.data(), blob.size()))}};
    index["groups"] = groups;

    std::ofstream bin(dir / "data.bin", std::ios::binary);
    if (!bin) throw IntegrityError("cannot write checkpoint blob: " + (dir / "data.bin").string());
    bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    bin.close();
    write_text_file(dir / "index.json", index.dump(2) + "\n");
}

inline CheckpointState load_checkpoint(const fs::path& dir) {
    ordered_json index = ordered_json::parse(read_text_file(dir / "index.json"));
    int version = index.at("format_version").get<int>();
    if (version != kCheckpointVersion)
        throw IntegrityError("checkpoint format version " + std::to_string(version) +
                             " is not supported (expected " + std::to_string(kCheckpointVersion) +
                             "); no migration path");

    CheckpointState st;
    st.step = index.at("step").get<int64_t>();
    st.global_seed = index.at("global_seed").get<uint64_t>();
    st.model = model_config_from_json(index.at("model"));
    if (index.contains("train")) st.train_echo = index.at("train");

    std::string blob = read_text_file(dir / "data.bin");
    const auto& data = index.at("data");
    if (blob.size() != data.at("nbytes").get<size_t>())
        throw IntegrityError("checkpoint blob is truncated or padded: expected " +
                             std::to_string(data.at("nbytes").get<size_t>()) + " bytes, found " +
                             std::to_string(blob.size()));
    if (detail::hex64(fnv1a64(blob.data(), blob.size())) != data.at("fnv1a64").get<std::string>())
        throw IntegrityError("checkpoint blob digest mismatch (corrupt data.bin)");

    // Rebuild the canonical parameter registry, then overwrite tensor data.
    VideoDenoiser<float> model;
    model.init(st.model, /*seed=*/0);
    st.params = std::move(model.params);
    st.opt.init_like(st.params);

    auto read_into = [&](const ordered_json& je, TensorF& t) {
        std::vector<int> shape = je.at("shape").get<std::vector<int>>();
        check(shape == t.shape, "checkpoint tensor shape mismatch for " + je.at("name").get<std::string>());
        size_t off = je.at("offset").get<size_t>();
        size_t nbytes = je.at("nbytes").get<size_t>();
        check(off + nbytes <= blob.size(), "checkpoint tensor out of blob bounds");
        check(nbytes == t.v.size() * sizeof(float), "checkpoint tensor byte size mismatch");
        std::memcpy(t.v.data(), blob.data() + off, nbytes);
    };

    bool has_opt = false;
    for (const auto& [gname, list] : index.at("groups").items()) {
        (void)gname;
        for (const auto& je : list) {
            std::string name = je.at("name").get<std::string>();
            if (name.rfind("optimizer.m.", 0) == 0) {
                int id = st.params.find(name.substr(12));
                check(id >= 0, "checkpoint optimizer tensor has no matching parameter: " + name);
                read_into(je, st.opt.m[static_cast<size_t>(id)]);
                has_opt = true;
            } else if (name.rfind("optimizer.v.", 0) == 0) {
                int id = st.params.find(name.substr(12));
                check(id >= 0, "checkpoint optimizer tensor has no matching parameter: " + name);
                read_into(je, st.opt.v[static_cast<size_t>(id)]);
                has_opt = true;
            } else {
                int id = st.params.find(name);
                check(id >= 0, "checkpoint tensor has no matching parameter: " + name);
                read_into(je, st.params[id]);
            }
        }
    }
    if (!has_opt) st.opt = OptimizerState{};
    return st;
}

// Builds a ready-to-run model from checkpoint state.
inline VideoDenoiser<float> model_from_checkpoint(const CheckpointState& st) {
    VideoDenoiser<float> model;
    model.init(st.model, /*seed=*/0);
    model.params = st.params;
    return model;
}

}  // namespace maskflow
