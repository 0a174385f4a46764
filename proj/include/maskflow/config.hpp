#pragma once

#include <map>
#include <sstream>
#include <string>

#include "maskflow/dataset_io.hpp"
#include "maskflow/pipeline.hpp"

namespace maskflow {

// Human-readable run configuration: `dotted.key = value` lines, '#' comments.
// Flag overrides use the same syntax.
struct KeyValueConfig {
    std::map<std::string, std::string> values;

    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    static KeyValueConfig parse(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            check(eq != std::string::npos, "config line " + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            check(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
            cfg.values[key] = value;
        }
        return cfg;
    }

    static KeyValueConfig parse_file(const fs::path& path) { return parse(read_text_file(path)); }

    void set(const std::string& key, const std::string& value) { values[key] = value; }

    void apply_override(const std::string& kv) {
        auto eq = kv.find('=');
        check(eq != std::string::npos, "override must be key=value: " + kv);
        values[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
    }

    bool has(const std::string& key) const { return values.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& dflt) const {
        auto it = values.find(key);
        return it == values.end() ? dflt : it->second;
    }
    int get_int(const std::string& key, int dflt) const {
        auto it = values.find(key);
        if (it == values.end()) return dflt;
        try {
            return std::stoi(it->second);
        } catch (...) {
            throw ValidationError("config key " + key + ": expected integer, got '" + it->second + "'");
        }
    }
    int64_t get_i64(const std::string& key, int64_t dflt) const {
        auto it = values.find(key);
        if (it == values.end()) return dflt;
        try {
            return std::stoll(it->second);
        } catch (...) {
            throw ValidationError("config key " + key + ": expected integer, got '" + it->second + "'");
        }
    }
    uint64_t get_u64(const std::string& key, uint64_t dflt) const {
        auto it = values.find(key);
        if (it == values.end()) return dflt;
        try {
            return std::stoull(it->second);
        } catch (...) {
            throw ValidationError("config key " + key + ": expected unsigned integer, got '" + it->second + "'");
        }
    }
    double get_double(const std::string& key, double dflt) const {
        auto it = values.find(key);
        if (it == values.end()) return dflt;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw ValidationError("config key " + key + ": expected number, got '" + it->second + "'");
        }
    }
    bool get_bool(const std::string& key, bool dflt) const {
        auto it = values.find(key);
        if (it == values.end()) return dflt;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ValidationError("config key " + key + ": expected true/false, got '" + it->second + "'");
    }

    // "circular_swap:0.35,orbit:0.35,linear:0.2,random_walk:0.1"
    std::map<std::string, double> get_mix(const std::string& key, std::map<std::string, double> dflt) const {
        auto it = values.find(key);
        if (it == values.end()) return dflt;
        std::map<std::string, double> mix;
        std::istringstream in(it->second);
        std::string item;
        while (std::getline(in, item, ',')) {
            auto colon = item.find(':');
            check(colon != std::string::npos, "config key " + key + ": expected kind:weight, got '" + item + "'");
            mix[trim(item.substr(0, colon))] = std::stod(trim(item.substr(colon + 1)));
        }
        return mix;
    }
};

inline ModelConfig model_config_from(const KeyValueConfig& c) {
    ModelConfig m;
    m.h = c.get_int("geometry.h", 32);
    m.w = c.get_int("geometry.w", 32);
    m.t = c.get_int("geometry.t", 8);
    m.bank_capacity = c.get_int("bank.capacity", 7);
    m.d_model = c.get_int("model.d_model", 96);
    m.n_layers = c.get_int("model.layers", 4);
    m.n_heads = c.get_int("model.heads", 4);
    m.mlp_ratio = c.get_double("model.mlp_ratio", 4.0);
    m.conv_hidden = c.get_int("model.conv_hidden", 32);
    m.patch = c.get_int("model.patch", 4);
    m.mode = mode_from_string(c.get_string("train.mode", "mask_driven"));
    return m;
}

inline DatasetConfig dataset_config_from(const KeyValueConfig& c, uint64_t global_seed) {
    DatasetConfig d;
    d.h = c.get_int("geometry.h", 32);
    d.w = c.get_int("geometry.w", 32);
    d.t = c.get_int("geometry.t", 8);
    d.k_min = c.get_int("data.k_min", 2);
    d.k_max = c.get_int("data.k_max", 2);
    d.mix = c.get_mix("data.mix", d.mix);
    d.count = c.get_int("data.count", 512);
    d.seed = c.get_u64("data.seed", global_seed);
    d.background_variant = c.get_bool("data.background_variant", false);
    return d;
}

}  // namespace maskflow
