#pragma once

#include <string>
#include <vector>

#include "maskflow/rng.hpp"
#include "maskflow/tensor.hpp"

namespace maskflow {

// Flat registry of named parameter tensors. Registration order is the
// canonical serialization order; gradients live in a parallel GradStore so
// that forward/backward can run on many samples concurrently against one
// read-only store.
template <typename S>
struct ParamStore {
    std::vector<std::string> names;
    std::vector<Tensor<S>> tensors;

    int add(const std::string& name, Tensor<S> t) {
        names.push_back(name);
        tensors.push_back(std::move(t));
        return static_cast<int>(tensors.size()) - 1;
    }

    int find(const std::string& name) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }

    Tensor<S>& operator[](int id) { return tensors[static_cast<size_t>(id)]; }
    const Tensor<S>& operator[](int id) const { return tensors[static_cast<size_t>(id)]; }
    size_t size() const { return tensors.size(); }

    int64_t total_scalars() const {
        int64_t n = 0;
        for (const auto& t : tensors) n += t.numel();
        return n;
    }
};

template <typename S>
struct GradStore {
    std::vector<Tensor<S>> tensors;

    explicit GradStore(const ParamStore<S>& p) {
        tensors.reserve(p.size());
        for (const auto& t : p.tensors) {
            Tensor<S> g(t.shape);
            tensors.push_back(std::move(g));
        }
    }

    void zero() {
        for (auto& t : tensors) t.zero();
    }

    void add(const GradStore& o) {
        for (size_t i = 0; i < tensors.size(); ++i) tensors[i] += o.tensors[i];
    }

    void scale(S a) {
        for (auto& t : tensors) t *= a;
    }

    Tensor<S>& operator[](int id) { return tensors[static_cast<size_t>(id)]; }
    const Tensor<S>& operator[](int id) const { return tensors[static_cast<size_t>(id)]; }
};

template <typename S>
void init_normal(Tensor<S>& t, Rng& rng, double std_dev) {
    for (auto& x : t.v) x = static_cast<S>(rng.normal() * std_dev);
}

}  // namespace maskflow
