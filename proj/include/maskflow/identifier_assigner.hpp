#pragma once

#include <vector>

#include "maskflow/rng.hpp"
#include "maskflow/sprite_world.hpp"
#include "maskflow/tensor.hpp"

namespace maskflow {

// Identity labels are 1..n; 0 is reserved for background and never assigned.
struct IdentityLabelBank {
    int n = 7;
};

// Injective map entity index (0-based) -> label in 1..n, constant over a clip.
struct IdentityAssignment {
    std::vector<int> labels;

    int entity_count() const { return static_cast<int>(labels.size()); }
    int label_of(int entity) const { return labels[static_cast<size_t>(entity)]; }
};

// Uniformly random injective k-tuple of distinct labels from {1..n}.
inline IdentityAssignment sample_assignment(int k, const IdentityLabelBank& bank, uint64_t rng_seed) {
    if (k > bank.n)
        throw CapacityError("sample_assignment: " + std::to_string(k) + " entities exceed bank capacity n=" +
                            std::to_string(bank.n));
    check(k >= 1, "sample_assignment: need at least one entity");
    Rng rng(rng_seed, "assigner.sample");
    std::vector<int> pool(static_cast<size_t>(bank.n));
    for (int i = 0; i < bank.n; ++i) pool[static_cast<size_t>(i)] = i + 1;
    IdentityAssignment a;
    a.labels.resize(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.uniform_int(bank.n - i));
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        a.labels[static_cast<size_t>(i)] = pool[static_cast<size_t>(i)];
    }
    return a;
}

inline IdentityAssignment fixed_assignment(int k) {
    IdentityAssignment a;
    a.labels.resize(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) a.labels[static_cast<size_t>(i)] = i + 1;
    return a;
}

// Per-pixel integer identity map, (T, H, W) stored as Tensor<int32_t>-like.
struct LabelMap {
    int t = 0, h = 0, w = 0;
    std::vector<int> data;

    int& at(int f, int y, int x) { return data[(static_cast<size_t>(f) * h + y) * w + x]; }
    int at(int f, int y, int x) const { return data[(static_cast<size_t>(f) * h + y) * w + x]; }
};

// Unify per-entity masks into one label map. Where masks overlap the
// front-most entity wins (highest index; matches target rendering depth).
inline LabelMap assign_labels(const std::vector<TensorF>& masks, const IdentityAssignment& assignment) {
    check(!masks.empty(), "assign_labels: empty mask set");
    check(static_cast<int>(masks.size()) == assignment.entity_count(),
          "assign_labels: mask count does not match assignment domain");
    const int t = masks[0].dim(0), h = masks[0].dim(2), w = masks[0].dim(3);
    for (const auto& m : masks) {
        check(m.dim(0) == t && m.dim(2) == h && m.dim(3) == w && m.dim(1) == 1,
              "assign_labels: inconsistent mask shapes");
        for (float v : m.v)
            check(v == 0.0f || v == 1.0f, "assign_labels: masks must be binary");
    }
    LabelMap lm;
    lm.t = t;
    lm.h = h;
    lm.w = w;
    lm.data.assign(static_cast<size_t>(t) * h * w, 0);
    for (int i = 0; i < static_cast<int>(masks.size()); ++i) {
        int label = assignment.label_of(i);
        const TensorF& m = masks[static_cast<size_t>(i)];
        for (int f = 0; f < t; ++f)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (m.at4(f, 0, y, x) > 0.5f) lm.at(f, y, x) = label;
    }
    return lm;
}

// (T, n+1, H, W) binary expansion; channel 0 is background. The full
// (n+1)-channel layout is emitted even when only k+1 channels are active:
// inactive channels are identically zero, which is what makes label
// activation a mathematical identity rather than an indexing scheme.
template <typename S = float>
Tensor<S> one_hot(const LabelMap& labels, int n) {
    Tensor<S> out({labels.t, n + 1, labels.h, labels.w});
    for (int f = 0; f < labels.t; ++f)
        for (int y = 0; y < labels.h; ++y)
            for (int x = 0; x < labels.w; ++x) {
                int v = labels.at(f, y, x);
                if (v > n)
                    throw CapacityError("one_hot: label " + std::to_string(v) + " exceeds bank capacity n=" +
                                        std::to_string(n));
                check(v >= 0, "one_hot: negative label");
                out.at4(f, v, y, x) = S(1);
            }
    return out;
}

template <typename S>
LabelMap one_hot_argmax(const Tensor<S>& onehot) {
    LabelMap lm;
    lm.t = onehot.dim(0);
    lm.h = onehot.dim(2);
    lm.w = onehot.dim(3);
    lm.data.assign(static_cast<size_t>(lm.t) * lm.h * lm.w, 0);
    const int C = onehot.dim(1);
    for (int f = 0; f < lm.t; ++f)
        for (int y = 0; y < lm.h; ++y)
            for (int x = 0; x < lm.w; ++x) {
                int best = 0;
                S best_v = onehot.at4(f, 0, y, x);
                for (int c = 1; c < C; ++c)
                    if (onehot.at4(f, c, y, x) > best_v) {
                        best_v = onehot.at4(f, c, y, x);
                        best = c;
                    }
                lm.at(f, y, x) = best;
            }
    return lm;
}

// Permutation of {1..n} that fixes 0; used by the symmetry machinery.
struct LabelPermutation {
    std::vector<int> map;  // map[i] for i in 0..n, map[0] == 0

    explicit LabelPermutation(int n) : map(static_cast<size_t>(n) + 1) {
        for (int i = 0; i <= n; ++i) map[static_cast<size_t>(i)] = i;
    }

    int n() const { return static_cast<int>(map.size()) - 1; }
    int operator()(int label) const { return map[static_cast<size_t>(label)]; }

    void validate() const {
        check(map[0] == 0, "label permutation must fix the background label 0");
        std::vector<bool> seen(map.size(), false);
        for (int v : map) {
            check(v >= 0 && v < static_cast<int>(map.size()), "label permutation value out of range");
            check(!seen[static_cast<size_t>(v)], "label permutation is not a bijection");
            seen[static_cast<size_t>(v)] = true;
        }
    }

    static LabelPermutation random(int n, uint64_t seed) {
        LabelPermutation p(n);
        Rng rng(seed, "assigner.permutation");
        for (int i = 1; i < n; ++i) {
            int j = i + static_cast<int>(rng.uniform_int(n - i + 1));
            std::swap(p.map[static_cast<size_t>(i)], p.map[static_cast<size_t>(j)]);
        }
        return p;
    }
};

inline IdentityAssignment apply_permutation(const LabelPermutation& pi, const IdentityAssignment& a) {
    IdentityAssignment out = a;
    for (auto& l : out.labels) l = pi(l);
    return out;
}

template <typename S>
Tensor<S> permute_channels(const Tensor<S>& onehot, const LabelPermutation& pi) {
    pi.validate();
    check(onehot.dim(1) == pi.n() + 1, "permute_channels: channel count mismatch");
    Tensor<S> out(onehot.shape);
    const int T = onehot.dim(0), C = onehot.dim(1), H = onehot.dim(2), W = onehot.dim(3);
    for (int c = 0; c < C; ++c) {
        int dst = (c == 0) ? 0 : pi(c);
        for (int f = 0; f < T; ++f)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) out.at4(f, dst, y, x) = onehot.at4(f, c, y, x);
    }
    return out;
}

}  // namespace maskflow
