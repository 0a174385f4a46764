#pragma once

#include <optional>
#include <vector>

#include "maskflow/sprite_world.hpp"

namespace maskflow {

struct FrameMetrics {
    double psnr_db = 0;
    double ssim = 0;
    double l1_e3 = 0;
};

inline constexpr double kPsnrCapDb = 99.0;  // sentinel for exact matches

namespace detail {

inline std::vector<double> gaussian_window7() {
    // 7x7 window, sigma 1.5, normalized
    std::vector<double> w(49);
    double sum = 0;
    for (int y = -3; y <= 3; ++y)
        for (int x = -3; x <= 3; ++x) {
            double v = std::exp(-(x * x + y * y) / (2.0 * 1.5 * 1.5));
            w[static_cast<size_t>((y + 3) * 7 + (x + 3))] = v;
            sum += v;
        }
    for (auto& v : w) v /= sum;
    return w;
}

}  // namespace detail

// Structural similarity with a 7x7 Gaussian window (sigma 1.5), standard
// constants k1=0.01, k2=0.03 at L=1, evaluated on the valid interior and
// averaged over channels and frames.
inline double ssim(const TensorF& a, const TensorF& b) {
    check(a.same_shape(b), "ssim: shape mismatch");
    const int T = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
    check(H >= 7 && W >= 7, "ssim: frames smaller than the window");
    static const std::vector<double> win = detail::gaussian_window7();
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    double total = 0;
    int64_t count = 0;
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            for (int y = 3; y < H - 3; ++y)
                for (int x = 3; x < W - 3; ++x) {
                    double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                    int wi = 0;
                    for (int dy = -3; dy <= 3; ++dy)
                        for (int dx = -3; dx <= 3; ++dx, ++wi) {
                            double wv = win[static_cast<size_t>(wi)];
                            double xv = a.at4(t, c, y + dy, x + dx);
                            double yv = b.at4(t, c, y + dy, x + dx);
                            mx += wv * xv;
                            my += wv * yv;
                            mxx += wv * xv * xv;
                            myy += wv * yv * yv;
                            mxy += wv * xv * yv;
                        }
                    double vx = mxx - mx * mx;
                    double vy = myy - my * my;
                    double cxy = mxy - mx * my;
                    double s = ((2 * mx * my + C1) * (2 * cxy + C2)) /
                               ((mx * mx + my * my + C1) * (vx + vy + C2));
                    total += s;
                    ++count;
                }
    return total / static_cast<double>(count);
}

// PSNR = 10 log10(1 / MSE) per frame (capped at the 99 dB sentinel), averaged
// over frames; L1 is the mean absolute error on the paper-style 1e-3 scale.
inline FrameMetrics frame_metrics(const TensorF& generated, const TensorF& target) {
    check(generated.same_shape(target), "frame_metrics: shape mismatch");
    const int T = generated.dim(0), C = generated.dim(1), H = generated.dim(2), W = generated.dim(3);
    const int64_t per_frame = static_cast<int64_t>(C) * H * W;
    FrameMetrics m;
    double l1 = 0;
    for (int t = 0; t < T; ++t) {
        double mse = 0;
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double d = static_cast<double>(generated.at4(t, c, y, x)) - target.at4(t, c, y, x);
                    mse += d * d;
                    l1 += std::abs(d);
                }
        mse /= static_cast<double>(per_frame);
        double psnr = (mse <= 0) ? kPsnrCapDb : std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
        m.psnr_db += psnr;
    }
    m.psnr_db /= T;
    m.ssim = ssim(generated, target);
    m.l1_e3 = l1 / static_cast<double>(per_frame * T) * 1000.0;
    return m;
}

struct IdentityAccuracy {
    std::optional<double> accuracy;          // absent when no visible regions exist
    std::vector<double> per_entity;          // hit fraction per entity (NaN-free: -1 when uncounted)
    int64_t counted = 0;
};

// For each (entity, frame) with a nonempty visible (depth-resolved) region,
// the mean generated color inside that region must be nearest (L2) to the
// entity's own reference color. Ties go to the lowest entity index.
inline IdentityAccuracy identity_accuracy(const TensorF& generated, const std::vector<TensorF>& masks,
                                          const std::vector<EntitySpec>& specs) {
    check(!masks.empty() && masks.size() == specs.size(), "identity_accuracy: masks/specs mismatch");
    const int T = generated.dim(0), H = generated.dim(2), W = generated.dim(3);
    const int k = static_cast<int>(masks.size());
    IdentityAccuracy out;
    std::vector<int64_t> hits(static_cast<size_t>(k), 0), counts(static_cast<size_t>(k), 0);
    for (int i = 0; i < k; ++i) {
        for (int f = 0; f < T; ++f) {
            double sum[3] = {0, 0, 0};
            int64_t area = 0;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    if (masks[static_cast<size_t>(i)].at4(f, 0, y, x) < 0.5f) continue;
                    bool occluded = false;
                    for (int j = i + 1; j < k; ++j)
                        if (masks[static_cast<size_t>(j)].at4(f, 0, y, x) > 0.5f) { occluded = true; break; }
                    if (occluded) continue;
                    for (int c = 0; c < 3; ++c) sum[c] += generated.at4(f, c, y, x);
                    ++area;
                }
            if (area == 0) continue;
            double mean[3];
            for (int c = 0; c < 3; ++c) mean[c] = sum[c] / static_cast<double>(area);
            int best = 0;
            double best_d = 1e300;
            for (int j = 0; j < k; ++j) {
                double d = 0;
                for (int c = 0; c < 3; ++c) {
                    double dd = mean[c] - specs[static_cast<size_t>(j)].color[static_cast<size_t>(c)];
                    d += dd * dd;
                }
                if (d < best_d) {  // strict: ties keep the lowest index
                    best_d = d;
                    best = j;
                }
            }
            ++counts[static_cast<size_t>(i)];
            if (best == i) ++hits[static_cast<size_t>(i)];
        }
    }
    int64_t total_hits = 0, total_counts = 0;
    out.per_entity.resize(static_cast<size_t>(k), -1.0);
    for (int i = 0; i < k; ++i) {
        total_hits += hits[static_cast<size_t>(i)];
        total_counts += counts[static_cast<size_t>(i)];
        if (counts[static_cast<size_t>(i)] > 0)
            out.per_entity[static_cast<size_t>(i)] =
                static_cast<double>(hits[static_cast<size_t>(i)]) / static_cast<double>(counts[static_cast<size_t>(i)]);
    }
    out.counted = total_counts;
    if (total_counts > 0) out.accuracy = static_cast<double>(total_hits) / static_cast<double>(total_counts);
    return out;
}

struct MetricsReport {
    double psnr_db = 0, psnr_std = 0;
    double ssim = 0, ssim_std = 0;
    double l1_e3 = 0, l1_std = 0;
    std::optional<double> identity_acc;
    double identity_std = 0;
    int samples = 0;
};

inline MetricsReport aggregate_metrics(const std::vector<FrameMetrics>& frames,
                                       const std::vector<std::optional<double>>& identities) {
    MetricsReport r;
    r.samples = static_cast<int>(frames.size());
    if (frames.empty()) return r;
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        sd = 0;
        for (double x : v) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(v.size()));
    };
    std::vector<double> p, s, l, id;
    for (const auto& f : frames) {
        p.push_back(f.psnr_db);
        s.push_back(f.ssim);
        l.push_back(f.l1_e3);
    }
    for (const auto& i : identities)
        if (i) id.push_back(*i);
    mean_std(p, r.psnr_db, r.psnr_std);
    mean_std(s, r.ssim, r.ssim_std);
    mean_std(l, r.l1_e3, r.l1_std);
    if (!id.empty()) {
        double m, sd;
        mean_std(id, m, sd);
        r.identity_acc = m;
        r.identity_std = sd;
    }
    return r;
}

}  // namespace maskflow
