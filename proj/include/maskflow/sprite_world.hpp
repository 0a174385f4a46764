#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "maskflow/rng.hpp"
#include "maskflow/tensor.hpp"

namespace maskflow {

enum class ShapeKind { circle, square, triangle };
enum class TrajectoryKind { linear, circular_swap, orbit, random_walk };

inline const char* to_string(ShapeKind s) {
    switch (s) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        default: return "triangle";
    }
}
inline const char* to_string(TrajectoryKind t) {
    switch (t) {
        case TrajectoryKind::linear: return "linear";
        case TrajectoryKind::circular_swap: return "circular_swap";
        case TrajectoryKind::orbit: return "orbit";
        default: return "random_walk";
    }
}
inline TrajectoryKind trajectory_from_string(const std::string& s) {
    if (s == "linear") return TrajectoryKind::linear;
    if (s == "circular_swap") return TrajectoryKind::circular_swap;
    if (s == "orbit") return TrajectoryKind::orbit;
    if (s == "random_walk") return TrajectoryKind::random_walk;
    throw ValidationError("unknown trajectory kind: " + s);
}
inline ShapeKind shape_from_string(const std::string& s) {
    if (s == "circle") return ShapeKind::circle;
    if (s == "square") return ShapeKind::square;
    if (s == "triangle") return ShapeKind::triangle;
    throw ValidationError("unknown shape kind: " + s);
}

struct EntitySpec {
    ShapeKind shape_kind = ShapeKind::circle;
    std::array<double, 3> color = {1, 1, 1};
    int radius_px = 3;
    uint64_t texture_seed = 0;
};

struct Background {
    double gray_a = 0.10;
    double gray_b = 0.18;
    int cell = 4;
    int phase_x = 0;
    int phase_y = 0;

    double value(int x, int y) const {
        return (((x + phase_x) / cell + (y + phase_y) / cell) % 2 == 0) ? gray_b : gray_a;
    }
};

struct SceneMeta {
    uint64_t seed = 0;
    int k = 0;
    TrajectoryKind trajectory = TrajectoryKind::linear;
    int h = 0, w = 0, t = 0;
    Background bg;
    std::vector<EntitySpec> entities;
};

using Vec2 = std::array<double, 2>;  // (x, y), pixel centers at integer coords

// Ground-truth triplet: reference frame, identity-agnostic pose rendering,
// per-entity occupancy masks (amodal: full occupancy even when occluded) and
// the rendered target. Depth order is ascending entity index = back to front.
struct SceneSample {
    TensorF reference_image;           // (1, 3, H, W)
    TensorF pose_video;                // (T, 3, H, W)
    std::vector<TensorF> masks;        // k tensors of (T, 1, H, W), binary
    TensorF target_video;              // (T, 3, H, W)
    int entity_count = 0;
    SceneMeta meta;
    std::vector<std::vector<Vec2>> positions;  // [k][T] closed-form centers (not serialized)
};

// ------------------------------------------------------------- rasterizer ---

inline bool inside_shape(ShapeKind kind, double cx, double cy, int r, double px, double py) {
    double dx = px - cx, dy = py - cy;
    switch (kind) {
        case ShapeKind::circle:
            return dx * dx + dy * dy <= static_cast<double>(r) * r;
        case ShapeKind::square:
            return std::max(std::abs(dx), std::abs(dy)) <= static_cast<double>(r);
        case ShapeKind::triangle: {
            // point-up equilateral triangle with circumradius r
            std::array<Vec2, 3> v;
            for (int i = 0; i < 3; ++i) {
                double a = M_PI / 2 + 2.0 * M_PI * i / 3.0;
                v[static_cast<size_t>(i)] = {r * std::cos(a), -r * std::sin(a)};
            }
            auto cross = [](const Vec2& a, const Vec2& b, double qx, double qy) {
                return (b[0] - a[0]) * (qy - a[1]) - (b[1] - a[1]) * (qx - a[0]);
            };
            double c1 = cross(v[0], v[1], dx, dy);
            double c2 = cross(v[1], v[2], dx, dy);
            double c3 = cross(v[2], v[0], dx, dy);
            return (c1 <= 0 && c2 <= 0 && c3 <= 0) || (c1 >= 0 && c2 >= 0 && c3 >= 0);
        }
    }
    return false;
}

inline double texture_factor(uint64_t texture_seed, int dx, int dy) {
    uint64_t h = splitmix64(texture_seed ^ splitmix64(static_cast<uint64_t>(dx + 257) * 0x9E3779B97F4A7C15ULL +
                                                      static_cast<uint64_t>(dy + 257)));
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return 0.90 + 0.10 * u;
}

// Closed outline polyline for the pose glyph. Circles use a 16-gon.
inline std::vector<Vec2> outline_points(ShapeKind kind, double cx, double cy, int r) {
    std::vector<Vec2> pts;
    auto ring = [&](int n, double phase) {
        for (int i = 0; i < n; ++i) {
            double a = phase + 2.0 * M_PI * i / n;
            pts.push_back({cx + r * std::cos(a), cy - r * std::sin(a)});
        }
    };
    switch (kind) {
        case ShapeKind::circle: ring(16, 0.0); break;
        case ShapeKind::square: ring(4, M_PI / 4); break;
        case ShapeKind::triangle: ring(3, M_PI / 2); break;
    }
    return pts;
}

struct PoseGlyph {
    std::vector<Vec2> outline;  // closed polyline
    Vec2 centroid{0, 0};
};

using KeypointFrame = std::vector<PoseGlyph>;

// Ties-to-even rounding keeps glyphs mirror-symmetric about integer axes.
inline int raster_round(double x) { return static_cast<int>(std::nearbyint(x)); }

// White glyphs (outline + centroid cross) on black, identical style for every
// entity; channels duplicated to 3 so the pose stream matches video layout.
inline TensorF render_pose(const std::vector<KeypointFrame>& frames, int h, int w) {
    const int t = static_cast<int>(frames.size());
    TensorF out({t, 3, h, w});
    auto put = [&](int f, double x, double y) {
        int xi = raster_round(x), yi = raster_round(y);
        if (xi < 0 || yi < 0 || xi >= w || yi >= h) return;
        for (int c = 0; c < 3; ++c) out.at4(f, c, yi, xi) = 1.0f;
    };
    for (int f = 0; f < t; ++f) {
        for (const PoseGlyph& g : frames[static_cast<size_t>(f)]) {
            const auto& pts = g.outline;
            const size_t n = pts.size();
            for (size_t i = 0; i < n; ++i) {
                const Vec2& a = pts[i];
                const Vec2& b = pts[(i + 1) % n];
                double len = std::hypot(b[0] - a[0], b[1] - a[1]);
                int steps = std::max(1, static_cast<int>(std::ceil(len / 0.25)));
                for (int s = 0; s <= steps; ++s) {
                    double u = static_cast<double>(s) / steps;
                    put(f, a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]));
                }
            }
            for (int d = -2; d <= 2; ++d) {
                put(f, g.centroid[0] + d, g.centroid[1]);
                put(f, g.centroid[0], g.centroid[1] + d);
            }
        }
    }
    return out;
}

inline KeypointFrame glyphs_for(const std::vector<EntitySpec>& specs, const std::vector<Vec2>& centers) {
    KeypointFrame frame;
    for (size_t i = 0; i < specs.size(); ++i) {
        PoseGlyph g;
        g.outline = outline_points(specs[i].shape_kind, centers[i][0], centers[i][1], specs[i].radius_px);
        g.centroid = centers[i];
        frame.push_back(std::move(g));
    }
    return frame;
}

// ------------------------------------------------------------ trajectories ---

namespace detail {

// Counter-rotating antipodal pair whose chains cross q times (q odd). At each
// crossing the two entities either pass through or trade chains; the pose
// position sets are identical for every resolution, so identity-agnostic
// poses cannot reveal which entity went where. An even number of trades ends
// with exchanged positions, an odd number returns both entities home.
struct SwapPaths {
    std::vector<double> phi_a, phi_b;  // angle per frame
};

inline SwapPaths swap_paths(int t, double theta0, int dir, const std::vector<int>& switch_bits) {
    const int q = static_cast<int>(switch_bits.size());
    const double omega = dir * static_cast<double>(q) * M_PI / (t - 1);
    SwapPaths p;
    p.phi_a.resize(static_cast<size_t>(t));
    p.phi_b.resize(static_cast<size_t>(t));
    // crossing j sits between frames floor(f_j) and floor(f_j)+1, f_j = (2j+1)(t-1)/(2q)
    int chain = 0;
    int next_cross = 0;
    for (int f = 0; f < t; ++f) {
        while (next_cross < q &&
               f > (2.0 * next_cross + 1.0) * (t - 1) / (2.0 * q)) {
            if (switch_bits[static_cast<size_t>(next_cross)]) chain ^= 1;
            ++next_cross;
        }
        double c1 = theta0 + omega * f;
        double c2 = theta0 + M_PI - omega * f;
        p.phi_a[static_cast<size_t>(f)] = (chain == 0) ? c1 : c2;
        p.phi_b[static_cast<size_t>(f)] = (chain == 0) ? c2 : c1;
    }
    return p;
}

inline int swap_crossings(int t) {
    int q = t - 2;
    if (q % 2 == 0) --q;
    return std::max(1, q);
}

}  // namespace detail

// --------------------------------------------------------------- generator ---

struct SceneOptions {
    bool background_variant = false;  // jitter the checkerboard (stage-2 style data)
};

inline SceneSample generate_scene(int h, int w, int t, int k, TrajectoryKind kind, uint64_t seed,
                                  const SceneOptions& opts = {}) {
    check(h >= 16 && w >= 16, "generate_scene: frame must be at least 16x16");
    check(t >= 4, "generate_scene: need at least 4 frames");
    check(k >= 1 && k <= 7, "generate_scene: entity count must be in 1..7");
    if (kind == TrajectoryKind::circular_swap) check(k == 2, "circular_swap requires exactly 2 entities");

    Rng rng(seed, "sprite_world.scene");

    SceneMeta meta;
    meta.seed = seed;
    meta.k = k;
    meta.trajectory = kind;
    meta.h = h;
    meta.w = w;
    meta.t = t;
    if (opts.background_variant) {
        meta.bg.gray_a = 0.08 + 0.05 * rng.uniform();
        meta.bg.gray_b = meta.bg.gray_a + 0.06 + 0.04 * rng.uniform();
        meta.bg.phase_x = static_cast<int>(rng.uniform_int(meta.bg.cell));
        meta.bg.phase_y = static_cast<int>(rng.uniform_int(meta.bg.cell));
    }

    // colors: pairwise L2 distance >= 0.4 so identities stay distinguishable
    std::vector<std::array<double, 3>> colors;
    for (int i = 0; i < k; ++i) {
        for (int attempt = 0;; ++attempt) {
            check(attempt < 1000, "generate_scene: could not sample distinguishable colors");
            std::array<double, 3> c = {rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)};
            bool ok = true;
            for (const auto& prev : colors) {
                double d2 = 0;
                for (int j = 0; j < 3; ++j) d2 += (c[static_cast<size_t>(j)] - prev[static_cast<size_t>(j)]) *
                                                  (c[static_cast<size_t>(j)] - prev[static_cast<size_t>(j)]);
                if (d2 < 0.16) { ok = false; break; }
            }
            if (ok) { colors.push_back(c); break; }
        }
    }

    int r_lo = (k <= 2) ? 3 : (k <= 4 ? 3 : 2);
    int r_hi = (k <= 2) ? 5 : (k <= 4 ? 4 : 3);
    // small frames cannot host the default radii
    int r_cap = std::max(2, (std::min(h, w) - 16) / 3 + 2);
    r_lo = std::min(r_lo, r_cap);
    r_hi = std::min(r_hi, r_cap);
    std::vector<EntitySpec> specs(static_cast<size_t>(k));
    // All counter-rotating pairs are rendered as twins (same shape and radius)
    // so the glyph geometry carries no identity either.
    bool twins = (kind == TrajectoryKind::circular_swap) || (kind == TrajectoryKind::orbit && k == 2);
    int twin_radius = r_lo + static_cast<int>(rng.uniform_int(r_hi - r_lo + 1));
    ShapeKind twin_shape = static_cast<ShapeKind>(rng.uniform_int(3));
    for (int i = 0; i < k; ++i) {
        auto& s = specs[static_cast<size_t>(i)];
        s.shape_kind = twins ? twin_shape : static_cast<ShapeKind>(rng.uniform_int(3));
        s.radius_px = twins ? twin_radius : r_lo + static_cast<int>(rng.uniform_int(r_hi - r_lo + 1));
        s.color = colors[static_cast<size_t>(i)];
        s.texture_seed = rng.next_u64();
    }
    meta.entities = specs;

    // trajectories; every entity stays fully inside the frame on every frame
    std::vector<std::vector<Vec2>> pos(static_cast<size_t>(k), std::vector<Vec2>(static_cast<size_t>(t)));
    auto lo_bound = [&](int r) { return static_cast<double>(r + 1); };
    auto hi_bound = [&](int size, int r) { return static_cast<double>(size - 2 - r); };

    switch (kind) {
        case TrajectoryKind::circular_swap: {
            int r = specs[0].radius_px;
            double r_min = r + 2.0;
            double r_max = std::min(h, w) / 2.0 - r - 2.0;
            check(r_max >= r_min, "circular_swap: frame too small for the ring");
            double ring = rng.uniform(r_min, r_max);
            double cx0 = (w - 1) / 2.0, cy0 = (h - 1) / 2.0;
            double slack_x = std::min(cx0 - ring - r - 1.0, 2.0), slack_y = std::min(cy0 - ring - r - 1.0, 2.0);
            double cx = cx0 + rng.uniform(-std::max(0.0, slack_x), std::max(0.0, slack_x));
            double cy = cy0 + rng.uniform(-std::max(0.0, slack_y), std::max(0.0, slack_y));
            double theta0 = rng.uniform(0.0, 2.0 * M_PI);
            int dir = rng.bernoulli(0.5) ? 1 : -1;
            int q = detail::swap_crossings(t);
            std::vector<int> bits(static_cast<size_t>(q));
            int parity = 0;
            for (int j = 0; j + 1 < q; ++j) {
                bits[static_cast<size_t>(j)] = rng.bernoulli(0.5) ? 1 : 0;
                parity ^= bits[static_cast<size_t>(j)];
            }
            bits[static_cast<size_t>(q - 1)] = parity;  // even total: endpoints always exchange
            auto paths = detail::swap_paths(t, theta0, dir, bits);
            for (int f = 0; f < t; ++f) {
                pos[0][static_cast<size_t>(f)] = {cx + ring * std::cos(paths.phi_a[static_cast<size_t>(f)]),
                                                  cy - ring * std::sin(paths.phi_a[static_cast<size_t>(f)])};
                pos[1][static_cast<size_t>(f)] = {cx + ring * std::cos(paths.phi_b[static_cast<size_t>(f)]),
                                                  cy - ring * std::sin(paths.phi_b[static_cast<size_t>(f)])};
            }
            break;
        }
        case TrajectoryKind::orbit: {
            if (k == 2) {
                // Paired orbits share the swap geometry but draw every crossing
                // resolution freely, so half of them return home instead of
                // exchanging. Together with circular_swap this makes the
                // pose-to-outcome map genuinely two-valued at the crossings.
                int r = specs[0].radius_px;
                double r_min = r + 2.0;
                double r_max = std::min(h, w) / 2.0 - r - 2.0;
                check(r_max >= r_min, "orbit: frame too small for the ring");
                double ring = rng.uniform(r_min, r_max);
                double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
                double theta0 = rng.uniform(0.0, 2.0 * M_PI);
                int dir = rng.bernoulli(0.5) ? 1 : -1;
                int q = detail::swap_crossings(t);
                std::vector<int> bits(static_cast<size_t>(q));
                for (int j = 0; j < q; ++j) bits[static_cast<size_t>(j)] = rng.bernoulli(0.5) ? 1 : 0;
                auto paths = detail::swap_paths(t, theta0, dir, bits);
                for (int f = 0; f < t; ++f) {
                    pos[0][static_cast<size_t>(f)] = {cx + ring * std::cos(paths.phi_a[static_cast<size_t>(f)]),
                                                      cy - ring * std::sin(paths.phi_a[static_cast<size_t>(f)])};
                    pos[1][static_cast<size_t>(f)] = {cx + ring * std::cos(paths.phi_b[static_cast<size_t>(f)]),
                                                      cy - ring * std::sin(paths.phi_b[static_cast<size_t>(f)])};
                }
                break;
            }
            int r_big = 0;
            for (const auto& s : specs) r_big = std::max(r_big, s.radius_px);
            double need = (k > 1) ? (r_big + 1.0) / std::sin(M_PI / k) : r_big + 2.0;
            double r_min = std::max(static_cast<double>(r_big + 2), need);
            double r_max = std::min(h, w) / 2.0 - r_big - 2.0;
            check(r_max >= r_min, "orbit: frame too small for the ring");
            double ring = rng.uniform(r_min, r_max);
            double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
            double theta0 = rng.uniform(0.0, 2.0 * M_PI);
            double span = (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(M_PI / 2, 1.5 * M_PI);
            for (int i = 0; i < k; ++i)
                for (int f = 0; f < t; ++f) {
                    double a = theta0 + 2.0 * M_PI * i / k + span * f / (t - 1);
                    pos[static_cast<size_t>(i)][static_cast<size_t>(f)] = {cx + ring * std::cos(a),
                                                                           cy - ring * std::sin(a)};
                }
            break;
        }
        case TrajectoryKind::linear:
        case TrajectoryKind::random_walk: {
            for (int i = 0; i < k; ++i) {
                int r = specs[static_cast<size_t>(i)].radius_px;
                bool placed = false;
                for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                    Vec2 start = {rng.uniform(lo_bound(r), hi_bound(w, r)), rng.uniform(lo_bound(r), hi_bound(h, r))};
                    bool overlap = false;
                    for (int j = 0; j < i; ++j) {
                        double need = r + specs[static_cast<size_t>(j)].radius_px + 1.0;
                        double dx = start[0] - pos[static_cast<size_t>(j)][0][0];
                        double dy = start[1] - pos[static_cast<size_t>(j)][0][1];
                        if (dx * dx + dy * dy < need * need) { overlap = true; break; }
                    }
                    if (overlap) continue;
                    placed = true;
                    if (kind == TrajectoryKind::linear) {
                        Vec2 end = {rng.uniform(lo_bound(r), hi_bound(w, r)), rng.uniform(lo_bound(r), hi_bound(h, r))};
                        for (int f = 0; f < t; ++f) {
                            double u = static_cast<double>(f) / (t - 1);
                            pos[static_cast<size_t>(i)][static_cast<size_t>(f)] = {start[0] + u * (end[0] - start[0]),
                                                                                   start[1] + u * (end[1] - start[1])};
                        }
                    } else {
                        Vec2 p = start;
                        auto reflect = [](double x, double lo, double hi) {
                            while (x < lo || x > hi) {
                                if (x < lo) x = 2 * lo - x;
                                if (x > hi) x = 2 * hi - x;
                            }
                            return x;
                        };
                        for (int f = 0; f < t; ++f) {
                            pos[static_cast<size_t>(i)][static_cast<size_t>(f)] = p;
                            p[0] = reflect(p[0] + rng.normal() * 1.3, lo_bound(r), hi_bound(w, r));
                            p[1] = reflect(p[1] + rng.normal() * 1.3, lo_bound(r), hi_bound(h, r));
                        }
                    }
                }
                check(placed, "generate_scene: could not place entity " + std::to_string(i) +
                                  " without initial overlap (frame too small)");
            }
            break;
        }
    }

    // exact occupancy masks
    SceneSample s;
    s.entity_count = k;
    s.meta = meta;
    s.positions = pos;
    s.masks.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        TensorF m({t, 1, h, w});
        const auto& sp = specs[static_cast<size_t>(i)];
        for (int f = 0; f < t; ++f) {
            const Vec2& c = pos[static_cast<size_t>(i)][static_cast<size_t>(f)];
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (inside_shape(sp.shape_kind, c[0], c[1], sp.radius_px, x, y)) m.at4(f, 0, y, x) = 1.0f;
        }
        s.masks.push_back(std::move(m));
    }

    // target: background, then entities back to front (ascending index)
    s.target_video = TensorF({t, 3, h, w});
    for (int f = 0; f < t; ++f)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double bgv = meta.bg.value(x, y);
                for (int c = 0; c < 3; ++c) s.target_video.at4(f, c, y, x) = static_cast<float>(bgv);
                for (int i = 0; i < k; ++i) {
                    if (s.masks[static_cast<size_t>(i)].at4(f, 0, y, x) > 0.5f) {
                        const auto& sp = specs[static_cast<size_t>(i)];
                        const Vec2& c2 = pos[static_cast<size_t>(i)][static_cast<size_t>(f)];
                        double tex = texture_factor(sp.texture_seed, x - raster_round(c2[0]), y - raster_round(c2[1]));
                        for (int c = 0; c < 3; ++c)
                            s.target_video.at4(f, c, y, x) =
                                static_cast<float>(std::min(1.0, std::max(0.0, sp.color[static_cast<size_t>(c)] * tex)));
                    }
                }
            }

    std::vector<KeypointFrame> frames;
    frames.reserve(static_cast<size_t>(t));
    for (int f = 0; f < t; ++f) {
        std::vector<Vec2> centers(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) centers[static_cast<size_t>(i)] = pos[static_cast<size_t>(i)][static_cast<size_t>(f)];
        frames.push_back(glyphs_for(specs, centers));
    }
    s.pose_video = render_pose(frames, h, w);

    s.reference_image = TensorF({1, 3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) s.reference_image.at4(0, c, y, x) = s.target_video.at4(0, c, y, x);

    return s;
}

// Visible (depth-resolved) region of entity i at frame f: covered by M_i and
// by no entity in front of it.
inline bool visible_at(const SceneSample& s, int entity, int f, int y, int x) {
    if (s.masks[static_cast<size_t>(entity)].at4(f, 0, y, x) < 0.5f) return false;
    for (int j = entity + 1; j < s.entity_count; ++j)
        if (s.masks[static_cast<size_t>(j)].at4(f, 0, y, x) > 0.5f) return false;
    return true;
}

}  // namespace maskflow
