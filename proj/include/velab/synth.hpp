#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "velab/camera.hpp"
#include "velab/rng.hpp"
#include "velab/video.hpp"

namespace velab {

enum class EffectKind {
    OcclusionOpaque,
    OcclusionSemitransparent,
    OcclusionTransparent,
    Shadow,
    Lighting,
    Reflection,
    Deformation,
};

inline std::string effect_kind_name(EffectKind k) {
    switch (k) {
        case EffectKind::OcclusionOpaque: return "occlusion_opaque";
        case EffectKind::OcclusionSemitransparent: return "occlusion_semitransparent";
        case EffectKind::OcclusionTransparent: return "occlusion_transparent";
        case EffectKind::Shadow: return "shadow";
        case EffectKind::Lighting: return "lighting";
        case EffectKind::Reflection: return "reflection";
        case EffectKind::Deformation: return "deformation";
    }
    return "unknown";
}

struct EffectSpec {
    EffectKind kind = EffectKind::OcclusionOpaque;
    // occlusion_semitransparent
    double alpha = 0.5;  // (0,1]
    // shadow
    double shadow_dx = 0.0, shadow_dy = 0.0;
    double darkening = 0.6;   // s in [0.4, 0.8]: value multiplied by s at full weight
    double edge_softness = 0.3;
    // lighting
    double gain = 0.2;        // <= 0.3
    double falloff_radius = 10.0;
    // reflection
    int surface_row = 0;
    double reflect_alpha = 0.3;  // [0.2, 0.5]
    // deformation
    double deform_radius = 8.0;
    double max_displacement = 2.0;  // <= 3 px
};

enum class ShapeKind { Disc, Rectangle };
enum class TrajectoryKind { Linear, Circular };

struct ObjectSpec {
    ShapeKind shape = ShapeKind::Disc;
    double size = 8.0;  // disc radius / rect half-width in px
    std::array<double, 3> color = {0.5, 0.5, 0.5};
    TrajectoryKind trajectory = TrajectoryKind::Linear;
    double start_x = 0.0, start_y = 0.0;     // linear
    double vel_x = 0.0, vel_y = 0.0;         // px/frame
    double orbit_cx = 0.0, orbit_cy = 0.0;   // circular
    double orbit_radius = 0.0;
    double angular_speed = 0.0;              // rad/frame
    double phase = 0.0;
    std::vector<EffectSpec> effects;  // exactly one occlusion subtype, plus extras

    std::pair<double, double> center(int frame) const {
        if (trajectory == TrajectoryKind::Linear)
            return {start_x + vel_x * frame, start_y + vel_y * frame};
        const double a = phase + angular_speed * frame;
        return {orbit_cx + orbit_radius * std::cos(a), orbit_cy + orbit_radius * std::sin(a)};
    }

    bool in_silhouette(int frame, double x, double y) const {
        const auto [cx, cy] = center(frame);
        if (shape == ShapeKind::Disc) {
            const double dx = x - cx, dy = y - cy;
            return dx * dx + dy * dy <= size * size;
        }
        return std::abs(x - cx) <= size && std::abs(y - cy) <= 0.7 * size;
    }
};

struct SceneSpec {
    int frames = 8;
    int height = 64;
    int width = 64;
    std::uint64_t seed = 0;
    // background: smooth gradient + sinusoidal texture, optionally drifting
    std::array<double, 3> base_color = {0.4, 0.45, 0.5};
    std::array<double, 3> grad_x = {0.1, 0.05, 0.0};   // per-channel gradient across width
    std::array<double, 3> grad_y = {0.0, 0.05, 0.1};
    double tex_amp = 0.06;
    double tex_fx = 0.08, tex_fy = 0.05;  // cycles per px
    double tex_drift = 0.0;               // phase per frame; nonzero = dynamic background
    std::vector<ObjectSpec> objects;

    double background(int frame, double x, double y, int c) const {
        const double g = base_color[static_cast<std::size_t>(c)] +
                         grad_x[static_cast<std::size_t>(c)] * (x / width) +
                         grad_y[static_cast<std::size_t>(c)] * (y / height);
        const double tex = tex_amp * std::sin(2.0 * M_PI * (tex_fx * x + tex_fy * y + tex_drift * frame));
        return std::clamp(g + tex, 0.0, 1.0);
    }
};

namespace detail {

inline double shadow_weight(const EffectSpec& e, double size, double dx, double dy) {
    const double a = 1.2 * size, b = 0.6 * size;
    const double rho = std::sqrt((dx / a) * (dx / a) + (dy / b) * (dy / b));
    if (rho <= 1.0) return 1.0;
    return std::clamp(1.0 - (rho - 1.0) / e.edge_softness, 0.0, 1.0);
}

inline bool shadow_support(const EffectSpec& e, double size, double dx, double dy) {
    const double a = 1.2 * size, b = 0.6 * size;
    const double rho = std::sqrt((dx / a) * (dx / a) + (dy / b) * (dy / b));
    return rho < 1.0 + e.edge_softness;
}

}  // namespace detail

// True if (x,y) at `frame` is inside any non-silhouette effect region of the
// object. Closed form; this is the ground-truth footprint.
inline bool in_effect_footprint(const ObjectSpec& obj, int frame, double x, double y) {
    const auto [cx, cy] = obj.center(frame);
    for (const auto& e : obj.effects) {
        switch (e.kind) {
            case EffectKind::Shadow:
                if (detail::shadow_support(e, obj.size, x - (cx + e.shadow_dx), y - (cy + e.shadow_dy)))
                    return true;
                break;
            case EffectKind::Lighting: {
                const double dx = x - cx, dy = y - cy;
                if (std::sqrt(dx * dx + dy * dy) < e.falloff_radius) return true;
                break;
            }
            case EffectKind::Reflection:
                if (y > e.surface_row && obj.in_silhouette(frame, x, 2.0 * e.surface_row - y))
                    return true;
                break;
            case EffectKind::Deformation: {
                const double dx = x - cx, dy = y - cy;
                if (std::sqrt(dx * dx + dy * dy) < e.deform_radius) return true;
                break;
            }
            default:
                break;  // occlusion subtypes live in the mask, not the footprint
        }
    }
    return false;
}

// Composite the background with each present object and all its effects, in
// fixed order (lighting -> shadow -> reflection -> deformation -> occlusion).
// Pixels outside every present object's support equal the pure background.
inline VideoTensor render_scene(const SceneSpec& spec, const std::vector<int>& present) {
    VideoTensor out(spec.frames, spec.height, spec.width);
    for (int f = 0; f < spec.frames; ++f)
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                std::array<double, 3> px;
                for (int c = 0; c < 3; ++c) px[static_cast<std::size_t>(c)] = spec.background(f, x, y, c);
                for (int oi : present) {
                    const ObjectSpec& obj = spec.objects[static_cast<std::size_t>(oi)];
                    const auto [cx, cy] = obj.center(f);
                    // lighting
                    for (const auto& e : obj.effects) {
                        if (e.kind != EffectKind::Lighting) continue;
                        const double dx = x - cx, dy = y - cy;
                        const double dist = std::sqrt(dx * dx + dy * dy);
                        if (dist < e.falloff_radius) {
                            const double g = e.gain * (1.0 - dist / e.falloff_radius);
                            for (auto& v : px) v = std::clamp(v + g, 0.0, 1.0);
                        }
                    }
                    // shadow
                    for (const auto& e : obj.effects) {
                        if (e.kind != EffectKind::Shadow) continue;
                        const double dx = x - (cx + e.shadow_dx), dy = y - (cy + e.shadow_dy);
                        if (detail::shadow_support(e, obj.size, dx, dy)) {
                            const double w = detail::shadow_weight(e, obj.size, dx, dy);
                            const double factor = 1.0 - (1.0 - e.darkening) * w;
                            for (auto& v : px) v *= factor;
                        }
                    }
                    // reflection: mirrored sprite blended below the surface row
                    for (const auto& e : obj.effects) {
                        if (e.kind != EffectKind::Reflection) continue;
                        if (y > e.surface_row && obj.in_silhouette(f, x, 2.0 * e.surface_row - y)) {
                            for (int c = 0; c < 3; ++c) {
                                auto& v = px[static_cast<std::size_t>(c)];
                                v = (1.0 - e.reflect_alpha) * v +
                                    e.reflect_alpha * 0.8 * obj.color[static_cast<std::size_t>(c)];
                            }
                        }
                    }
                    // deformation: radial warp of the analytic background
                    for (const auto& e : obj.effects) {
                        if (e.kind != EffectKind::Deformation) continue;
                        const double dx = x - cx, dy = y - cy;
                        const double dist = std::sqrt(dx * dx + dy * dy);
                        if (dist < e.deform_radius && dist > 1e-9) {
                            const double mag = e.max_displacement * std::sin(M_PI * dist / e.deform_radius);
                            const double wx = x + dx / dist * mag;
                            const double wy = y + dy / dist * mag;
                            for (int c = 0; c < 3; ++c)
                                px[static_cast<std::size_t>(c)] = spec.background(f, wx, wy, c);
                        }
                    }
                    // occlusion
                    if (obj.in_silhouette(f, x, y)) {
                        for (const auto& e : obj.effects) {
                            if (e.kind == EffectKind::OcclusionOpaque) {
                                for (int c = 0; c < 3; ++c)
                                    px[static_cast<std::size_t>(c)] = obj.color[static_cast<std::size_t>(c)];
                            } else if (e.kind == EffectKind::OcclusionSemitransparent) {
                                for (int c = 0; c < 3; ++c) {
                                    auto& v = px[static_cast<std::size_t>(c)];
                                    v = (1.0 - e.alpha) * v + e.alpha * obj.color[static_cast<std::size_t>(c)];
                                }
                            } else if (e.kind == EffectKind::OcclusionTransparent) {
                                for (int c = 0; c < 3; ++c) {
                                    auto& v = px[static_cast<std::size_t>(c)];
                                    v = std::clamp(v * 1.08 + 0.04 * obj.color[static_cast<std::size_t>(c)],
                                                   0.0, 1.0);
                                }
                            }
                        }
                    }
                }
                for (int c = 0; c < 3; ++c) out.at(f, y, x, c) = px[static_cast<std::size_t>(c)];
            }
    return out;
}

// Renders the triplet for removing `removal_set` from the fully populated
// scene. Mask covers occluder silhouettes only; the footprint covers the
// removed objects' effect regions.
inline TripletSample render_triplet(const SceneSpec& spec, const std::vector<int>& removal_set) {
    if (removal_set.empty()) throw std::invalid_argument("render_triplet: empty removal set");
    std::vector<int> all(spec.objects.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    std::vector<int> kept;
    for (int i : all)
        if (std::find(removal_set.begin(), removal_set.end(), i) == removal_set.end())
            kept.push_back(i);

    TripletSample s;
    s.object_video = render_scene(spec, all);
    s.background_video = render_scene(spec, kept);
    s.mask = MaskVideo(spec.frames, spec.height, spec.width);
    s.effect_footprint = MaskVideo(spec.frames, spec.height, spec.width);
    for (int f = 0; f < spec.frames; ++f)
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                for (int oi : removal_set) {
                    const ObjectSpec& obj = spec.objects[static_cast<std::size_t>(oi)];
                    if (obj.in_silhouette(f, x, y)) s.mask.at(f, y, x) = 1.0;
                    if (in_effect_footprint(obj, f, x, y)) s.effect_footprint.at(f, y, x) = 1.0;
                }
    s.meta.seed = spec.seed;
    s.meta.removal_set = removal_set;
    for (int oi : removal_set)
        for (const auto& e : spec.objects[static_cast<std::size_t>(oi)].effects)
            s.meta.effect_kinds.push_back(effect_kind_name(e.kind));
    return s;
}

// One entry per (per-object state assignment, camera config). Each object is
// absent, present-kept, or present-removed; assignments with no removed
// object are excluded, giving (3^n - 2^n) * m entries.
struct PairEntry {
    std::vector<int> present;
    std::vector<int> removed;
    int camera_id = 0;
};

inline std::vector<PairEntry> enumerate_pairs(int n, int m) {
    if (n < 1 || m < 1) throw std::invalid_argument("enumerate_pairs: n, m must be >= 1");
    std::vector<PairEntry> out;
    long total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (long code = 0; code < total; ++code) {
        long c = code;
        std::vector<int> present, removed;
        for (int i = 0; i < n; ++i) {
            const int state = static_cast<int>(c % 3);  // 0 absent, 1 kept, 2 removed
            c /= 3;
            if (state >= 1) present.push_back(i);
            if (state == 2) removed.push_back(i);
        }
        if (removed.empty()) continue;
        for (int cam = 0; cam < m; ++cam) out.push_back({present, removed, cam});
    }
    return out;
}

// ---------------------------------------------------------------- random scenes

inline EffectSpec random_occlusion(Rng& rng) {
    EffectSpec e;
    const int sub = rng.uniform_int(0, 2);
    if (sub == 0) e.kind = EffectKind::OcclusionOpaque;
    else if (sub == 1) {
        e.kind = EffectKind::OcclusionSemitransparent;
        e.alpha = rng.uniform(0.3, 0.9);
    } else e.kind = EffectKind::OcclusionTransparent;
    return e;
}

inline EffectSpec random_extra_effect(Rng& rng, const ObjectSpec& obj, int height) {
    EffectSpec e;
    switch (rng.uniform_int(0, 3)) {
        case 0:
            e.kind = EffectKind::Shadow;
            e.shadow_dx = rng.uniform(0.5, 1.2) * obj.size;
            e.shadow_dy = rng.uniform(0.3, 0.9) * obj.size;
            e.darkening = rng.uniform(0.4, 0.8);
            e.edge_softness = rng.uniform(0.2, 0.5);
            break;
        case 1:
            e.kind = EffectKind::Lighting;
            e.gain = rng.uniform(0.1, 0.3);
            e.falloff_radius = rng.uniform(1.8, 2.8) * obj.size;
            break;
        case 2:
            e.kind = EffectKind::Reflection;
            e.surface_row = static_cast<int>(rng.uniform(0.6, 0.8) * height);
            e.reflect_alpha = rng.uniform(0.2, 0.5);
            break;
        case 3:
            e.kind = EffectKind::Deformation;
            e.deform_radius = rng.uniform(1.2, 1.8) * obj.size;
            e.max_displacement = rng.uniform(1.0, 3.0);
            break;
    }
    return e;
}

inline ObjectSpec random_object(Rng& rng, int frames, int height, int width) {
    ObjectSpec obj;
    obj.shape = rng.uniform() < 0.5 ? ShapeKind::Disc : ShapeKind::Rectangle;
    const double min_side = std::min(height, width);
    obj.size = rng.uniform(min_side / 10.0, min_side / 5.0);
    for (auto& c : obj.color) c = rng.uniform(0.05, 0.95);
    const double margin = obj.size + 1.0;
    if (rng.uniform() < 0.6) {
        obj.trajectory = TrajectoryKind::Linear;
        obj.start_x = rng.uniform(margin, width - margin);
        obj.start_y = rng.uniform(margin, height - margin);
        // pick an end point inside the margin box; velocity follows
        const double end_x = rng.uniform(margin, width - margin);
        const double end_y = rng.uniform(margin, height - margin);
        obj.vel_x = (end_x - obj.start_x) / std::max(frames - 1, 1);
        obj.vel_y = (end_y - obj.start_y) / std::max(frames - 1, 1);
    } else {
        const double max_r = std::min({(width - 2.0 * margin) / 2.0, (height - 2.0 * margin) / 2.0,
                                       min_side / 4.0}) - 1.0;
        if (max_r < 2.0) {
            obj.trajectory = TrajectoryKind::Linear;  // frame too small for an orbit
            obj.start_x = width / 2.0;
            obj.start_y = height / 2.0;
        } else {
            obj.trajectory = TrajectoryKind::Circular;
            obj.orbit_radius = rng.uniform(2.0, max_r);
            obj.orbit_cx = rng.uniform(margin + obj.orbit_radius, width - margin - obj.orbit_radius);
            obj.orbit_cy = rng.uniform(margin + obj.orbit_radius, height - margin - obj.orbit_radius);
            obj.angular_speed = rng.uniform(-0.4, 0.4);
            obj.phase = rng.uniform(0.0, 2.0 * M_PI);
        }
    }
    obj.effects.push_back(random_occlusion(rng));
    const int extras = rng.uniform_int(0, 2);
    for (int i = 0; i < extras; ++i) obj.effects.push_back(random_extra_effect(rng, obj, height));
    return obj;
}

inline SceneSpec random_scene(std::uint64_t seed, int n_objects, int frames, int height, int width) {
    Rng rng(seed);
    SceneSpec spec;
    spec.frames = frames;
    spec.height = height;
    spec.width = width;
    spec.seed = seed;
    for (auto& c : spec.base_color) c = rng.uniform(0.25, 0.6);
    for (auto& g : spec.grad_x) g = rng.uniform(-0.15, 0.15);
    for (auto& g : spec.grad_y) g = rng.uniform(-0.15, 0.15);
    spec.tex_amp = rng.uniform(0.03, 0.08);
    spec.tex_fx = rng.uniform(0.03, 0.1);
    spec.tex_fy = rng.uniform(0.03, 0.1);
    spec.tex_drift = rng.uniform() < 0.5 ? rng.uniform(0.02, 0.08) : 0.0;
    for (int i = 0; i < n_objects; ++i)
        spec.objects.push_back(random_object(rng, frames, height, width));
    return spec;
}

// Apply one camera path to a whole triplet. The mask is rebinarized at 0.5;
// the footprint becomes every output pixel whose bilinear stencil touched
// mask or footprint, which keeps the outside-region equality exact.
inline TripletSample ken_burns_triplet(const TripletSample& s, const CameraPath& path, int out_h,
                                       int out_w) {
    auto as_video = [](const MaskVideo& m) {
        VideoTensor v(m.frames, m.height, m.width);
        for (int f = 0; f < m.frames; ++f)
            for (int y = 0; y < m.height; ++y)
                for (int x = 0; x < m.width; ++x)
                    for (int c = 0; c < 3; ++c) v.at(f, y, x, c) = m.at(f, y, x);
        return v;
    };
    TripletSample out;
    out.object_video = apply_ken_burns(s.object_video, path, out_h, out_w);
    out.background_video = apply_ken_burns(s.background_video, path, out_h, out_w);
    const VideoTensor mask_soft = apply_ken_burns(as_video(s.mask), path, out_h, out_w);
    MaskVideo union_in(s.mask.frames, s.mask.height, s.mask.width);
    for (std::size_t i = 0; i < union_in.data.size(); ++i)
        union_in.data[i] = std::max(s.mask.data[i], s.effect_footprint.data[i]);
    const VideoTensor union_soft = apply_ken_burns(as_video(union_in), path, out_h, out_w);
    out.mask = MaskVideo(mask_soft.frames, out_h, out_w);
    out.effect_footprint = MaskVideo(mask_soft.frames, out_h, out_w);
    for (int f = 0; f < mask_soft.frames; ++f)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                out.mask.at(f, y, x) = mask_soft.at(f, y, x, 0) >= 0.5 ? 1.0 : 0.0;
                out.effect_footprint.at(f, y, x) = union_soft.at(f, y, x, 0) > 1e-12 ? 1.0 : 0.0;
            }
    out.meta = s.meta;
    return out;
}

}  // namespace velab
