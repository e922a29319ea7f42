#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "velab/rng.hpp"
#include "velab/video.hpp"

namespace velab {

// The 14 camera-motion rules. Basic zooms, directional pans/tilts, combined
// zoom-translation moves, a handheld walk-bob, and a random combo of segments.
enum class MotionKind {
    ZoomIn = 1,
    ZoomOut,
    PanLeft,
    PanRight,
    TiltUp,
    TiltDown,
    ZoomInPanLeft,
    ZoomInPanRight,
    ZoomOutPanLeft,
    ZoomOutPanRight,
    ZoomInTilt,
    ZoomOutTilt,
    WalkBob,
    RandomCombo,
};

constexpr int kMotionRuleCount = 14;

inline MotionKind motion_rule_from_id(int id) {
    if (id < 1 || id > kMotionRuleCount) throw std::invalid_argument("motion rule id out of range");
    return static_cast<MotionKind>(id);
}

inline std::string motion_rule_name(MotionKind k) {
    switch (k) {
        case MotionKind::ZoomIn: return "zoom_in";
        case MotionKind::ZoomOut: return "zoom_out";
        case MotionKind::PanLeft: return "pan_left";
        case MotionKind::PanRight: return "pan_right";
        case MotionKind::TiltUp: return "tilt_up";
        case MotionKind::TiltDown: return "tilt_down";
        case MotionKind::ZoomInPanLeft: return "zoom_in+pan_left";
        case MotionKind::ZoomInPanRight: return "zoom_in+pan_right";
        case MotionKind::ZoomOutPanLeft: return "zoom_out+pan_left";
        case MotionKind::ZoomOutPanRight: return "zoom_out+pan_right";
        case MotionKind::ZoomInTilt: return "zoom_in+tilt";
        case MotionKind::ZoomOutTilt: return "zoom_out+tilt";
        case MotionKind::WalkBob: return "walk_bob";
        case MotionKind::RandomCombo: return "random_combo";
    }
    return "unknown";
}

// Per-frame virtual camera state. The crop window of size (H/zoom, W/zoom)
// centered at (center_x, center_y) must lie inside the source frame.
struct CameraPath {
    std::vector<double> center_x;
    std::vector<double> center_y;
    std::vector<double> zoom;  // >= 1

    int frames() const { return static_cast<int>(zoom.size()); }

    bool contained(int src_h, int src_w) const {
        for (int f = 0; f < frames(); ++f) {
            const double hw = src_w / zoom[static_cast<std::size_t>(f)] / 2.0;
            const double hh = src_h / zoom[static_cast<std::size_t>(f)] / 2.0;
            const double cx = center_x[static_cast<std::size_t>(f)];
            const double cy = center_y[static_cast<std::size_t>(f)];
            if (cx - hw < -1e-9 || cx + hw > src_w + 1e-9) return false;
            if (cy - hh < -1e-9 || cy + hh > src_h + 1e-9) return false;
        }
        return true;
    }
};

// 5 distinct rule ids from 1..14, uniform without replacement.
inline std::vector<int> sample_motion_rules(Rng& rng) {
    std::vector<int> ids = rng.sample_without_replacement(kMotionRuleCount, 5);
    for (auto& id : ids) id += 1;
    return ids;
}

namespace detail {

// strictly monotone ease between 0 and 1 over frame index
inline double ease(double u) { return u * u * (3.0 - 2.0 * u) * 0.7 + 0.3 * u; }

struct SegmentParams {
    double z0 = 1.0, z1 = 1.0;      // zoom endpoints
    double dx = 0.0, dy = 0.0;      // center translation in px
};

// Fill frames [f0, f1] with an eased zoom/translate segment starting from
// (cx, cy, z). Translation is rescaled so the window stays in the frame at
// the segment's loosest zoom. Returns the final state.
inline void fill_segment(CameraPath& path, int f0, int f1, double& cx, double& cy, double& z,
                         SegmentParams seg, int src_h, int src_w) {
    const double zmin = std::min(seg.z0, seg.z1);
    const double slack_x = (src_w - src_w / zmin) / 2.0;
    const double slack_y = (src_h - src_h / zmin) / 2.0;
    // clamp the travel so the end point leaves margin at the loosest zoom
    auto clamp_travel = [](double want, double from, double lo, double hi) {
        return std::clamp(from + want, lo, hi) - from;
    };
    const double cx_lo = src_w / 2.0 - slack_x, cx_hi = src_w / 2.0 + slack_x;
    const double cy_lo = src_h / 2.0 - slack_y, cy_hi = src_h / 2.0 + slack_y;
    cx = std::clamp(cx, cx_lo, cx_hi);
    cy = std::clamp(cy, cy_lo, cy_hi);
    seg.dx = clamp_travel(seg.dx, cx, cx_lo, cx_hi);
    seg.dy = clamp_travel(seg.dy, cy, cy_lo, cy_hi);
    const double x0 = cx, y0 = cy;
    const int n = f1 - f0;
    for (int f = f0; f <= f1; ++f) {
        const double u = n == 0 ? 1.0 : static_cast<double>(f - f0) / n;
        const double e = ease(u);
        path.zoom[static_cast<std::size_t>(f)] = seg.z0 + (seg.z1 - seg.z0) * e;
        path.center_x[static_cast<std::size_t>(f)] = x0 + seg.dx * e;
        path.center_y[static_cast<std::size_t>(f)] = y0 + seg.dy * e;
    }
    cx = x0 + seg.dx;
    cy = y0 + seg.dy;
    z = seg.z1;
}

}  // namespace detail

// Build a path for one rule. Zoom curves and translation intensities are
// randomized within bounds; infeasible translations are rescaled, never
// rejected.
inline CameraPath camera_path(MotionKind rule, int frames, int src_h, int src_w, Rng& rng) {
    if (frames < 2) throw std::invalid_argument("camera_path: need at least 2 frames");
    CameraPath path;
    path.center_x.assign(static_cast<std::size_t>(frames), src_w / 2.0);
    path.center_y.assign(static_cast<std::size_t>(frames), src_h / 2.0);
    path.zoom.assign(static_cast<std::size_t>(frames), 1.0);

    double cx = src_w / 2.0, cy = src_h / 2.0, z = 1.0;
    const double z_lo = rng.uniform(1.15, 1.35);
    const double z_hi = rng.uniform(1.5, 1.9);
    const double travel_frac = rng.uniform(0.5, 0.95);

    auto pan_amount = [&](double zoom_min) {
        return travel_frac * (src_w - src_w / zoom_min);  // clamped in fill_segment
    };
    auto tilt_amount = [&](double zoom_min) {
        return travel_frac * (src_h - src_h / zoom_min);
    };

    using detail::SegmentParams;
    switch (rule) {
        case MotionKind::ZoomIn:
            detail::fill_segment(path, 0, frames - 1, cx, cy, z, {1.0, z_hi, 0, 0}, src_h, src_w);
            break;
        case MotionKind::ZoomOut:
            detail::fill_segment(path, 0, frames - 1, cx, cy, z, {z_hi, 1.0, 0, 0}, src_h, src_w);
            break;
        case MotionKind::PanLeft:
        case MotionKind::PanRight: {
            const double dir = rule == MotionKind::PanLeft ? -1.0 : 1.0;
            cx -= dir * pan_amount(z_lo) / 2.0;
            detail::fill_segment(path, 0, frames - 1, cx, cy, z,
                                 {z_lo, z_lo, dir * pan_amount(z_lo), 0}, src_h, src_w);
            break;
        }
        case MotionKind::TiltUp:
        case MotionKind::TiltDown: {
            const double dir = rule == MotionKind::TiltUp ? -1.0 : 1.0;
            cy -= dir * tilt_amount(z_lo) / 2.0;
            detail::fill_segment(path, 0, frames - 1, cx, cy, z,
                                 {z_lo, z_lo, 0, dir * tilt_amount(z_lo)}, src_h, src_w);
            break;
        }
        case MotionKind::ZoomInPanLeft:
        case MotionKind::ZoomInPanRight: {
            const double dir = rule == MotionKind::ZoomInPanLeft ? -1.0 : 1.0;
            cx -= dir * pan_amount(z_lo) / 2.0;
            detail::fill_segment(path, 0, frames - 1, cx, cy, z,
                                 {z_lo, z_hi, dir * pan_amount(z_lo), 0}, src_h, src_w);
            break;
        }
        case MotionKind::ZoomOutPanLeft:
        case MotionKind::ZoomOutPanRight: {
            const double dir = rule == MotionKind::ZoomOutPanLeft ? -1.0 : 1.0;
            cx -= dir * pan_amount(z_lo) / 2.0;
            detail::fill_segment(path, 0, frames - 1, cx, cy, z,
                                 {z_hi, z_lo, dir * pan_amount(z_lo), 0}, src_h, src_w);
            break;
        }
        case MotionKind::ZoomInTilt:
        case MotionKind::ZoomOutTilt: {
            const double dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
            const bool zin = rule == MotionKind::ZoomInTilt;
            cy -= dir * tilt_amount(z_lo) / 2.0;
            detail::fill_segment(path, 0, frames - 1, cx, cy, z,
                                 {zin ? z_lo : z_hi, zin ? z_hi : z_lo, 0, dir * tilt_amount(z_lo)},
                                 src_h, src_w);
            break;
        }
        case MotionKind::WalkBob: {
            // vertical sway: center_y = base + A sin(2*pi*F*u), F in [1.25, 2.5]
            // cycles per clip gives >= 2 zero crossings
            const double zb = rng.uniform(1.2, 1.4);
            const double slack_y = (src_h - src_h / zb) / 2.0;
            const double amp = std::min(rng.uniform(0.2, 0.6) * slack_y, slack_y);
            const double cycles = rng.uniform(1.25, 2.5);
            for (int f = 0; f < frames; ++f) {
                const double u = static_cast<double>(f) / (frames - 1);
                path.zoom[static_cast<std::size_t>(f)] = zb;
                path.center_y[static_cast<std::size_t>(f)] =
                    src_h / 2.0 + amp * std::sin(2.0 * M_PI * cycles * u);
            }
            break;
        }
        case MotionKind::RandomCombo: {
            // 2-3 segments of mixed zoom/translation, continuous at joints
            const int n_seg = rng.uniform_int(2, 3);
            std::vector<int> cuts = {0};
            for (int s = 1; s < n_seg; ++s)
                cuts.push_back(s * (frames - 1) / n_seg);
            cuts.push_back(frames - 1);
            z = rng.uniform(1.2, 1.5);
            for (int s = 0; s < n_seg; ++s) {
                SegmentParams seg;
                seg.z0 = z;
                // keep the current center valid at the loosest zoom of the next
                // segment, so joints stay continuous after clamping
                const double off_x = std::abs(cx - src_w / 2.0);
                const double off_y = std::abs(cy - src_h / 2.0);
                double z_req = 1.1;
                if (2.0 * off_x < src_w)
                    z_req = std::max(z_req, src_w / (src_w - 2.0 * off_x) + 1e-9);
                if (2.0 * off_y < src_h)
                    z_req = std::max(z_req, src_h / (src_h - 2.0 * off_y) + 1e-9);
                seg.z1 = std::clamp(z + rng.uniform(-0.3, 0.3), std::min(z_req, 2.0), 2.0);
                const double zmin = std::min(seg.z0, seg.z1);
                seg.dx = rng.uniform(-0.4, 0.4) * (src_w - src_w / zmin);
                seg.dy = rng.uniform(-0.4, 0.4) * (src_h - src_h / zmin);
                detail::fill_segment(path, cuts[static_cast<std::size_t>(s)],
                                     cuts[static_cast<std::size_t>(s + 1)], cx, cy, z, seg, src_h,
                                     src_w);
            }
            break;
        }
    }
    return path;
}

// Crop the per-frame window and resample to (out_h, out_w). Crop and resize
// are fused into one bilinear sampling pass in source coordinates.
inline VideoTensor apply_ken_burns(const VideoTensor& v, const CameraPath& path, int out_h, int out_w) {
    if (path.frames() != v.frames) throw std::invalid_argument("apply_ken_burns: frame count mismatch");
    if (!path.contained(v.height, v.width)) throw std::invalid_argument("apply_ken_burns: window leaves frame");
    VideoTensor out(v.frames, out_h, out_w);
    for (int f = 0; f < v.frames; ++f) {
        const double win_w = v.width / path.zoom[static_cast<std::size_t>(f)];
        const double win_h = v.height / path.zoom[static_cast<std::size_t>(f)];
        const double left = path.center_x[static_cast<std::size_t>(f)] - win_w / 2.0;
        const double top = path.center_y[static_cast<std::size_t>(f)] - win_h / 2.0;
        for (int y = 0; y < out_h; ++y) {
            const double src_y = top + (y + 0.5) * win_h / out_h - 0.5;
            const int y0 = static_cast<int>(std::floor(src_y));
            const double wy = src_y - y0;
            const int y0c = std::clamp(y0, 0, v.height - 1);
            const int y1c = std::clamp(y0 + 1, 0, v.height - 1);
            for (int x = 0; x < out_w; ++x) {
                const double src_x = left + (x + 0.5) * win_w / out_w - 0.5;
                const int x0 = static_cast<int>(std::floor(src_x));
                const double wx = src_x - x0;
                const int x0c = std::clamp(x0, 0, v.width - 1);
                const int x1c = std::clamp(x0 + 1, 0, v.width - 1);
                for (int c = 0; c < 3; ++c) {
                    const double t = v.at(f, y0c, x0c, c) * (1.0 - wx) + v.at(f, y0c, x1c, c) * wx;
                    const double b = v.at(f, y1c, x0c, c) * (1.0 - wx) + v.at(f, y1c, x1c, c) * wx;
                    out.at(f, y, x, c) = std::clamp(t * (1.0 - wy) + b * wy, 0.0, 1.0);
                }
            }
        }
    }
    return out;
}

}  // namespace velab
