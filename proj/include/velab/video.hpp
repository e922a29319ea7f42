#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "velab/tensor.hpp"

namespace velab {

// RGB video, values in [0,1], layout frames x height x width x 3.
struct VideoTensor {
    int frames = 0;
    int height = 0;
    int width = 0;
    static constexpr int channels = 3;
    std::vector<double> data;

    VideoTensor() = default;
    VideoTensor(int f, int h, int w, double fill = 0.0)
        : frames(f), height(h), width(w),
          data(static_cast<std::size_t>(f) * h * w * channels, fill) {}

    long numel() const { return static_cast<long>(data.size()); }

    double& at(int f, int y, int x, int c) {
        return data[((static_cast<std::size_t>(f) * height + y) * width + x) * channels + c];
    }
    double at(int f, int y, int x, int c) const {
        return data[((static_cast<std::size_t>(f) * height + y) * width + x) * channels + c];
    }

    bool valid() const {
        if (frames < 1 || height < 8 || width < 8) return false;
        for (double v : data)
            if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
        return true;
    }
};

// Single-channel mask video; binarization threshold is fixed at 0.5.
struct MaskVideo {
    int frames = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    MaskVideo() = default;
    MaskVideo(int f, int h, int w, double fill = 0.0)
        : frames(f), height(h), width(w), data(static_cast<std::size_t>(f) * h * w, fill) {}

    double& at(int f, int y, int x) {
        return data[(static_cast<std::size_t>(f) * height + y) * width + x];
    }
    double at(int f, int y, int x) const {
        return data[(static_cast<std::size_t>(f) * height + y) * width + x];
    }

    bool on(int f, int y, int x) const { return at(f, y, x) >= 0.5; }

    void binarize() {
        for (auto& v : data) v = v >= 0.5 ? 1.0 : 0.0;
    }

    bool matches(const VideoTensor& v) const {
        return frames == v.frames && height == v.height && width == v.width;
    }
};

struct SampleMeta {
    std::uint64_t seed = 0;
    std::vector<std::string> effect_kinds;
    std::vector<int> motion_rule_ids;
    std::vector<int> removal_set;
};

// Paired training unit: object video, clean background, object mask, and the
// exact effect region ground truth (available in synthesis only).
struct TripletSample {
    VideoTensor object_video;      // V^o
    VideoTensor background_video;  // V^b
    MaskVideo mask;                // M, occluder silhouettes only
    MaskVideo effect_footprint;    // region altered by effects beyond the silhouette
    SampleMeta meta;
};

struct VideoManifest {
    int fps_num = 12;
    int fps_den = 1;
    int width = 0;
    int height = 0;
    int frame_count = 0;
    std::string frame_naming = "frame_%06d.ppm";
    std::string color_space = "srgb8";
};

// Per-frame bilinear resample, align-corners-off / half-pixel centers.
// This single convention is used everywhere (difference prior, Ken Burns).
inline VideoTensor resize_bilinear(const VideoTensor& v, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad target size");
    VideoTensor out(v.frames, out_h, out_w);
    const double sy = static_cast<double>(v.height) / out_h;
    const double sx = static_cast<double>(v.width) / out_w;
    for (int f = 0; f < v.frames; ++f) {
        for (int y = 0; y < out_h; ++y) {
            const double src_y = (y + 0.5) * sy - 0.5;
            const int y0 = static_cast<int>(std::floor(src_y));
            const double wy = src_y - y0;
            const int y0c = std::clamp(y0, 0, v.height - 1);
            const int y1c = std::clamp(y0 + 1, 0, v.height - 1);
            for (int x = 0; x < out_w; ++x) {
                const double src_x = (x + 0.5) * sx - 0.5;
                const int x0 = static_cast<int>(std::floor(src_x));
                const double wx = src_x - x0;
                const int x0c = std::clamp(x0, 0, v.width - 1);
                const int x1c = std::clamp(x0 + 1, 0, v.width - 1);
                for (int c = 0; c < 3; ++c) {
                    const double top = v.at(f, y0c, x0c, c) * (1.0 - wx) + v.at(f, y0c, x1c, c) * wx;
                    const double bot = v.at(f, y1c, x0c, c) * (1.0 - wx) + v.at(f, y1c, x1c, c) * wx;
                    out.at(f, y, x, c) = std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
                }
            }
        }
    }
    return out;
}

inline std::vector<std::string> validate_triplet(const TripletSample& s) {
    std::vector<std::string> violations;
    const VideoTensor& o = s.object_video;
    const VideoTensor& b = s.background_video;
    if (!o.valid()) violations.push_back("object video invalid");
    if (!b.valid()) violations.push_back("background video invalid");
    if (o.frames != b.frames || o.height != b.height || o.width != b.width)
        violations.push_back("frame count mismatch between object and background");
    if (!s.mask.matches(o)) violations.push_back("frame count mismatch");
    if (!s.effect_footprint.matches(o)) violations.push_back("footprint size mismatch");
    if (!violations.empty()) return violations;
    for (int f = 0; f < o.frames; ++f)
        for (int y = 0; y < o.height; ++y)
            for (int x = 0; x < o.width; ++x) {
                if (s.mask.on(f, y, x) || s.effect_footprint.on(f, y, x)) continue;
                for (int c = 0; c < 3; ++c)
                    if (o.at(f, y, x, c) != b.at(f, y, x, c)) {
                        violations.push_back("outside-footprint mismatch");
                        return violations;
                    }
            }
    return violations;
}

}  // namespace velab
