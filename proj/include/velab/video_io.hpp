#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "velab/video.hpp"

namespace velab {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string frame_filename(const std::string& pattern, int index) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern.c_str(), index);
    return std::string(buf);
}

inline std::uint8_t quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(c * 255.0 + 0.5);
}

// Binary PPM (P6), lossless 8-bit RGB.
inline void write_ppm(const VideoTensor& v, int frame, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + file.string());
    out << "P6\n" << v.width << " " << v.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(v.width) * 3);
    for (int y = 0; y < v.height; ++y) {
        for (int x = 0; x < v.width; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<std::size_t>(x) * 3 + c] = quantize8(v.at(frame, y, x, c));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed: " + file.string());
}

inline void read_ppm(VideoTensor& v, int frame, const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open: " + file.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255) throw IoError("unsupported frame format: " + file.string());
    if (w != v.width || h != v.height)
        throw IoError("dimension mismatch across frames: " + file.string());
    in.get();  // single whitespace after header
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("truncated frame: " + file.string());
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                v.at(frame, y, x, c) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
    }
}

inline void write_manifest(const VideoManifest& m, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write manifest: " + file.string());
    out << "fps " << m.fps_num << "/" << m.fps_den << "\n"
        << "width " << m.width << "\n"
        << "height " << m.height << "\n"
        << "frame_count " << m.frame_count << "\n"
        << "frame_naming " << m.frame_naming << "\n"
        << "color_space " << m.color_space << "\n";
}

inline VideoManifest read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("missing manifest: " + file.string());
    VideoManifest m;
    std::string key;
    while (in >> key) {
        if (key == "fps") {
            std::string v;
            in >> v;
            const auto slash = v.find('/');
            m.fps_num = std::stoi(v.substr(0, slash));
            m.fps_den = slash == std::string::npos ? 1 : std::stoi(v.substr(slash + 1));
        } else if (key == "width") in >> m.width;
        else if (key == "height") in >> m.height;
        else if (key == "frame_count") in >> m.frame_count;
        else if (key == "frame_naming") in >> m.frame_naming;
        else if (key == "color_space") in >> m.color_space;
        else throw IoError("unknown manifest key: " + key);
    }
    return m;
}

inline VideoManifest write_video_dir(const VideoTensor& v, const fs::path& dir) {
    fs::create_directories(dir);
    VideoManifest m;
    m.width = v.width;
    m.height = v.height;
    m.frame_count = v.frames;
    for (int f = 0; f < v.frames; ++f) write_ppm(v, f, dir / frame_filename(m.frame_naming, f));
    write_manifest(m, dir / "manifest.txt");
    return m;
}

inline VideoTensor read_video_dir(const fs::path& dir) {
    const VideoManifest m = read_manifest(dir / "manifest.txt");
    int on_disk = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".ppm") ++on_disk;
    if (on_disk != m.frame_count)
        throw IoError("frame count mismatch: manifest says " + std::to_string(m.frame_count) +
                      ", found " + std::to_string(on_disk));
    VideoTensor v(m.frame_count, m.height, m.width);
    for (int f = 0; f < m.frame_count; ++f) read_ppm(v, f, dir / frame_filename(m.frame_naming, f));
    return v;
}

inline VideoTensor mask_to_video(const MaskVideo& m) {
    VideoTensor v(m.frames, m.height, m.width);
    for (int f = 0; f < m.frames; ++f)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                for (int c = 0; c < 3; ++c) v.at(f, y, x, c) = m.at(f, y, x);
    return v;
}

inline MaskVideo video_to_mask(const VideoTensor& v, bool binarize = true) {
    MaskVideo m(v.frames, v.height, v.width);
    for (int f = 0; f < v.frames; ++f)
        for (int y = 0; y < v.height; ++y)
            for (int x = 0; x < v.width; ++x) {
                const double g = (v.at(f, y, x, 0) + v.at(f, y, x, 1) + v.at(f, y, x, 2)) / 3.0;
                m.at(f, y, x) = binarize ? (g >= 0.5 ? 1.0 : 0.0) : g;
            }
    return m;
}

// Triplet layout: <dir>/{object,background,mask,footprint}/ + meta.json
inline void write_triplet(const TripletSample& s, const fs::path& dir) {
    write_video_dir(s.object_video, dir / "object");
    write_video_dir(s.background_video, dir / "background");
    write_video_dir(mask_to_video(s.mask), dir / "mask");
    write_video_dir(mask_to_video(s.effect_footprint), dir / "footprint");
    json meta = {
        {"seed", s.meta.seed},
        {"effect_kinds", s.meta.effect_kinds},
        {"motion_rule_ids", s.meta.motion_rule_ids},
        {"removal_set", s.meta.removal_set},
    };
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
}

inline TripletSample read_triplet(const fs::path& dir) {
    TripletSample s;
    s.object_video = read_video_dir(dir / "object");
    s.background_video = read_video_dir(dir / "background");
    s.mask = video_to_mask(read_video_dir(dir / "mask"));
    s.effect_footprint = video_to_mask(read_video_dir(dir / "footprint"));
    std::ifstream in(dir / "meta.json");
    if (in) {
        json meta = json::parse(in);
        s.meta.seed = meta.value("seed", std::uint64_t{0});
        s.meta.effect_kinds = meta.value("effect_kinds", std::vector<std::string>{});
        s.meta.motion_rule_ids = meta.value("motion_rule_ids", std::vector<int>{});
        s.meta.removal_set = meta.value("removal_set", std::vector<int>{});
    }
    return s;
}

}  // namespace velab
