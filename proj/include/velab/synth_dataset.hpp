#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "velab/synth.hpp"
#include "velab/video_io.hpp"

namespace velab {

struct SynthConfig {
    int scenes = 2;
    int objects_per_scene = 2;   // n
    int camera_configs = 1;      // m
    int frames = 8;
    int render_height = 72;
    int render_width = 96;
    int out_height = 48;         // Ken Burns crop target
    int out_width = 64;
    int max_pairs_per_scene = 6; // 0 = emit every enumerated pair
    bool kb_variants = true;     // emit 5 Ken Burns variants per pair
    std::uint64_t seed = 0;
};

struct DatasetIndexEntry {
    std::string id;
    std::uint64_t scene_seed = 0;
    int pair_index = 0;
    int camera_id = 0;
    int variant = 0;       // 0 = as rendered, 1..5 = Ken Burns variants
    int motion_rule_id = 0;  // 0 for the base variant
    std::vector<int> removal_set;
    std::vector<std::string> effect_kinds;
};

// Deterministic: (config, seed) fixes every byte of the output directory.
// Each sample owns a derived seed, so workers on disjoint samples would
// produce identical results in any order.
inline std::vector<DatasetIndexEntry> synth_dataset(const SynthConfig& cfg, const fs::path& out_dir) {
    if (fs::exists(out_dir) && !fs::is_empty(out_dir))
        throw IoError("synth_dataset: output directory not empty: " + out_dir.string());
    fs::create_directories(out_dir);
    std::vector<DatasetIndexEntry> index;
    std::uint64_t sample_counter = 0;
    for (int sc = 0; sc < cfg.scenes; ++sc) {
        const std::uint64_t scene_seed = derive_seed(cfg.seed, 1000003ULL * sc);
        const SceneSpec full_scene = random_scene(scene_seed, cfg.objects_per_scene, cfg.frames,
                                                  cfg.render_height, cfg.render_width);
        auto pairs = enumerate_pairs(cfg.objects_per_scene, cfg.camera_configs);
        const int limit = cfg.max_pairs_per_scene > 0
                              ? std::min<int>(cfg.max_pairs_per_scene, static_cast<int>(pairs.size()))
                              : static_cast<int>(pairs.size());
        for (int pi = 0; pi < limit; ++pi) {
            const PairEntry& pe = pairs[static_cast<std::size_t>(pi)];
            // sub-scene containing only the present objects, removal re-indexed
            SceneSpec sub = full_scene;
            sub.objects.clear();
            std::vector<int> removal;
            for (std::size_t k = 0; k < pe.present.size(); ++k) {
                sub.objects.push_back(full_scene.objects[static_cast<std::size_t>(pe.present[k])]);
                if (std::find(pe.removed.begin(), pe.removed.end(), pe.present[k]) != pe.removed.end())
                    removal.push_back(static_cast<int>(k));
            }
            TripletSample base = render_triplet(sub, removal);
            Rng sample_rng(derive_seed(cfg.seed, ++sample_counter));
            const std::vector<int> rule_ids = sample_motion_rules(sample_rng);
            base.meta.motion_rule_ids = rule_ids;

            char id_buf[128];
            auto emit = [&](const TripletSample& t, int variant, int rule_id) {
                std::snprintf(id_buf, sizeof(id_buf), "scene%03d_pair%03d_cam%d_var%d", sc, pi,
                              pe.camera_id, variant);
                write_triplet(t, out_dir / id_buf);
                DatasetIndexEntry e;
                e.id = id_buf;
                e.scene_seed = scene_seed;
                e.pair_index = pi;
                e.camera_id = pe.camera_id;
                e.variant = variant;
                e.motion_rule_id = rule_id;
                e.removal_set = t.meta.removal_set;
                e.effect_kinds = t.meta.effect_kinds;
                index.push_back(std::move(e));
            };
            emit(base, 0, 0);
            if (cfg.kb_variants) {
                for (int v = 0; v < 5; ++v) {
                    const int rule_id = rule_ids[static_cast<std::size_t>(v)];
                    const CameraPath path = camera_path(motion_rule_from_id(rule_id), cfg.frames,
                                                        cfg.render_height, cfg.render_width, sample_rng);
                    emit(ken_burns_triplet(base, path, cfg.out_height, cfg.out_width), v + 1, rule_id);
                }
            }
        }
    }
    json j = json::array();
    for (const auto& e : index)
        j.push_back({{"id", e.id},
                     {"scene_seed", e.scene_seed},
                     {"pair_index", e.pair_index},
                     {"camera_id", e.camera_id},
                     {"variant", e.variant},
                     {"motion_rule_id", e.motion_rule_id},
                     {"removal_set", e.removal_set},
                     {"effect_kinds", e.effect_kinds}});
    std::ofstream out(out_dir / "index.json");
    out << j.dump(2) << "\n";
    return index;
}

inline std::vector<std::string> dataset_sample_ids(const fs::path& dataset_dir) {
    std::ifstream in(dataset_dir / "index.json");
    if (!in) throw IoError("missing dataset index: " + (dataset_dir / "index.json").string());
    json j = json::parse(in);
    std::vector<std::string> ids;
    for (const auto& e : j) ids.push_back(e.at("id").get<std::string>());
    return ids;
}

}  // namespace velab
