#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "velab/metrics.hpp"
#include "velab/video_io.hpp"
#include "velab/vlm.hpp"

namespace velab {

namespace fs = std::filesystem;

struct EvalOptions {
    bool with_qscore = false;
    VlmConfig vlm;
    std::string qscore_prompt;
    FeatureExtractor extractor = builtin_feature_extractor();
};

// Samples are paired by directory name: <pred_dir>/<id> vs <gt_dir>/<id>,
// each a frame directory with a manifest. gt_dir may be empty when only
// QScore is requested.
inline MetricReport eval_set(const fs::path& pred_dir, const fs::path& gt_dir,
                             const EvalOptions& opt = {}) {
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(pred_dir))
        if (e.is_directory()) ids.push_back(e.path().filename().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw IoError("eval_set: no sample directories in " + pred_dir.string());

    const bool have_gt = !gt_dir.empty();
    std::vector<SampleMetrics> rows;
    std::vector<std::vector<double>> feats_pred, feats_gt;
    std::optional<VlmClient> client;
    if (opt.with_qscore) client.emplace(opt.vlm);

    for (const auto& id : ids) {
        const VideoTensor pred = read_video_dir(pred_dir / id);
        SampleMetrics row;
        row.id = id;
        if (have_gt) {
            const fs::path gp = gt_dir / id;
            if (!fs::exists(gp)) throw IoError("eval_set: missing ground truth for sample " + id);
            const VideoTensor gt = read_video_dir(gp);
            row.psnr = psnr(pred, gt);
            row.ssim = ssim(pred, gt);
            row.perceptual = perceptual_distance(pred, gt, opt.extractor);
            feats_gt.push_back(opt.extractor.extract(gt));
        }
        feats_pred.push_back(opt.extractor.extract(pred));
        if (client) row.qscore = client->score(pred, opt.qscore_prompt);
        rows.push_back(std::move(row));
    }
    const double fd = have_gt ? frechet_distance(feats_pred, feats_gt) : 0.0;
    return aggregate_metrics(std::move(rows), fd);
}

inline nlohmann::json metric_report_json(const MetricReport& r) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& s : r.per_sample) {
        nlohmann::json row{{"id", s.id},
                           {"psnr", std::isinf(s.psnr) ? 1e9 : s.psnr},
                           {"ssim", s.ssim},
                           {"perceptual", s.perceptual}};
        if (s.qscore) row["qscore"] = *s.qscore;
        per.push_back(std::move(row));
    }
    nlohmann::json agg{{"mean_psnr", std::isinf(r.mean_psnr) ? 1e9 : r.mean_psnr},
                       {"mean_ssim", r.mean_ssim},
                       {"mean_perceptual", r.mean_perceptual},
                       {"frechet", r.frechet},
                       {"sample_count", r.sample_count}};
    if (r.mean_qscore) agg["mean_qscore"] = *r.mean_qscore;
    return nlohmann::json{{"per_sample", per}, {"aggregate", agg}};
}

inline void write_metric_report(const MetricReport& r, const fs::path& file) {
    std::ofstream out(file);
    out << metric_report_json(r).dump(2) << "\n";
}

}  // namespace velab
