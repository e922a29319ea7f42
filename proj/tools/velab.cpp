// Command-line front end: synthesis, training, inference, evaluation, scoring.
//
// Every command resolves its configuration (defaults < config file < flags),
// creates runs/<timestamp>-<command>/{config,logs,artifacts}, snapshots the
// resolved config there, and exits with:
//   0 success, 2 config error, 3 data validation error,
//   4 runtime/numerical error, 5 external-service error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "velab/config.hpp"
#include "velab/eval.hpp"
#include "velab/infer.hpp"
#include "velab/synth_dataset.hpp"
#include "velab/train.hpp"

namespace fs = std::filesystem;
using namespace velab;

namespace {

fs::path make_run_dir(const std::string& root, const std::string& command) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    localtime_r(&tt, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s-%03d-%s", stamp, static_cast<int>(ms), command.c_str());
    fs::path dir = fs::path(root) / buf;
    fs::create_directories(dir / "config");
    fs::create_directories(dir / "logs");
    fs::create_directories(dir / "artifacts");
    return dir;
}

void snapshot_config(const RunConfig& cfg, const fs::path& run_dir) {
    std::ofstream out(run_dir / "config" / "resolved.json");
    out << run_config_json(cfg).dump(2) << "\n";
}

std::ofstream open_log(const fs::path& run_dir) {
    return std::ofstream(run_dir / "logs" / "run.log");
}

std::vector<TripletSample> load_dataset(const fs::path& dir) {
    std::vector<TripletSample> out;
    for (const auto& id : dataset_sample_ids(dir)) out.push_back(read_triplet(dir / id));
    return out;
}

int fail(int code, const std::string& msg) {
    std::cerr << "error code=" << code << " msg=\"" << msg << "\"\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"procedural video effect-removal lab"};
    app.require_subcommand(1);
    app.fallthrough();  // parent flags (--config, --seed) usable after the subcommand

    std::string config_file;
    app.add_option("--config", config_file, "JSON config file (flags override file values)");

    // flag overrides shared across commands; optional so only set values win
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--seed", seed_flag, "master random seed");
    std::string out_path;

    auto* synth = app.add_subcommand("synth", "generate a paired-triplet dataset");
    synth->add_option("--out", out_path, "output dataset directory")->required();
    std::optional<int> scenes_flag, frames_flag;
    synth->add_option("--scenes", scenes_flag, "number of scenes");
    synth->add_option("--frames", frames_flag, "frames per video");

    auto* train = app.add_subcommand("train", "train the editing model on a dataset");
    std::string data_path, ckpt_path;
    train->add_option("--data", data_path, "dataset directory from synth")->required();
    std::optional<int> max_steps_flag;
    std::optional<double> lr_flag;
    train->add_option("--max-steps", max_steps_flag, "optimizer steps");
    train->add_option("--lr", lr_flag, "learning rate");

    auto* remove = app.add_subcommand("remove", "remove objects and their effects from a video");
    std::string video_path, mask_path, bg_path, obj_path;
    remove->add_option("--video", video_path, "input video directory")->required();
    remove->add_option("--mask", mask_path, "object mask video directory")->required();
    remove->add_option("--ckpt", ckpt_path, "checkpoint directory")->required();
    std::optional<int> steps_flag;
    remove->add_option("--steps", steps_flag, "denoising steps");
    remove->add_option("--out", out_path, "output video directory");

    auto* insert = app.add_subcommand("insert", "insert masked objects into a background video");
    insert->add_option("--background", bg_path, "background video directory")->required();
    insert->add_option("--object", obj_path, "object video directory")->required();
    insert->add_option("--mask", mask_path, "object mask video directory")->required();
    insert->add_option("--ckpt", ckpt_path, "checkpoint directory")->required();
    insert->add_option("--steps", steps_flag, "denoising steps");
    insert->add_option("--out", out_path, "output video directory");

    auto* eval = app.add_subcommand("eval", "compute metrics for predictions against ground truth");
    std::string pred_path, gt_path;
    eval->add_option("--pred", pred_path, "directory of predicted sample dirs")->required();
    eval->add_option("--gt", gt_path, "directory of ground-truth sample dirs")->required();
    eval->add_option("--out", out_path, "report file");

    auto* qscore = app.add_subcommand("qscore", "VLM-judged quality score for predictions");
    std::string prompt_path = "assets/qscore_prompt.txt";
    qscore->add_option("--pred", pred_path, "directory of predicted sample dirs")->required();
    qscore->add_option("--prompt", prompt_path, "prompt template file");
    std::optional<std::string> vlm_host_flag;
    std::optional<int> vlm_port_flag;
    qscore->add_option("--vlm-host", vlm_host_flag, "scoring endpoint host");
    qscore->add_option("--vlm-port", vlm_port_flag, "scoring endpoint port");
    qscore->add_option("--out", out_path, "report file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    RunConfig cfg;
    try {
        cfg = load_run_config(config_file);
    } catch (const std::exception& e) {
        return fail(2, e.what());
    }
    if (seed_flag) {
        cfg.seed = *seed_flag;
        cfg.synth.seed = *seed_flag;
        cfg.train.seed = *seed_flag;
        cfg.sample.seed = *seed_flag;
    }
    if (scenes_flag) cfg.synth.scenes = *scenes_flag;
    if (frames_flag) cfg.synth.frames = *frames_flag;
    if (max_steps_flag) cfg.train.max_steps = *max_steps_flag;
    if (lr_flag) cfg.train.learning_rate = *lr_flag;
    if (steps_flag) cfg.sample.steps = *steps_flag;
    if (vlm_host_flag) cfg.vlm.host = *vlm_host_flag;
    if (vlm_port_flag) cfg.vlm.port = *vlm_port_flag;

    const std::string command = app.get_subcommands().front()->get_name();
    fs::path run_dir;
    try {
        run_dir = make_run_dir(cfg.output_root, command);
        snapshot_config(cfg, run_dir);
    } catch (const std::exception& e) {
        return fail(4, e.what());
    }
    auto log = open_log(run_dir);

    try {
        if (synth->parsed()) {
            const auto index = synth_dataset(cfg.synth, out_path);
            log << "synthesized " << index.size() << " triplets into " << out_path << "\n";
            std::cout << out_path << "\n";
        } else if (train->parsed()) {
            const auto dataset = load_dataset(data_path);
            cfg.model.validate();
            cfg.model.lambda_ec = cfg.train.lambda_ec;
            ParamStore params = init_params(cfg.model, cfg.seed);
            const TrainResult res = train_loop(dataset, params, cfg.model, cfg.train, run_dir / "artifacts");
            log << "trained " << cfg.train.max_steps << " steps on " << dataset.size()
                << " triplets, final loss "
                << (res.history.empty() ? 0.0 : res.history.back().total) << "\n";
            std::cout << res.final_checkpoint.string() << "\n";
        } else if (remove->parsed() || insert->parsed()) {
            Checkpoint ck = load_checkpoint(ckpt_path);
            VideoTensor result;
            if (remove->parsed()) {
                const VideoTensor video = read_video_dir(video_path);
                const MaskVideo mask = video_to_mask(read_video_dir(mask_path));
                result = remove_objects(video, mask, ck, cfg.sample);
            } else {
                const VideoTensor bg = read_video_dir(bg_path);
                const VideoTensor obj = read_video_dir(obj_path);
                const MaskVideo mask = video_to_mask(read_video_dir(mask_path));
                result = insert_objects(bg, obj, mask, ck, cfg.sample);
            }
            const fs::path dest = out_path.empty() ? run_dir / "artifacts" / "output" : fs::path(out_path);
            write_video_dir(result, dest);
            log << command << " wrote " << result.frames << " frames to " << dest << "\n";
            std::cout << dest.string() << "\n";
        } else if (eval->parsed()) {
            const MetricReport report = eval_set(pred_path, gt_path);
            const fs::path dest = out_path.empty() ? run_dir / "artifacts" / "report.json" : fs::path(out_path);
            write_metric_report(report, dest);
            log << "evaluated " << report.sample_count << " samples\n";
            std::cout << dest.string() << "\n";
        } else if (qscore->parsed()) {
            std::ifstream pf(prompt_path);
            if (!pf) return fail(2, "cannot open prompt file: " + prompt_path);
            std::string prompt((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
            EvalOptions opt;
            opt.with_qscore = true;
            opt.vlm = cfg.vlm;
            opt.qscore_prompt = prompt;
            MetricReport report;
            try {
                report = eval_set(pred_path, "", opt);
            } catch (const VlmError& e) {
                return fail(5, e.what());
            }
            const fs::path dest = out_path.empty() ? run_dir / "artifacts" / "report.json" : fs::path(out_path);
            write_metric_report(report, dest);
            log << "scored " << report.sample_count << " samples, mean "
                << (report.mean_qscore ? *report.mean_qscore : 0.0) << "\n";
            std::cout << dest.string() << "\n";
        }
    } catch (const ConfigError& e) {
        return fail(2, e.what());
    } catch (const IoError& e) {
        return fail(3, e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(3, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(3, e.what());
    } catch (const VlmError& e) {
        return fail(5, e.what());
    } catch (const std::exception& e) {
        return fail(4, e.what());
    }
    return 0;
}
