#pragma once

#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "velab/infer.hpp"
#include "velab/model.hpp"
#include "velab/synth_dataset.hpp"
#include "velab/train.hpp"
#include "velab/vlm.hpp"

namespace velab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Merged configuration tree. JSON file values override defaults, flag values
// override the file; unknown keys anywhere in the tree are rejected.
struct RunConfig {
    SynthConfig synth;
    ModelConfig model;
    TrainConfig train;
    SampleConfig sample;
    VlmConfig vlm;
    std::uint64_t seed = 0;
    std::string output_root = "runs";
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& section) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key: " + section + "." + it.key());
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
    detail::check_keys(j, {"synth", "model", "train", "sample", "vlm", "seed", "output_root"}, "root");
    detail::take(j, "seed", cfg.seed);
    detail::take(j, "output_root", cfg.output_root);
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        detail::check_keys(s,
                           {"scenes", "objects_per_scene", "camera_configs", "frames", "render_height",
                            "render_width", "out_height", "out_width", "max_pairs_per_scene",
                            "kb_variants", "seed"},
                           "synth");
        detail::take(s, "scenes", cfg.synth.scenes);
        detail::take(s, "objects_per_scene", cfg.synth.objects_per_scene);
        detail::take(s, "camera_configs", cfg.synth.camera_configs);
        detail::take(s, "frames", cfg.synth.frames);
        detail::take(s, "render_height", cfg.synth.render_height);
        detail::take(s, "render_width", cfg.synth.render_width);
        detail::take(s, "out_height", cfg.synth.out_height);
        detail::take(s, "out_width", cfg.synth.out_width);
        detail::take(s, "max_pairs_per_scene", cfg.synth.max_pairs_per_scene);
        detail::take(s, "kb_variants", cfg.synth.kb_variants);
        detail::take(s, "seed", cfg.synth.seed);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::check_keys(m,
                           {"patch_size", "model_dim", "n_blocks", "n_heads", "prompt_len", "token_dim",
                            "lora_rank", "lambda_ec", "fg_patch", "mapper_hidden"},
                           "model");
        detail::take(m, "patch_size", cfg.model.patch_size);
        detail::take(m, "model_dim", cfg.model.model_dim);
        detail::take(m, "n_blocks", cfg.model.n_blocks);
        detail::take(m, "n_heads", cfg.model.n_heads);
        detail::take(m, "prompt_len", cfg.model.prompt_len);
        detail::take(m, "token_dim", cfg.model.token_dim);
        detail::take(m, "lora_rank", cfg.model.lora_rank);
        detail::take(m, "lambda_ec", cfg.model.lambda_ec);
        detail::take(m, "fg_patch", cfg.model.fg_patch);
        detail::take(m, "mapper_hidden", cfg.model.mapper_hidden);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::check_keys(t,
                           {"learning_rate", "weight_decay", "batch_size", "max_steps", "lambda_ec",
                            "timestep_loc", "timestep_scale", "epsilon_prior", "kl_floor", "seed",
                            "checkpoint_interval"},
                           "train");
        detail::take(t, "learning_rate", cfg.train.learning_rate);
        detail::take(t, "weight_decay", cfg.train.weight_decay);
        detail::take(t, "batch_size", cfg.train.batch_size);
        detail::take(t, "max_steps", cfg.train.max_steps);
        detail::take(t, "lambda_ec", cfg.train.lambda_ec);
        detail::take(t, "timestep_loc", cfg.train.timestep_loc);
        detail::take(t, "timestep_scale", cfg.train.timestep_scale);
        detail::take(t, "epsilon_prior", cfg.train.epsilon_prior);
        detail::take(t, "kl_floor", cfg.train.kl_floor);
        detail::take(t, "seed", cfg.train.seed);
        detail::take(t, "checkpoint_interval", cfg.train.checkpoint_interval);
    }
    if (j.contains("sample")) {
        const auto& s = j.at("sample");
        detail::check_keys(s, {"steps", "seed"}, "sample");
        detail::take(s, "steps", cfg.sample.steps);
        detail::take(s, "seed", cfg.sample.seed);
    }
    if (j.contains("vlm")) {
        const auto& v = j.at("vlm");
        detail::check_keys(v,
                           {"host", "port", "path", "model", "token_env", "max_retries",
                            "initial_backoff_ms", "frames_per_request", "timeout_sec"},
                           "vlm");
        detail::take(v, "host", cfg.vlm.host);
        detail::take(v, "port", cfg.vlm.port);
        detail::take(v, "path", cfg.vlm.path);
        detail::take(v, "model", cfg.vlm.model);
        detail::take(v, "token_env", cfg.vlm.token_env);
        detail::take(v, "max_retries", cfg.vlm.max_retries);
        detail::take(v, "initial_backoff_ms", cfg.vlm.initial_backoff_ms);
        detail::take(v, "frames_per_request", cfg.vlm.frames_per_request);
        detail::take(v, "timeout_sec", cfg.vlm.timeout_sec);
    }
}

inline RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    apply_config_json(cfg, j);
    return cfg;
}

inline nlohmann::json run_config_json(const RunConfig& c) {
    return nlohmann::json{
        {"seed", c.seed},
        {"output_root", c.output_root},
        {"synth",
         {{"scenes", c.synth.scenes},
          {"objects_per_scene", c.synth.objects_per_scene},
          {"camera_configs", c.synth.camera_configs},
          {"frames", c.synth.frames},
          {"render_height", c.synth.render_height},
          {"render_width", c.synth.render_width},
          {"out_height", c.synth.out_height},
          {"out_width", c.synth.out_width},
          {"max_pairs_per_scene", c.synth.max_pairs_per_scene},
          {"kb_variants", c.synth.kb_variants},
          {"seed", c.synth.seed}}},
        {"model",
         {{"patch_size", c.model.patch_size},
          {"model_dim", c.model.model_dim},
          {"n_blocks", c.model.n_blocks},
          {"n_heads", c.model.n_heads},
          {"prompt_len", c.model.prompt_len},
          {"token_dim", c.model.token_dim},
          {"lora_rank", c.model.lora_rank},
          {"lambda_ec", c.model.lambda_ec},
          {"fg_patch", c.model.fg_patch},
          {"mapper_hidden", c.model.mapper_hidden}}},
        {"train",
         {{"learning_rate", c.train.learning_rate},
          {"weight_decay", c.train.weight_decay},
          {"batch_size", c.train.batch_size},
          {"max_steps", c.train.max_steps},
          {"lambda_ec", c.train.lambda_ec},
          {"timestep_loc", c.train.timestep_loc},
          {"timestep_scale", c.train.timestep_scale},
          {"epsilon_prior", c.train.epsilon_prior},
          {"kl_floor", c.train.kl_floor},
          {"seed", c.train.seed},
          {"checkpoint_interval", c.train.checkpoint_interval}}},
        {"sample", {{"steps", c.sample.steps}, {"seed", c.sample.seed}}},
        {"vlm",
         {{"host", c.vlm.host},
          {"port", c.vlm.port},
          {"path", c.vlm.path},
          {"model", c.vlm.model},
          {"token_env", c.vlm.token_env},
          {"max_retries", c.vlm.max_retries},
          {"initial_backoff_ms", c.vlm.initial_backoff_ms},
          {"frames_per_request", c.vlm.frames_per_request},
          {"timeout_sec", c.vlm.timeout_sec}}}};
}

}  // namespace velab
