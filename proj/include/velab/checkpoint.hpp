#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "velab/model.hpp"
#include "velab/video_io.hpp"

namespace velab {

// Checkpoint = directory with a named-tensor archive plus sidecar metadata
// (config, step, seed, loss history). Compatibility is keyed on a config hash.
constexpr char kTensorMagic[9] = "VELABTS1";

inline json model_config_json(const ModelConfig& c) {
    return {{"patch_size", c.patch_size},   {"model_dim", c.model_dim},
            {"n_blocks", c.n_blocks},       {"n_heads", c.n_heads},
            {"prompt_len", c.prompt_len},   {"token_dim", c.token_dim},
            {"lora_rank", c.lora_rank},     {"lambda_ec", c.lambda_ec},
            {"fg_patch", c.fg_patch},       {"mapper_hidden", c.mapper_hidden}};
}

inline ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    c.patch_size = j.value("patch_size", c.patch_size);
    c.model_dim = j.value("model_dim", c.model_dim);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.prompt_len = j.value("prompt_len", c.prompt_len);
    c.token_dim = j.value("token_dim", c.token_dim);
    c.lora_rank = j.value("lora_rank", c.lora_rank);
    c.lambda_ec = j.value("lambda_ec", c.lambda_ec);
    c.fg_patch = j.value("fg_patch", c.fg_patch);
    c.mapper_hidden = j.value("mapper_hidden", c.mapper_hidden);
    return c;
}

inline std::uint64_t config_hash(const ModelConfig& c) {
    const std::string s = model_config_json(c).dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ULL;
    }
    return h;
}

inline void save_tensors(const ParamStore& params, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint tensors: " + file.string());
    out.write(kTensorMagic, 8);
    const std::uint32_t count = static_cast<std::uint32_t>(params.tensors.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& [name, v] : params.tensors) {
        const std::uint32_t nlen = static_cast<std::uint32_t>(name.size());
        out.write(reinterpret_cast<const char*>(&nlen), 4);
        out.write(name.data(), nlen);
        const std::uint8_t trainable = v->requires_grad ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&trainable), 1);
        const std::uint32_t ndim = static_cast<std::uint32_t>(v->val.shape.size());
        out.write(reinterpret_cast<const char*>(&ndim), 4);
        for (int d : v->val.shape) {
            const std::int32_t dd = d;
            out.write(reinterpret_cast<const char*>(&dd), 4);
        }
        out.write(reinterpret_cast<const char*>(v->val.data.data()),
                  static_cast<std::streamsize>(v->val.data.size() * sizeof(double)));
    }
    if (!out) throw IoError("checkpoint write failed: " + file.string());
}

inline ParamStore load_tensors(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint tensors: " + file.string());
    char magic[9] = {};
    in.read(magic, 8);
    if (std::string(magic) != kTensorMagic) throw IoError("bad checkpoint magic: " + file.string());
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    ParamStore p;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t nlen = 0;
        in.read(reinterpret_cast<char*>(&nlen), 4);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        std::uint8_t trainable = 0;
        in.read(reinterpret_cast<char*>(&trainable), 1);
        std::uint32_t ndim = 0;
        in.read(reinterpret_cast<char*>(&ndim), 4);
        std::vector<int> shape(ndim);
        for (auto& d : shape) {
            std::int32_t dd = 0;
            in.read(reinterpret_cast<char*>(&dd), 4);
            d = dd;
        }
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in) throw IoError("truncated checkpoint: " + file.string());
        p.add(name, std::move(t), trainable != 0);
    }
    return p;
}

inline void save_checkpoint(const ParamStore& params, const ModelConfig& cfg, int step,
                            std::uint64_t seed, const std::vector<double>& loss_history,
                            const fs::path& dir) {
    fs::create_directories(dir);
    save_tensors(params, dir / "tensors.bin");
    json meta = {{"format_version", 1},
                 {"config", model_config_json(cfg)},
                 {"config_hash", config_hash(cfg)},
                 {"step", step},
                 {"seed", seed},
                 {"loss_history", loss_history}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
}

struct Checkpoint {
    ParamStore params;
    ModelConfig config;
    int step = 0;
    std::uint64_t seed = 0;
};

inline Checkpoint load_checkpoint(const fs::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw IoError("missing checkpoint metadata: " + (dir / "meta.json").string());
    json meta = json::parse(in);
    Checkpoint ck;
    ck.config = model_config_from_json(meta.at("config"));
    if (meta.value("config_hash", std::uint64_t{0}) != config_hash(ck.config))
        throw IoError("checkpoint config hash mismatch");
    ck.params = load_tensors(dir / "tensors.bin");
    ck.step = meta.value("step", 0);
    ck.seed = meta.value("seed", std::uint64_t{0});
    return ck;
}

}  // namespace velab
