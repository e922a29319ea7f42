#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "velab/checkpoint.hpp"
#include "velab/model.hpp"
#include "velab/rng.hpp"
#include "velab/video.hpp"

namespace velab {

struct SampleConfig {
    int steps = 50;
    std::uint64_t seed = 0;
    TaskKind task = TaskKind::Removal;

    void validate() const {
        if (steps < 1) throw std::invalid_argument("SampleConfig: steps must be >= 1");
    }
};

// Plain Euler integration of the velocity field from t=0 (noise) to t=1.
// velocity_fn(x, t) must return a tensor of x's shape.
inline Tensor euler_sample(const std::function<Tensor(const Tensor&, double)>& velocity_fn,
                           const std::vector<int>& shape, const SampleConfig& cfg, Rng& rng) {
    cfg.validate();
    Tensor x(shape);
    for (auto& v : x.data) v = rng.normal();
    const double dt = 1.0 / cfg.steps;
    for (int k = 0; k < cfg.steps; ++k) {
        const double t = static_cast<double>(k) / cfg.steps;
        const Tensor v = velocity_fn(x, t);
        if (!v.same_shape(x)) throw std::invalid_argument("euler_sample: velocity shape mismatch");
        for (long i = 0; i < x.numel(); ++i) x[i] += dt * v[i];
        if (!x.all_finite()) throw std::runtime_error("euler_sample: non-finite state");
    }
    return x;
}

namespace detail {

inline VideoTensor run_pipeline(TaskKind task, const TripletLatents& lat,
                                const TripletSample& prompt_source, Checkpoint& ck,
                                const SampleConfig& cfg) {
    const ModelConfig& mcfg = ck.config;
    const LatentGrid cond = build_condition(task, lat);
    const LatentGrid& ref = task == TaskKind::Removal ? lat.x_bg : lat.x_obj;

    const Tensor e_f = foreground_tokens(prompt_source, ck.params, mcfg);
    auto velocity_fn = [&](const Tensor& x, double t) {
        LatentGrid x_grid = ref;
        x_grid.data = x;
        ag::Value projected = project_foreground(e_f, ck.params);
        PromptEmbedding prompt = build_prompt(task, projected, ck.params, mcfg);
        DitOutput out = dit_forward(x_grid, cond, prompt, t, ck.params, mcfg);
        return out.velocity->val;
    };
    Rng rng(cfg.seed);
    const Tensor x1 = euler_sample(velocity_fn, ref.data.shape, cfg, rng);
    LatentGrid result = ref;
    result.data = x1;
    return decode_latent(result, mcfg.patch_size);
}

}  // namespace detail

// Removal pipeline: c = [x^o ; x^m], removal prompt, sample, decode.
inline VideoTensor remove_objects(const VideoTensor& video, const MaskVideo& mask, Checkpoint& ck,
                                  SampleConfig cfg) {
    if (!mask.matches(video)) throw std::invalid_argument("remove_objects: mask/video mismatch");
    cfg.task = TaskKind::Removal;
    TripletLatents lat;
    lat.x_obj = encode_latent(video, ck.config.patch_size);
    lat.x_mask = encode_mask(mask, ck.config.patch_size);
    lat.x_bg = lat.x_obj;  // shape reference only; removal condition never reads x^b
    TripletSample prompt_source;
    prompt_source.object_video = video;
    prompt_source.mask = mask;
    return detail::run_pipeline(TaskKind::Removal, lat, prompt_source, ck, cfg);
}

// Insertion pipeline: c = [x^b ; x^f] with x^f = x^o (.) x^m.
inline VideoTensor insert_objects(const VideoTensor& background, const VideoTensor& object_video,
                                  const MaskVideo& mask, Checkpoint& ck, SampleConfig cfg) {
    if (!mask.matches(background) || !mask.matches(object_video))
        throw std::invalid_argument("insert_objects: input shapes differ");
    cfg.task = TaskKind::Insertion;
    TripletLatents lat;
    lat.x_obj = encode_latent(object_video, ck.config.patch_size);
    lat.x_bg = encode_latent(background, ck.config.patch_size);
    lat.x_mask = encode_mask(mask, ck.config.patch_size);
    TripletSample prompt_source;
    prompt_source.object_video = object_video;
    prompt_source.mask = mask;
    return detail::run_pipeline(TaskKind::Insertion, lat, prompt_source, ck, cfg);
}

}  // namespace velab
