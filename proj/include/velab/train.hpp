#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "velab/checkpoint.hpp"
#include "velab/model.hpp"
#include "velab/rng.hpp"
#include "velab/synth_dataset.hpp"
#include "velab/video.hpp"

namespace velab {

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 0.0;
    int batch_size = 1;          // via gradient accumulation
    int max_steps = 100;
    double lambda_ec = 0.1;
    double timestep_loc = 0.0;   // logit-normal parameters
    double timestep_scale = 1.0;
    double epsilon_prior = 1e-3;
    double kl_floor = 1e-8;
    std::uint64_t seed = 0;
    int checkpoint_interval = 100;

    void validate() const {
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be > 0");
        if (lambda_ec < 0) throw std::invalid_argument("lambda_ec must be >= 0");
        if (epsilon_prior <= 0) throw std::invalid_argument("epsilon_prior must be > 0");
    }
};

struct LossBreakdown {
    double denoise_removal = 0.0;
    double denoise_insertion = 0.0;
    double ec = 0.0;
    double total = 0.0;
};

// t = sigmoid(g), g ~ Normal(loc, scale); strictly inside (0,1)
inline double sample_timestep(Rng& rng, double loc, double scale) {
    const double g = rng.normal(loc, scale);
    return 1.0 / (1.0 + std::exp(-g));
}

// x_t = t*x + (1-t)*z
inline Tensor forward_noise(const Tensor& x, const Tensor& z, double t) {
    if (!x.same_shape(z)) throw std::invalid_argument("forward_noise: shape mismatch");
    Tensor out = x;
    for (long i = 0; i < out.numel(); ++i) out[i] = t * x[i] + (1.0 - t) * z[i];
    return out;
}

// v = x - z
inline Tensor velocity_target(const Tensor& x, const Tensor& z) {
    if (!x.same_shape(z)) throw std::invalid_argument("velocity_target: shape mismatch");
    Tensor out = x;
    for (long i = 0; i < out.numel(); ++i) out[i] -= z[i];
    return out;
}

inline double denoise_loss_value(const Tensor& pred, const Tensor& v) {
    if (!pred.same_shape(v)) throw std::invalid_argument("denoise_loss: shape mismatch");
    double s = 0.0;
    for (long i = 0; i < pred.numel(); ++i) {
        const double d = pred[i] - v[i];
        s += d * d;
    }
    return s / pred.numel();
}

// f^diff: per-frame distribution of the downsampled absolute difference
// between V^o and V^b, smoothed by epsilon. Rows are [frames, th*tw].
inline Tensor diff_prior(const TripletSample& s, int target_t, int target_h, int target_w,
                         double epsilon) {
    if (epsilon <= 0) throw std::invalid_argument("diff_prior: epsilon must be > 0");
    if (s.object_video.frames != target_t)
        throw std::invalid_argument("diff_prior: temporal size mismatch");
    VideoTensor d(s.object_video.frames, s.object_video.height, s.object_video.width);
    for (int f = 0; f < d.frames; ++f)
        for (int y = 0; y < d.height; ++y)
            for (int x = 0; x < d.width; ++x) {
                double acc = 0.0;
                for (int c = 0; c < 3; ++c)
                    acc += std::abs(s.object_video.at(f, y, x, c) - s.background_video.at(f, y, x, c));
                // summed channel difference can exceed 1; spread over channels
                for (int c = 0; c < 3; ++c) d.at(f, y, x, c) = std::clamp(acc, 0.0, 1.0);
            }
    const VideoTensor ds = resize_bilinear(d, target_h, target_w);
    Tensor out({target_t, target_h * target_w});
    for (int f = 0; f < target_t; ++f) {
        double sum = 0.0;
        for (int y = 0; y < target_h; ++y)
            for (int x = 0; x < target_w; ++x) {
                const double v = ds.at(f, y, x, 0) + epsilon;
                out.at2(f, y * target_w + x) = v;
                sum += v;
            }
        for (int i = 0; i < target_h * target_w; ++i) out.at2(f, i) /= sum;
    }
    return out;
}

// plain-tensor KL(p||q) with floored q, summed over space, averaged over frames
inline double kl_value(const Tensor& p, const Tensor& q, double floor_q) {
    if (!p.same_shape(q)) throw std::invalid_argument("kl: shape mismatch");
    const int s_dim = p.shape.back();
    const long frames = p.numel() / s_dim;
    double total = 0.0;
    for (long i = 0; i < p.numel(); ++i)
        if (p[i] > 0.0) total += p[i] * std::log(p[i] / std::max(q[i], floor_q));
    return total / frames;
}

inline double ec_loss_value(const Tensor& f_diff, const Tensor& f_rm, const Tensor& f_in,
                            double floor_q) {
    return kl_value(f_diff, f_rm, floor_q) + kl_value(f_diff, f_in, floor_q);
}

// ---------------------------------------------------------------- optimizer

// AdamW with decoupled weight decay over the trainable leaves.
class AdamW {
public:
    AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (auto& [name, v] : params.tensors) {
            if (!v->requires_grad || v->grad.data.empty()) continue;
            auto& m = m_[name];
            auto& s = s_[name];
            if (m.data.empty()) {
                m = Tensor(v->val.shape);
                s = Tensor(v->val.shape);
            }
            for (long i = 0; i < v->val.numel(); ++i) {
                const double g = v->grad[i];
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                s[i] = beta2_ * s[i] + (1.0 - beta2_) * g * g;
                const double mhat = m[i] / bc1;
                const double shat = s[i] / bc2;
                v->val[i] -= lr_ * (mhat / (std::sqrt(shat) + eps_) + wd_ * v->val[i]);
            }
        }
    }

    double lr() const { return lr_; }

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, Tensor> m_, s_;
};

// ---------------------------------------------------------------- train step

struct StepGraph {
    ag::Value total;
    LossBreakdown breakdown;
};

// Build the full-loss graph for one triplet: both branches share the sample,
// each draws its own timestep and noise. Removal: x = x^b, c = [x^o;x^m].
// Insertion: x = x^o, c = [x^b;x^f].
inline StepGraph build_step_graph(const TripletSample& sample, ParamStore& params,
                                  const ModelConfig& mcfg, const TrainConfig& tcfg, Rng& rng) {
    const TripletLatents lat = encode_triplet(sample, mcfg.patch_size);
    const Tensor e_f = foreground_tokens(sample, params, mcfg);

    struct Branch {
        ag::Value denoise;
        ag::Value f_map;
        int t_lat = 0, h2 = 0, w2 = 0;
    };
    auto run_branch = [&](TaskKind task) {
        const LatentGrid& x_clean = task == TaskKind::Removal ? lat.x_bg : lat.x_obj;
        const LatentGrid cond = build_condition(task, lat);
        const double t = sample_timestep(rng, tcfg.timestep_loc, tcfg.timestep_scale);
        LatentGrid z = x_clean;
        for (auto& v : z.data.data) v = rng.normal();
        const Tensor x_t = forward_noise(x_clean.data, z.data, t);
        const Tensor v_target = velocity_target(x_clean.data, z.data);
        LatentGrid x_t_grid = x_clean;
        x_t_grid.data = x_t;

        ag::Value projected = project_foreground(e_f, params);
        PromptEmbedding prompt = build_prompt(task, projected, params, mcfg);
        DitOutput out = dit_forward(x_t_grid, cond, prompt, t, params, mcfg);

        Branch br;
        br.denoise = ag::mse(out.velocity, ag::constant(v_target));
        ag::Value pooled = pool_attention(out.attn, prompt.placeholder_index);
        br.f_map = map_effect(pooled, params, out.t_lat, out.h2 * out.w2);
        br.t_lat = out.t_lat;
        br.h2 = out.h2;
        br.w2 = out.w2;
        return br;
    };

    Branch rm = run_branch(TaskKind::Removal);
    Branch in = run_branch(TaskKind::Insertion);

    const Tensor f_diff = diff_prior(sample, rm.t_lat, rm.h2, rm.w2, tcfg.epsilon_prior);
    ag::Value ec = ag::add(ag::kl_floored(f_diff, rm.f_map, tcfg.kl_floor),
                           ag::kl_floored(f_diff, in.f_map, tcfg.kl_floor));
    ag::Value total = ag::add(ag::add(rm.denoise, in.denoise), ag::scale(ec, tcfg.lambda_ec));

    StepGraph g;
    g.total = total;
    g.breakdown.denoise_removal = rm.denoise->val[0];
    g.breakdown.denoise_insertion = in.denoise->val[0];
    g.breakdown.ec = ec->val[0];
    g.breakdown.total = total->val[0];
    return g;
}

// One optimization step on a single triplet: build graph, backpropagate,
// AdamW update. Throws on non-finite loss.
inline LossBreakdown train_step(const TripletSample& sample, ParamStore& params, AdamW& opt,
                                const ModelConfig& mcfg, const TrainConfig& tcfg, Rng& rng) {
    params.zero_grads();
    StepGraph g = build_step_graph(sample, params, mcfg, tcfg, rng);
    if (!std::isfinite(g.breakdown.total))
        throw std::runtime_error("train_step: non-finite loss (total=" +
                                 std::to_string(g.breakdown.total) + ")");
    ag::backward(g.total);
    opt.step(params);
    return g.breakdown;
}

// ---------------------------------------------------------------- train loop

struct TrainResult {
    std::vector<LossBreakdown> history;
    fs::path final_checkpoint;
};

inline void append_loss_log(const fs::path& file, int step, double lr, const LossBreakdown& l,
                            double wall_ms) {
    std::ofstream out(file, std::ios::app);
    json rec = {{"step", step},
                {"lr", lr},
                {"denoise_removal", l.denoise_removal},
                {"denoise_insertion", l.denoise_insertion},
                {"ec", l.ec},
                {"total", l.total},
                {"wall_ms", wall_ms}};
    out << rec.dump() << "\n";
}

// Iterates shuffled triplets with gradient accumulation; writes step_<N>
// checkpoints and an append-only loss log into run_dir.
inline TrainResult train_loop(const std::vector<TripletSample>& dataset, ParamStore& params,
                              const ModelConfig& mcfg, const TrainConfig& tcfg,
                              const fs::path& run_dir) {
    tcfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train_loop: empty dataset");
    for (const auto& s : dataset) {
        const auto viol = validate_triplet(s);
        if (!viol.empty()) throw std::runtime_error("train_loop: invalid triplet: " + viol.front());
    }
    fs::create_directories(run_dir);
    const fs::path log_file = run_dir / "loss_log.jsonl";

    AdamW opt(tcfg.learning_rate, tcfg.weight_decay);
    Rng rng(tcfg.seed);
    std::vector<int> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::size_t cursor = order.size();  // trigger shuffle on first use

    TrainResult res;
    std::vector<double> loss_history;
    for (int step = 1; step <= tcfg.max_steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        params.zero_grads();
        LossBreakdown acc;
        for (int b = 0; b < tcfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            const TripletSample& sample = dataset[static_cast<std::size_t>(order[cursor++])];
            StepGraph g = build_step_graph(sample, params, mcfg, tcfg, rng);
            if (!std::isfinite(g.breakdown.total))
                throw std::runtime_error("train_loop: non-finite loss at step " + std::to_string(step));
            // scale so accumulated gradients average over the batch
            ag::backward(tcfg.batch_size > 1 ? ag::scale(g.total, 1.0 / tcfg.batch_size) : g.total);
            acc.denoise_removal += g.breakdown.denoise_removal / tcfg.batch_size;
            acc.denoise_insertion += g.breakdown.denoise_insertion / tcfg.batch_size;
            acc.ec += g.breakdown.ec / tcfg.batch_size;
            acc.total += g.breakdown.total / tcfg.batch_size;
        }
        opt.step(params);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        append_loss_log(log_file, step, tcfg.learning_rate, acc, wall_ms);
        res.history.push_back(acc);
        loss_history.push_back(acc.total);
        if (step % tcfg.checkpoint_interval == 0 || step == tcfg.max_steps) {
            const fs::path ck = run_dir / ("step_" + std::to_string(step));
            save_checkpoint(params, mcfg, step, tcfg.seed, loss_history, ck);
            res.final_checkpoint = ck;
        }
    }
    return res;
}

}  // namespace velab
