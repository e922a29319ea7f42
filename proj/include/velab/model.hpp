#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "velab/autograd.hpp"
#include "velab/rng.hpp"
#include "velab/video.hpp"

namespace velab {

enum class TaskKind { Removal, Insertion };

struct ModelConfig {
    int patch_size = 2;      // p; latent channels are 3*p*p
    int model_dim = 32;      // d
    int n_blocks = 2;
    int n_heads = 4;
    int prompt_len = 5;
    int token_dim = 16;
    int lora_rank = 4;
    double lambda_ec = 0.1;
    int fg_patch = 32;       // foreground crop is resized to fg_patch^2
    int mapper_hidden = 16;

    int c_lat() const { return 3 * patch_size * patch_size; }

    void validate() const {
        if (model_dim % n_heads != 0) throw std::invalid_argument("model_dim must divide by n_heads");
        if (lora_rank < 1) throw std::invalid_argument("lora_rank must be >= 1");
        if (lambda_ec < 0) throw std::invalid_argument("lambda_ec must be >= 0");
        if (prompt_len != 5) throw std::invalid_argument("prompt templates are 5 tokens long");
    }
};

// Spatiotemporal latent tensor, layout [t_lat, h_lat, w_lat, c_lat].
struct LatentGrid {
    int t_lat = 0, h_lat = 0, w_lat = 0, c_lat = 0;
    Tensor data;

    LatentGrid() = default;
    LatentGrid(int t, int h, int w, int c) : t_lat(t), h_lat(h), w_lat(w), c_lat(c), data({t, h, w, c}) {}

    bool same_shape(const LatentGrid& o) const {
        return t_lat == o.t_lat && h_lat == o.h_lat && w_lat == o.w_lat && c_lat == o.c_lat;
    }
    long numel() const { return data.numel(); }
};

// ---------------------------------------------------------------- latent codec
// Exact invertible stand-in for the VAE: lossless space-to-channel
// rearrangement of p x p patches. decode(encode(v)) == v.

inline LatentGrid encode_latent(const VideoTensor& v, int p) {
    if (v.height % p != 0 || v.width % p != 0)
        throw std::invalid_argument("encode_latent: dimensions not divisible by patch size");
    const int h = v.height / p, w = v.width / p, c = 3 * p * p;
    LatentGrid g(v.frames, h, w, c);
    for (int f = 0; f < v.frames; ++f)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int py = 0; py < p; ++py)
                    for (int px = 0; px < p; ++px)
                        for (int ch = 0; ch < 3; ++ch) {
                            const int lc = (py * p + px) * 3 + ch;
                            g.data[((static_cast<long>(f) * h + y) * w + x) * c + lc] =
                                v.at(f, y * p + py, x * p + px, ch);
                        }
    return g;
}

inline VideoTensor decode_latent(const LatentGrid& g, int p) {
    if (g.c_lat != 3 * p * p) throw std::invalid_argument("decode_latent: channel mismatch");
    VideoTensor v(g.t_lat, g.h_lat * p, g.w_lat * p);
    for (int f = 0; f < g.t_lat; ++f)
        for (int y = 0; y < g.h_lat; ++y)
            for (int x = 0; x < g.w_lat; ++x)
                for (int py = 0; py < p; ++py)
                    for (int px = 0; px < p; ++px)
                        for (int ch = 0; ch < 3; ++ch) {
                            const int lc = (py * p + px) * 3 + ch;
                            v.at(f, y * p + py, x * p + px, ch) = std::clamp(
                                g.data[((static_cast<long>(f) * g.h_lat + y) * g.w_lat + x) * g.c_lat + lc],
                                0.0, 1.0);
                        }
    return v;
}

inline LatentGrid encode_mask(const MaskVideo& m, int p) {
    VideoTensor v(m.frames, m.height, m.width);
    for (int f = 0; f < m.frames; ++f)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                for (int c = 0; c < 3; ++c) v.at(f, y, x, c) = m.at(f, y, x);
    return encode_latent(v, p);
}

inline LatentGrid concat_channels(const LatentGrid& a, const LatentGrid& b) {
    if (a.t_lat != b.t_lat || a.h_lat != b.h_lat || a.w_lat != b.w_lat)
        throw std::invalid_argument("concat_channels: spatial shape mismatch");
    LatentGrid out(a.t_lat, a.h_lat, a.w_lat, a.c_lat + b.c_lat);
    const long n = static_cast<long>(a.t_lat) * a.h_lat * a.w_lat;
    for (long i = 0; i < n; ++i) {
        for (int c = 0; c < a.c_lat; ++c) out.data[i * out.c_lat + c] = a.data[i * a.c_lat + c];
        for (int c = 0; c < b.c_lat; ++c) out.data[i * out.c_lat + a.c_lat + c] = b.data[i * b.c_lat + c];
    }
    return out;
}

inline LatentGrid hadamard(const LatentGrid& a, const LatentGrid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("hadamard: shape mismatch");
    LatentGrid out = a;
    for (long i = 0; i < out.numel(); ++i) out.data[i] *= b.data[i];
    return out;
}

struct TripletLatents {
    LatentGrid x_obj;   // x^o
    LatentGrid x_bg;    // x^b
    LatentGrid x_mask;  // x^m
};

inline TripletLatents encode_triplet(const TripletSample& s, int p) {
    return {encode_latent(s.object_video, p), encode_latent(s.background_video, p),
            encode_mask(s.mask, p)};
}

// Removal: c = [x^o ; x^m].  Insertion: c = [x^b ; x^f], x^f = x^o (.) x^m.
inline LatentGrid build_condition(TaskKind task, const TripletLatents& lat) {
    if (task == TaskKind::Removal) return concat_channels(lat.x_obj, lat.x_mask);
    return concat_channels(lat.x_bg, hadamard(lat.x_obj, lat.x_mask));
}

// ---------------------------------------------------------------- parameters

struct ParamStore {
    std::map<std::string, ag::Value> tensors;

    ag::Value& at(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::invalid_argument("unknown parameter: " + name);
        return it->second;
    }
    const ag::Value& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::invalid_argument("unknown parameter: " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return tensors.count(name) > 0; }

    void add(const std::string& name, Tensor t, bool trainable) {
        tensors.emplace(name, ag::leaf(std::move(t), trainable));
    }

    std::vector<std::string> trainable_names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : tensors)
            if (v->requires_grad) out.push_back(k);
        return out;
    }

    void zero_grads() {
        for (auto& [k, v] : tensors)
            if (v->requires_grad && !v->grad.data.empty())
                std::fill(v->grad.data.begin(), v->grad.data.end(), 0.0);
    }
};

// Token table vocabulary. Templates:
//   removal   = REMOVE THE <object> FROM VIDEO
//   insertion = INSERT THE <object> INTO VIDEO
enum TokenWord { kRemove = 0, kInsert, kThe, kFrom, kInto, kVideo, kObjectSlot, kVocabSize };
constexpr int kPlaceholderIndex = 2;

inline std::array<int, 5> prompt_template(TaskKind task) {
    if (task == TaskKind::Removal) return {kRemove, kThe, kObjectSlot, kFrom, kVideo};
    return {kInsert, kThe, kObjectSlot, kInto, kVideo};
}

struct LoraSpec {
    std::vector<std::string> target_layers;  // parameter names holding [out, in] weights
    int rank = 4;
};

// Default placement: attention projections q, k, v, o (self and cross) and
// both feed-forward linears, in every block.
inline LoraSpec default_lora_spec(const ModelConfig& cfg) {
    LoraSpec spec;
    spec.rank = cfg.lora_rank;
    for (int b = 0; b < cfg.n_blocks; ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        for (const char* attn : {"self.", "cross."})
            for (const char* proj : {"q.w", "k.w", "v.w", "o.w"})
                spec.target_layers.push_back(pre + attn + proj);
        spec.target_layers.push_back(pre + "ffn0.w");
        spec.target_layers.push_back(pre + "ffn2.w");
    }
    return spec;
}

// Attach trainable low-rank factors to targeted frozen weights. A is Kaiming,
// B is zero, so the adapted forward equals the frozen base at init.
inline void apply_lora(ParamStore& params, const LoraSpec& spec, Rng& rng) {
    for (const auto& name : spec.target_layers) {
        const auto& w = params.at(name);  // throws on unknown layer
        const int out = w->val.dim(0), in = w->val.dim(1);
        params.add(name + ".lora_A", Tensor::kaiming(spec.rank, in, rng), true);
        params.add(name + ".lora_B", Tensor::zeros({out, spec.rank}), true);
    }
}

inline ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed, bool with_lora = true) {
    cfg.validate();
    Rng rng(seed);
    ParamStore p;
    const int d = cfg.model_dim, c = cfg.c_lat(), td = cfg.token_dim;

    // adaptor: space-to-depth(2) on [x_t ; c] then a linear, equivalent to a
    // 3D conv with kernel/stride 1x2x2. Input dim = 4 patch cells * 3c.
    const int a_in = 4 * 3 * c;
    Tensor aw = Tensor::xavier(d, a_in, rng);
    // sub-kernel over the x_t channels (first c of each patch cell) is an
    // average-pool copy; the condition channels keep their Xavier init
    for (int j = 0; j < d; ++j)
        for (int cell = 0; cell < 4; ++cell)
            for (int ch = 0; ch < c; ++ch)
                aw.at2(j, cell * 3 * c + ch) = (ch == j && j < c) ? 0.25 : 0.0;
    p.add("adaptor.w", std::move(aw), true);
    p.add("adaptor.b", Tensor::zeros({d}), true);

    p.add("token_table", Tensor::randn({kVocabSize, td}, rng, 0.5), true);

    // foreground encoder: two strided 3x3 convs + GAP (frozen CLIP stand-in)
    p.add("fg.conv1.w", Tensor::kaiming(8, 3 * 9, rng), false);
    p.add("fg.conv1.b", Tensor::zeros({8}), false);
    p.add("fg.conv2.w", Tensor::kaiming(td, 8 * 9, rng), false);
    p.add("fg.conv2.b", Tensor::zeros({td}), false);

    // projector: two MLP blocks (LN, linear, GELU, linear), residual on the
    // second, final LN applied in the forward
    for (const char* blk : {"projector.b1.", "projector.b2."}) {
        p.add(std::string(blk) + "l1.w", Tensor::xavier(td, td, rng), true);
        p.add(std::string(blk) + "l1.b", Tensor::zeros({td}), true);
        p.add(std::string(blk) + "l2.w", Tensor::xavier(td, td, rng), true);
        p.add(std::string(blk) + "l2.b", Tensor::zeros({td}), true);
    }

    // timestep embedding MLP + per-block modulation heads (frozen base)
    p.add("tmlp.l1.w", Tensor::xavier(d, d, rng), false);
    p.add("tmlp.l1.b", Tensor::zeros({d}), false);
    p.add("tmlp.l2.w", Tensor::xavier(d, d, rng), false);
    p.add("tmlp.l2.b", Tensor::zeros({d}), false);

    for (int b = 0; b < cfg.n_blocks; ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        for (const char* proj : {"self.q.w", "self.k.w", "self.v.w", "self.o.w", "cross.q.w",
                                 "cross.o.w"})
            p.add(pre + proj, Tensor::xavier(d, d, rng), false);
        p.add(pre + "cross.k.w", Tensor::xavier(d, td, rng), false);
        p.add(pre + "cross.v.w", Tensor::xavier(d, td, rng), false);
        p.add(pre + "ffn0.w", Tensor::xavier(4 * d, d, rng), false);
        p.add(pre + "ffn0.b", Tensor::zeros({4 * d}), false);
        p.add(pre + "ffn2.w", Tensor::xavier(d, 4 * d, rng), false);
        p.add(pre + "ffn2.b", Tensor::zeros({d}), false);
        p.add(pre + "mod.w", Tensor::randn({4 * d, d}, rng, 0.02), false);
        p.add(pre + "mod.b", Tensor::zeros({4 * d}), false);
    }

    p.add("head.w", Tensor::xavier(4 * c, d, rng), false);
    p.add("head.b", Tensor::zeros({4 * c}), false);

    // mapper: per-position MLP on the pooled attention channel
    p.add("mapper.l1.w", Tensor::xavier(cfg.mapper_hidden, 1, rng), true);
    p.add("mapper.l1.b", Tensor::zeros({cfg.mapper_hidden}), true);
    p.add("mapper.l2.w", Tensor::xavier(1, cfg.mapper_hidden, rng), true);
    p.add("mapper.l2.b", Tensor::zeros({1}), true);

    if (with_lora) {
        Rng lora_rng(derive_seed(seed, 0x10aa));
        apply_lora(p, default_lora_spec(cfg), lora_rng);
    }
    return p;
}

// ---------------------------------------------------------------- prompt path

// Tight bounding-box crop of the masked object from the frame with maximal
// mask area, resized to the encoder patch.
inline VideoTensor foreground_crop(const TripletSample& s, int patch) {
    int best_f = -1;
    long best_area = 0;
    for (int f = 0; f < s.mask.frames; ++f) {
        long area = 0;
        for (int y = 0; y < s.mask.height; ++y)
            for (int x = 0; x < s.mask.width; ++x)
                if (s.mask.on(f, y, x)) ++area;
        if (area > best_area) {
            best_area = area;
            best_f = f;
        }
    }
    if (best_f < 0) throw std::invalid_argument("foreground_crop: mask empty in every frame");
    int y0 = s.mask.height, y1 = -1, x0 = s.mask.width, x1 = -1;
    for (int y = 0; y < s.mask.height; ++y)
        for (int x = 0; x < s.mask.width; ++x)
            if (s.mask.on(best_f, y, x)) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
    VideoTensor crop(1, y1 - y0 + 1, x1 - x0 + 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            for (int ch = 0; ch < 3; ++ch)
                crop.at(0, y - y0, x - x0, ch) =
                    s.mask.on(best_f, y, x) ? s.object_video.at(best_f, y, x, ch) : 0.0;
    return resize_bilinear(crop, patch, patch);
}

namespace detail {

// plain 3x3 stride-2 pad-1 conv on [h,w,cin] -> [ceil(h/2), ceil(w/2), cout]
inline std::vector<double> conv3x3s2(const std::vector<double>& in, int h, int w, int cin,
                                     const Tensor& weight, const Tensor& bias, int cout, int& oh,
                                     int& ow, bool apply_gelu) {
    oh = (h + 1) / 2;
    ow = (w + 1) / 2;
    std::vector<double> out(static_cast<std::size_t>(oh) * ow * cout, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int co = 0; co < cout; ++co) {
                double acc = bias[co];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sy = 2 * y + ky - 1, sx = 2 * x + kx - 1;
                        if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                        for (int ci = 0; ci < cin; ++ci)
                            acc += weight.at2(co, (ky * 3 + kx) * cin + ci) *
                                   in[(static_cast<std::size_t>(sy) * w + sx) * cin + ci];
                    }
                if (apply_gelu) acc = 0.5 * acc * (1.0 + std::erf(acc * M_SQRT1_2));
                out[(static_cast<std::size_t>(y) * ow + x) * cout + co] = acc;
            }
    return out;
}

}  // namespace detail

// e^f: encode the cropped foreground patch with the small frozen conv encoder.
inline Tensor foreground_tokens(const TripletSample& s, const ParamStore& params,
                                const ModelConfig& cfg) {
    const VideoTensor crop = foreground_crop(s, cfg.fg_patch);
    std::vector<double> x(crop.data.begin(), crop.data.end());  // [h,w,3]
    int h = cfg.fg_patch, w = cfg.fg_patch, oh = 0, ow = 0;
    x = detail::conv3x3s2(x, h, w, 3, params.at("fg.conv1.w")->val, params.at("fg.conv1.b")->val, 8,
                          oh, ow, true);
    int oh2 = 0, ow2 = 0;
    x = detail::conv3x3s2(x, oh, ow, 8, params.at("fg.conv2.w")->val, params.at("fg.conv2.b")->val,
                          cfg.token_dim, oh2, ow2, true);
    Tensor e({cfg.token_dim});
    const long cells = static_cast<long>(oh2) * ow2;
    for (long i = 0; i < cells; ++i)
        for (int c = 0; c < cfg.token_dim; ++c) e[c] += x[static_cast<std::size_t>(i) * cfg.token_dim + c];
    for (int c = 0; c < cfg.token_dim; ++c) e[c] /= cells;
    return e;
}

namespace detail {

inline ag::Value mlp_block(const ag::Value& x, ParamStore& p, const std::string& pre, bool residual) {
    ag::Value y = ag::layernorm_last(x);
    y = ag::linear(y, p.at(pre + "l1.w"), p.at(pre + "l1.b"));
    y = ag::gelu(y);
    y = ag::linear(y, p.at(pre + "l2.w"), p.at(pre + "l2.b"));
    return residual ? ag::add(x, y) : y;
}

}  // namespace detail

// P_psi(e^f): two MLP blocks, residual on the second, final LayerNorm.
inline ag::Value project_foreground(const Tensor& e_f, ParamStore& params) {
    ag::Value x = ag::constant(Tensor({1, static_cast<int>(e_f.numel())}, e_f.data));
    x = detail::mlp_block(x, params, "projector.b1.", false);
    x = detail::mlp_block(x, params, "projector.b2.", true);
    return ag::layernorm_last(x);
}

struct PromptEmbedding {
    ag::Value tokens;  // [prompt_len, token_dim]
    int placeholder_index = kPlaceholderIndex;
};

// e^prompt: task template from the token table with the projected foreground
// embedding written into the placeholder slot.
inline PromptEmbedding build_prompt(TaskKind task, const ag::Value& projected, ParamStore& params,
                                    const ModelConfig& cfg) {
    const auto tmpl = prompt_template(task);
    const int td = cfg.token_dim;
    auto word_map = std::make_shared<std::vector<long>>();
    auto slot_map = std::make_shared<std::vector<long>>();
    for (int i = 0; i < cfg.prompt_len; ++i)
        for (int j = 0; j < td; ++j) {
            const bool slot = i == kPlaceholderIndex;
            word_map->push_back(slot ? -1 : static_cast<long>(tmpl[static_cast<std::size_t>(i)]) * td + j);
            slot_map->push_back(slot ? j : -1);
        }
    ag::Value words = ag::gather(params.at("token_table"), word_map, {cfg.prompt_len, td});
    ag::Value slot = ag::gather(projected, slot_map, {cfg.prompt_len, td});
    return {ag::add(words, slot), kPlaceholderIndex};
}

// ---------------------------------------------------------------- transformer

struct AttentionStack {
    // per block, per head: [tokens, prompt_len] rows summing to 1
    std::vector<std::vector<ag::Value>> maps;
};

struct DitOutput {
    ag::Value velocity;  // [t, h, w, c_lat]
    AttentionStack attn;
    int t_lat = 0, h2 = 0, w2 = 0;  // pooled-map resolution
};

namespace detail {

inline Tensor sinusoidal_embed(double t, int dim) {
    Tensor e({1, dim});
    for (int i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / dim);
        e[2 * i] = std::sin(1000.0 * t * freq);
        e[2 * i + 1] = std::cos(1000.0 * t * freq);
    }
    return e;
}

// fixed 3-axis sinusoidal positional embedding for tokens on a (t,h,w) grid
inline Tensor positional_embed(int t_lat, int h, int w, int dim) {
    Tensor pe({t_lat * h * w, dim});
    const int per_axis = dim / 3;
    for (int f = 0; f < t_lat; ++f)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const long row = (static_cast<long>(f) * h + y) * w + x;
                const double coords[3] = {static_cast<double>(f), static_cast<double>(y),
                                          static_cast<double>(x)};
                for (int axis = 0; axis < 3; ++axis) {
                    const int base = axis * per_axis;
                    const int n = axis == 2 ? dim - 2 * per_axis : per_axis;
                    for (int i = 0; i < n; ++i) {
                        const double freq = std::pow(10000.0, -static_cast<double>(i / 2 * 2) / std::max(n, 1));
                        const double v = coords[axis] * freq;
                        pe[row * dim + base + i] = i % 2 == 0 ? std::sin(v) : std::cos(v);
                    }
                }
            }
    for (auto& v : pe.data) v *= 0.1;
    return pe;
}

// plain-tensor forward of the frozen timestep MLP; returns the shared embedding
inline Tensor timestep_features(double t, ParamStore& p, int d) {
    Tensor e = sinusoidal_embed(t, d);
    auto lin = [&](const Tensor& x, const Tensor& w, const Tensor& b, bool act) {
        Tensor y({1, w.dim(0)});
        for (int o = 0; o < w.dim(0); ++o) {
            double acc = b[o];
            for (int i = 0; i < w.dim(1); ++i) acc += w.at2(o, i) * x[i];
            y[o] = act ? 0.5 * acc * (1.0 + std::erf(acc * M_SQRT1_2)) : acc;
        }
        return y;
    };
    Tensor h = lin(e, p.at("tmlp.l1.w")->val, p.at("tmlp.l1.b")->val, true);
    return lin(h, p.at("tmlp.l2.w")->val, p.at("tmlp.l2.b")->val, false);
}

// effective projection weight: frozen base plus LoRA delta when present
inline ag::Value effective_weight(ParamStore& p, const std::string& name) {
    ag::Value w = p.at(name);
    if (p.has(name + ".lora_A"))
        w = ag::add(w, ag::matmul(p.at(name + ".lora_B"), p.at(name + ".lora_A")));
    return w;
}

struct AttnResult {
    ag::Value out;
    std::vector<ag::Value> maps;  // per head [N, L]
};

// transpose of a [m,n] value via gather
inline ag::Value transpose2(const ag::Value& a) {
    const int m = a->val.dim(0), n = a->val.dim(1);
    auto map = std::make_shared<std::vector<long>>(static_cast<std::size_t>(m) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i)
            (*map)[static_cast<std::size_t>(j) * m + i] = static_cast<long>(i) * n + j;
    return ag::gather(a, map, {n, m});
}

// multi-head attention; q from x [N,d], k/v from kv [L,dk]
inline AttnResult attention(ParamStore& p, const std::string& pre, const ag::Value& x,
                            const ag::Value& kv, int n_heads, bool record_maps) {
    const int d = x->val.shape.back();
    const int dh = d / n_heads;
    ag::Value q = ag::linear(x, effective_weight(p, pre + "q.w"));
    ag::Value k = ag::linear(kv, effective_weight(p, pre + "k.w"));
    ag::Value v = ag::linear(kv, effective_weight(p, pre + "v.w"));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<ag::Value> heads, maps;
    for (int h = 0; h < n_heads; ++h) {
        ag::Value qh = ag::slice_cols(q, h * dh, dh);
        ag::Value kh = ag::slice_cols(k, h * dh, dh);
        ag::Value vh = ag::slice_cols(v, h * dh, dh);
        // scores [N, L] = qh * kh^T
        ag::Value scores = ag::scale(ag::matmul(qh, transpose2(kh)), scale);
        ag::Value attn = ag::softmax_last(scores);
        if (record_maps) maps.push_back(attn);
        heads.push_back(ag::matmul(attn, vh));
    }
    ag::Value merged = ag::concat_last(heads);
    return {ag::linear(merged, effective_weight(p, pre + "o.w")), std::move(maps)};
}

}  // namespace detail

// Adaptor: channel-concat then conv(kernel 1x2x2, stride 1x2x2), realized as
// space-to-depth + linear. Output is [t, h/2, w/2] tokens of width model_dim.
inline ag::Value adaptor_fuse(const LatentGrid& x_t, const LatentGrid& c, ParamStore& params,
                              const ModelConfig& cfg) {
    if (x_t.t_lat != c.t_lat || x_t.h_lat != c.h_lat || x_t.w_lat != c.w_lat)
        throw std::invalid_argument("adaptor_fuse: grid shape mismatch");
    if (x_t.h_lat % 2 != 0 || x_t.w_lat % 2 != 0)
        throw std::invalid_argument("adaptor_fuse: spatial dims must be even");
    const LatentGrid merged = concat_channels(x_t, c);
    const int t = merged.t_lat, h = merged.h_lat, w = merged.w_lat, ch = merged.c_lat;
    const int h2 = h / 2, w2 = w / 2;
    auto map = std::make_shared<std::vector<long>>();
    map->reserve(static_cast<std::size_t>(t) * h2 * w2 * 4 * ch);
    for (int f = 0; f < t; ++f)
        for (int y = 0; y < h2; ++y)
            for (int x = 0; x < w2; ++x)
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx)
                        for (int cc = 0; cc < ch; ++cc)
                            map->push_back(
                                ((static_cast<long>(f) * h + 2 * y + dy) * w + 2 * x + dx) * ch + cc);
    ag::Value grid = ag::constant(merged.data);
    ag::Value patches = ag::gather(grid, map, {t * h2 * w2, 4 * ch});
    return ag::linear(patches, params.at("adaptor.w"), params.at("adaptor.b"));
}

// Full v_theta forward: adaptor fusion, positional embedding, n_blocks of
// (t-modulated self-attention, cross-attention against the prompt, t-modulated
// feed-forward), then a linear head and inverse rearrangement back to the
// latent shape of x_t.
inline DitOutput dit_forward(const LatentGrid& x_t, const LatentGrid& c, const PromptEmbedding& prompt,
                             double t, ParamStore& params, const ModelConfig& cfg) {
    const int d = cfg.model_dim;
    ag::Value x = adaptor_fuse(x_t, c, params, cfg);
    const int t_lat = x_t.t_lat, h2 = x_t.h_lat / 2, w2 = x_t.w_lat / 2;
    x = ag::add(x, ag::constant(detail::positional_embed(t_lat, h2, w2, d)));

    const Tensor tfeat = detail::timestep_features(t, params, d);
    DitOutput out;
    for (int b = 0; b < cfg.n_blocks; ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        // frozen modulation head: [4d] -> scale/shift for the two norm sites
        const Tensor& mw = params.at(pre + "mod.w")->val;
        const Tensor& mb = params.at(pre + "mod.b")->val;
        Tensor mod({4 * d});
        for (int o = 0; o < 4 * d; ++o) {
            double acc = mb[o];
            for (int i = 0; i < d; ++i) acc += mw.at2(o, i) * tfeat[i];
            mod[o] = acc;
        }
        Tensor s1({d}), b1({d}), s2({d}), b2({d});
        for (int i = 0; i < d; ++i) {
            s1[i] = mod[i];
            b1[i] = mod[d + i];
            s2[i] = mod[2 * d + i];
            b2[i] = mod[3 * d + i];
        }
        ag::Value y = ag::rowwise_affine(ag::layernorm_last(x), s1, b1);
        auto self_res = detail::attention(params, pre + "self.", y, y, cfg.n_heads, false);
        x = ag::add(x, self_res.out);
        ag::Value y2 = ag::layernorm_last(x);
        auto cross_res = detail::attention(params, pre + "cross.", y2, prompt.tokens, cfg.n_heads, true);
        x = ag::add(x, cross_res.out);
        out.attn.maps.push_back(std::move(cross_res.maps));
        ag::Value y3 = ag::rowwise_affine(ag::layernorm_last(x), s2, b2);
        ag::Value f = ag::linear(y3, detail::effective_weight(params, pre + "ffn0.w"),
                                 params.at(pre + "ffn0.b"));
        f = ag::gelu(f);
        f = ag::linear(f, detail::effective_weight(params, pre + "ffn2.w"), params.at(pre + "ffn2.b"));
        x = ag::add(x, f);
    }
    x = ag::layernorm_last(x);
    x = ag::linear(x, params.at("head.w"), params.at("head.b"));  // [N2, 4*c_lat]

    // inverse rearrangement: each head channel group owns one 2x2 cell
    const int cl = cfg.c_lat();
    auto map = std::make_shared<std::vector<long>>(
        static_cast<std::size_t>(t_lat) * x_t.h_lat * x_t.w_lat * cl);
    for (int f = 0; f < t_lat; ++f)
        for (int y = 0; y < x_t.h_lat; ++y)
            for (int xx = 0; xx < x_t.w_lat; ++xx)
                for (int cc = 0; cc < cl; ++cc) {
                    const long dst = ((static_cast<long>(f) * x_t.h_lat + y) * x_t.w_lat + xx) * cl + cc;
                    const long tok = (static_cast<long>(f) * h2 + y / 2) * w2 + xx / 2;
                    const int cell = (y % 2) * 2 + (xx % 2);
                    (*map)[static_cast<std::size_t>(dst)] = tok * (4 * cl) + cell * cl + cc;
                }
    out.velocity = ag::gather(x, map, {t_lat, x_t.h_lat, x_t.w_lat, cl});
    out.t_lat = t_lat;
    out.h2 = h2;
    out.w2 = w2;
    return out;
}

// Mean over heads, placeholder-slot column only, elementwise max over blocks.
// Result: [tokens, 1] nonnegative activation map at the pooled resolution.
inline ag::Value pool_attention(const AttentionStack& stack, int placeholder_index) {
    if (stack.maps.empty() || stack.maps[0].empty())
        throw std::invalid_argument("pool_attention: empty stack");
    std::vector<ag::Value> per_block;
    for (const auto& heads : stack.maps) {
        ag::Value mean = ag::mean_stack(heads);
        per_block.push_back(ag::slice_cols(mean, placeholder_index, 1));
    }
    return ag::max_stack(per_block);
}

// G_omega: per-position MLP on the pooled map, then per-frame spatial softmax.
// Returns [t_lat, h2*w2] rows summing to 1.
inline ag::Value map_effect(const ag::Value& pooled, ParamStore& params, int t_lat, int spatial) {
    ag::Value z = ag::linear(pooled, params.at("mapper.l1.w"), params.at("mapper.l1.b"));
    z = ag::gelu(z);
    z = ag::linear(z, params.at("mapper.l2.w"), params.at("mapper.l2.b"));
    return ag::softmax_last(ag::reshape(z, {t_lat, spatial}));
}

}  // namespace velab
