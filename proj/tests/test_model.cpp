#include <catch2/catch_amalgamated.hpp>

#include "velab/model.hpp"
#include "velab/rng.hpp"
#include "velab/synth.hpp"

using namespace velab;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.patch_size = 2;
    cfg.model_dim = 16;
    cfg.n_blocks = 2;
    cfg.n_heads = 2;
    cfg.token_dim = 8;
    cfg.lora_rank = 2;
    cfg.fg_patch = 16;
    return cfg;
}

VideoTensor random_video(int f, int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    VideoTensor v(f, h, w);
    for (auto& x : v.data) x = rng.uniform();
    return v;
}

TripletSample tiny_triplet(std::uint64_t seed) {
    const SceneSpec scene = random_scene(seed, 1, 3, 16, 16);
    return render_triplet(scene, {0});
}

}  // namespace

TEST_CASE("latent codec is exactly invertible") {
    for (int i = 0; i < 10; ++i) {
        const VideoTensor v = random_video(2, 12, 8, derive_seed(50, static_cast<std::uint64_t>(i)));
        for (int p : {2, 4}) {
            const LatentGrid g = encode_latent(v, p);
            REQUIRE(g.c_lat == 3 * p * p);
            REQUIRE(g.h_lat == v.height / p);
            const VideoTensor back = decode_latent(g, p);
            REQUIRE(back.data == v.data);
        }
    }
    REQUIRE_THROWS_AS(encode_latent(random_video(1, 10, 10, 1), 4), std::invalid_argument);
}

TEST_CASE("condition construction differs per task exactly as specified") {
    const TripletSample t = tiny_triplet(404);
    const TripletLatents lat = encode_triplet(t, 2);
    const LatentGrid c_rm = build_condition(TaskKind::Removal, lat);
    const LatentGrid c_in = build_condition(TaskKind::Insertion, lat);
    const int cl = lat.x_obj.c_lat;
    REQUIRE(c_rm.c_lat == 2 * cl);
    REQUIRE(c_in.c_lat == 2 * cl);
    const long cells = static_cast<long>(lat.x_obj.t_lat) * lat.x_obj.h_lat * lat.x_obj.w_lat;
    for (long i = 0; i < cells; ++i)
        for (int ch = 0; ch < cl; ++ch) {
            // removal: first half is x^o, second half x^m
            REQUIRE(c_rm.data[i * 2 * cl + ch] == lat.x_obj.data[i * cl + ch]);
            REQUIRE(c_rm.data[i * 2 * cl + cl + ch] == lat.x_mask.data[i * cl + ch]);
            // insertion: first half is x^b, second half x^o (.) x^m
            REQUIRE(c_in.data[i * 2 * cl + ch] == lat.x_bg.data[i * cl + ch]);
            REQUIRE(c_in.data[i * 2 * cl + cl + ch] ==
                    lat.x_obj.data[i * cl + ch] * lat.x_mask.data[i * cl + ch]);
        }
}

TEST_CASE("prompt templates follow the task grammar") {
    const auto rm = prompt_template(TaskKind::Removal);
    REQUIRE(rm == std::array<int, 5>{kRemove, kThe, kObjectSlot, kFrom, kVideo});
    const auto in = prompt_template(TaskKind::Insertion);
    REQUIRE(in == std::array<int, 5>{kInsert, kThe, kObjectSlot, kInto, kVideo});
    REQUIRE(kPlaceholderIndex == 2);
    REQUIRE(rm[kPlaceholderIndex] == kObjectSlot);
}

TEST_CASE("prompt embedding places the projection in the slot only") {
    const ModelConfig cfg = tiny_config();
    ParamStore params = init_params(cfg, 3, false);
    Rng rng(12);
    Tensor e_f = Tensor::randn({cfg.token_dim}, rng);
    ag::Value projected = project_foreground(e_f, params);
    const PromptEmbedding pe = build_prompt(TaskKind::Removal, projected, params, cfg);
    REQUIRE(pe.tokens->val.dim(0) == 5);
    const Tensor& table = params.at("token_table")->val;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < cfg.token_dim; ++j) {
            const double got = pe.tokens->val.at2(i, j);
            if (i == pe.placeholder_index)
                REQUIRE(got == projected->val[j]);
            else
                REQUIRE(got == table.at2(prompt_template(TaskKind::Removal)[static_cast<std::size_t>(i)], j));
        }
}

TEST_CASE("adaptor init averages x_t channels and halves every spatial dim") {
    const ModelConfig cfg = tiny_config();
    ParamStore params = init_params(cfg, 5, false);
    const int c = cfg.c_lat();
    const Tensor& w = params.at("adaptor.w")->val;
    // first c output rows: 0.25 on the matching x_t channel of each patch cell
    for (int j = 0; j < std::min(c, cfg.model_dim); ++j)
        for (int cell = 0; cell < 4; ++cell)
            for (int ch = 0; ch < c; ++ch)
                REQUIRE(w.at2(j, cell * 3 * c + ch) == (ch == j ? 0.25 : 0.0));
    REQUIRE(params.at("adaptor.b")->val.data == std::vector<double>(cfg.model_dim, 0.0));

    const VideoTensor v = random_video(2, 16, 16, 71);
    const LatentGrid x = encode_latent(v, cfg.patch_size);
    // zero condition isolates the average-pool sub-kernel acting on x_t
    LatentGrid cond(x.t_lat, x.h_lat, x.w_lat, 2 * x.c_lat);
    ag::Value tokens = adaptor_fuse(x, cond, params, cfg);
    REQUIRE(tokens->val.dim(0) == x.t_lat * (x.h_lat / 2) * (x.w_lat / 2));
    REQUIRE(tokens->val.dim(1) == cfg.model_dim);
    // output channel 0 equals the 2x2 average of x_t channel 0
    const int h2 = x.h_lat / 2, w2 = x.w_lat / 2;
    for (int y = 0; y < h2; ++y)
        for (int xx = 0; xx < w2; ++xx) {
            double avg = 0.0;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    avg += 0.25 * x.data[((0L * x.h_lat + 2 * y + dy) * x.w_lat + 2 * xx + dx) * x.c_lat];
            REQUIRE(tokens->val.at2(y * w2 + xx, 0) == Catch::Approx(avg).margin(1e-12));
        }
}

TEST_CASE("lora at init leaves the forward bit-identical") {
    const ModelConfig cfg = tiny_config();
    ParamStore base = init_params(cfg, 8, false);
    ParamStore adapted = init_params(cfg, 8, true);
    for (const auto& name : default_lora_spec(cfg).target_layers) {
        REQUIRE(adapted.has(name + ".lora_A"));
        const Tensor& b = adapted.at(name + ".lora_B")->val;
        for (long i = 0; i < b.numel(); ++i) REQUIRE(b[i] == 0.0);
    }

    const TripletSample t = tiny_triplet(61);
    for (int i = 0; i < 10; ++i) {
        const VideoTensor noise = random_video(t.object_video.frames, 16, 16,
                                               derive_seed(88, static_cast<std::uint64_t>(i)));
        const LatentGrid x_t = encode_latent(noise, cfg.patch_size);
        const TripletLatents lat = encode_triplet(t, cfg.patch_size);
        const LatentGrid cond = build_condition(TaskKind::Removal, lat);
        const Tensor e_f = foreground_tokens(t, base, cfg);

        auto run = [&](ParamStore& p) {
            ag::Value projected = project_foreground(e_f, p);
            const PromptEmbedding prompt = build_prompt(TaskKind::Removal, projected, p, cfg);
            return dit_forward(x_t, cond, prompt, 0.3, p, cfg).velocity->val;
        };
        const Tensor va = run(base);
        const Tensor vb = run(adapted);
        REQUIRE(va.data == vb.data);  // bit equality, not approximate
    }
}

TEST_CASE("trainable set is exactly the adaptation surface") {
    const ModelConfig cfg = tiny_config();
    ParamStore params = init_params(cfg, 4, true);
    for (const auto& name : params.trainable_names()) {
        const bool ok = name.rfind("adaptor.", 0) == 0 || name == "token_table" ||
                        name.rfind("projector.", 0) == 0 || name.rfind("mapper.", 0) == 0 ||
                        name.find(".lora_") != std::string::npos;
        INFO(name);
        REQUIRE(ok);
    }
    REQUIRE_FALSE(params.at("block0.self.q.w")->requires_grad);
    REQUIRE_FALSE(params.at("fg.conv1.w")->requires_grad);
    REQUIRE_FALSE(params.at("head.w")->requires_grad);
}

TEST_CASE("cross-attention maps are row-stochastic and pooling is max over blocks") {
    const ModelConfig cfg = tiny_config();
    ParamStore params = init_params(cfg, 14, true);
    const TripletSample t = tiny_triplet(31);
    const TripletLatents lat = encode_triplet(t, cfg.patch_size);
    const LatentGrid cond = build_condition(TaskKind::Removal, lat);
    const Tensor e_f = foreground_tokens(t, params, cfg);
    ag::Value projected = project_foreground(e_f, params);
    const PromptEmbedding prompt = build_prompt(TaskKind::Removal, projected, params, cfg);
    VideoTensor noise = random_video(t.object_video.frames, 16, 16, 3);
    const LatentGrid x_t = encode_latent(noise, cfg.patch_size);
    const DitOutput out = dit_forward(x_t, cond, prompt, 0.5, params, cfg);

    REQUIRE(out.attn.maps.size() == static_cast<std::size_t>(cfg.n_blocks));
    for (const auto& heads : out.attn.maps) {
        REQUIRE(heads.size() == static_cast<std::size_t>(cfg.n_heads));
        for (const auto& h : heads)
            for (int r = 0; r < h->val.dim(0); ++r) {
                double s = 0.0;
                for (int col = 0; col < h->val.dim(1); ++col) {
                    REQUIRE(h->val.at2(r, col) >= 0.0);
                    s += h->val.at2(r, col);
                }
                REQUIRE(s == Catch::Approx(1.0).epsilon(1e-9));
            }
    }

    ag::Value pooled = pool_attention(out.attn, prompt.placeholder_index);
    REQUIRE(pooled->val.dim(1) == 1);
    // pooled value = max over blocks of the head-mean slot column
    const int tokens = pooled->val.dim(0);
    for (int r = 0; r < std::min(tokens, 8); ++r) {
        double expect = -1.0;
        for (const auto& heads : out.attn.maps) {
            double mean = 0.0;
            for (const auto& h : heads) mean += h->val.at2(r, prompt.placeholder_index);
            expect = std::max(expect, mean / cfg.n_heads);
        }
        REQUIRE(pooled->val[r] == Catch::Approx(expect).margin(1e-12));
    }

    ag::Value fmap = map_effect(pooled, params, out.t_lat, out.h2 * out.w2);
    REQUIRE(fmap->val.dim(0) == out.t_lat);
    for (int f = 0; f < out.t_lat; ++f) {
        double s = 0.0;
        for (int i = 0; i < out.h2 * out.w2; ++i) s += fmap->val.at2(f, i);
        REQUIRE(s == Catch::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("velocity output shape matches the noised latent") {
    const ModelConfig cfg = tiny_config();
    ParamStore params = init_params(cfg, 2, true);
    const TripletSample t = tiny_triplet(91);
    const TripletLatents lat = encode_triplet(t, cfg.patch_size);
    const LatentGrid cond = build_condition(TaskKind::Insertion, lat);
    const Tensor e_f = foreground_tokens(t, params, cfg);
    ag::Value projected = project_foreground(e_f, params);
    const PromptEmbedding prompt = build_prompt(TaskKind::Insertion, projected, params, cfg);
    const DitOutput out = dit_forward(lat.x_obj, cond, prompt, 0.1, params, cfg);
    REQUIRE(out.velocity->val.shape == lat.x_obj.data.shape);
    REQUIRE(out.h2 == lat.x_obj.h_lat / 2);
    REQUIRE(out.w2 == lat.x_obj.w_lat / 2);
}

TEST_CASE("apply_lora rejects unknown layers") {
    const ModelConfig cfg = tiny_config();
    ParamStore params = init_params(cfg, 1, false);
    LoraSpec spec;
    spec.rank = 2;
    spec.target_layers = {"block9.self.q.w"};
    Rng rng(1);
    REQUIRE_THROWS_AS(apply_lora(params, spec, rng), std::invalid_argument);
}
