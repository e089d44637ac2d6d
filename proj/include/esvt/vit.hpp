#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "esvt/checkpoint.hpp"
#include "esvt/error.hpp"
#include "esvt/image.hpp"
#include "esvt/rng.hpp"
#include "esvt/tensor.hpp"

namespace esvt {

struct VitConfig {
    int image_h = 224;
    int image_w = 224;
    int channels = 3;
    int patch = 16;
    int embed_dim = 64;
    int depth = 4;
    int heads = 4;
    int mlp_ratio = 4;
    int num_classes = 3;
    double dropout_rate = 0.0;
    bool gelu_tanh_approx = false;

    int grid_h() const { return image_h / patch; }
    int grid_w() const { return image_w / patch; }
    int num_patches() const { return grid_h() * grid_w(); }
    int seq_len() const { return num_patches() + 1; }  // + [CLS]
    int patch_dim() const { return patch * patch * channels; }
    int head_dim() const { return embed_dim / heads; }
    int mlp_dim() const { return embed_dim * mlp_ratio; }

    void validate() const {
        if (image_h < 1 || image_w < 1 || channels < 1) throw ValueError("vit: image extents must be positive");
        if (patch < 1 || image_h % patch != 0 || image_w % patch != 0)
            throw ValueError("vit: patch size " + std::to_string(patch) + " must divide image " +
                             std::to_string(image_h) + "x" + std::to_string(image_w));
        if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0)
            throw ValueError("vit: embed_dim must be a positive multiple of heads");
        if (depth < 0 || mlp_ratio < 1 || num_classes < 2) throw ValueError("vit: bad depth/mlp_ratio/classes");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ValueError("vit: dropout must be in [0, 1)");
    }
};

template <typename S>
struct VitBlockParams {
    Tensor<S> ln1_gamma, ln1_beta;
    Tensor<S> wq, wk, wv, wo;  // [D x D] each
    Tensor<S> ln2_gamma, ln2_beta;
    Tensor<S> mlp_w1;  // [D x mlp_dim]
    Tensor<S> mlp_w2;  // [mlp_dim x D]
};

template <typename S>
struct VitParams {
    Tensor<S> patch_proj;  // [P*P*C x D]
    Tensor<S> cls_token;   // [1 x D]
    Tensor<S> pos_embed;   // [N+1 x D]
    std::vector<VitBlockParams<S>> blocks;
    Tensor<S> final_ln_gamma, final_ln_beta;
    Tensor<S> head;  // [D x num_classes]

    std::vector<std::pair<std::string, Tensor<S>>> named() {
        std::vector<std::pair<std::string, Tensor<S>>> out;
        out.emplace_back("patch_proj", patch_proj);
        out.emplace_back("cls_token", cls_token);
        out.emplace_back("pos_embed", pos_embed);
        for (size_t b = 0; b < blocks.size(); ++b) {
            const std::string p = "block" + std::to_string(b) + ".";
            out.emplace_back(p + "ln1.gamma", blocks[b].ln1_gamma);
            out.emplace_back(p + "ln1.beta", blocks[b].ln1_beta);
            out.emplace_back(p + "attn.wq", blocks[b].wq);
            out.emplace_back(p + "attn.wk", blocks[b].wk);
            out.emplace_back(p + "attn.wv", blocks[b].wv);
            out.emplace_back(p + "attn.wo", blocks[b].wo);
            out.emplace_back(p + "ln2.gamma", blocks[b].ln2_gamma);
            out.emplace_back(p + "ln2.beta", blocks[b].ln2_beta);
            out.emplace_back(p + "mlp.w1", blocks[b].mlp_w1);
            out.emplace_back(p + "mlp.w2", blocks[b].mlp_w2);
        }
        out.emplace_back("final_ln.gamma", final_ln_gamma);
        out.emplace_back("final_ln.beta", final_ln_beta);
        out.emplace_back("head", head);
        return out;
    }
};

// Post-softmax attention weights, [layers][heads][tokens][tokens].
template <typename S>
struct AttentionStack {
    int layers = 0;
    int heads = 0;
    int tokens = 0;
    std::vector<S> w;

    void init(int l, int h, int t) {
        layers = l;
        heads = h;
        tokens = t;
        w.assign(static_cast<size_t>(l) * h * t * t, S(0));
    }
    S at(int l, int h, int i, int j) const {
        return w[((static_cast<size_t>(l) * heads + h) * tokens + i) * tokens + j];
    }
    S* layer_head(int l, int h) {
        return w.data() + (static_cast<size_t>(l) * heads + h) * tokens * tokens;
    }
    const S* layer_head(int l, int h) const {
        return w.data() + (static_cast<size_t>(l) * heads + h) * tokens * tokens;
    }
};

// Row-major patch sequence [N x P*P*C]; patches ordered row-major over the
// patch grid, each patch flattened y, then x, channel-last.
template <typename S>
Tensor<S> patchify(const SpectrogramImage& image, int patch) {
    if (patch < 1 || image.h % patch != 0 || image.w % patch != 0)
        throw ValueError("patchify: patch size " + std::to_string(patch) + " must divide image " +
                         std::to_string(image.h) + "x" + std::to_string(image.w));
    const int gh = image.h / patch, gw = image.w / patch;
    const int64_t n = static_cast<int64_t>(gh) * gw;
    const int64_t pd = static_cast<int64_t>(patch) * patch * image.c;
    Tensor<S> out = Tensor<S>::zeros({n, pd});
    for (int py = 0; py < gh; ++py)
        for (int px = 0; px < gw; ++px) {
            S* dst = out.data() + (static_cast<int64_t>(py) * gw + px) * pd;
            for (int dy = 0; dy < patch; ++dy)
                for (int dx = 0; dx < patch; ++dx)
                    for (int ch = 0; ch < image.c; ++ch)
                        *dst++ = static_cast<S>(image.at(py * patch + dy, px * patch + dx, ch));
        }
    return out;
}

// tokens = concat(cls, patches * patch_proj) + pos_embed, CLS at row 0.
template <typename S>
Tensor<S> embed(const Tensor<S>& patches, const VitParams<S>& params) {
    auto projected = matmul(patches, params.patch_proj);
    auto tokens = concat_rows<S>({params.cls_token, projected});
    if (tokens.shape() != params.pos_embed.shape())
        throw ShapeError("embed: pos_embed is " + shape_str(params.pos_embed.shape()) + " but tokens are " +
                         shape_str(tokens.shape()));
    return add(tokens, params.pos_embed);
}

namespace detail {

template <typename S>
Tensor<S> multi_head_attention(const Tensor<S>& x, const VitBlockParams<S>& blk, const VitConfig& cfg,
                               AttentionStack<S>* capture, int layer) {
    const int dh = cfg.head_dim();
    const S att_scale = S(1) / std::sqrt(static_cast<S>(dh));
    auto q = matmul(x, blk.wq);
    auto k = matmul(x, blk.wk);
    auto v = matmul(x, blk.wv);
    std::vector<Tensor<S>> heads;
    heads.reserve(static_cast<size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        auto qh = slice_cols(q, static_cast<int64_t>(h) * dh, dh);
        auto kh = slice_cols(k, static_cast<int64_t>(h) * dh, dh);
        auto vh = slice_cols(v, static_cast<int64_t>(h) * dh, dh);
        auto scores = scale(matmul(qh, transpose(kh)), att_scale);
        auto attn = softmax(scores, 1);
        if (capture) {
            S* dst = capture->layer_head(layer, h);
            std::copy_n(attn.data(), attn.size(), dst);
        }
        heads.push_back(matmul(attn, vh));
    }
    return matmul(concat_cols(heads), blk.wo);
}

template <typename S>
Tensor<S> vit_gelu(const Tensor<S>& x, const VitConfig& cfg) {
    return cfg.gelu_tanh_approx ? gelu_tanh(x) : gelu(x);
}

}  // namespace detail

// Pre-LN encoder: per block x += MSA(LN(x)); x += MLP(LN(x)); final LN after
// the last block. Attention weights are captured right after the softmax.
template <typename S>
Tensor<S> encoder_forward(const Tensor<S>& tokens, const VitParams<S>& params, const VitConfig& cfg,
                          AttentionStack<S>* capture = nullptr, Rng* dropout_rng = nullptr) {
    cfg.validate();
    if (tokens.rank() != 2 || tokens.dim(1) != cfg.embed_dim)
        throw ShapeError("encoder_forward: tokens must be [seq x " + std::to_string(cfg.embed_dim) + "]");
    if (static_cast<int>(params.blocks.size()) != cfg.depth)
        throw ShapeError("encoder_forward: params carry " + std::to_string(params.blocks.size()) +
                         " blocks for depth " + std::to_string(cfg.depth));
    if (capture) capture->init(cfg.depth, cfg.heads, static_cast<int>(tokens.dim(0)));

    const bool drop = cfg.dropout_rate > 0.0 && dropout_rng != nullptr;
    Tensor<S> x = tokens;
    for (int l = 0; l < cfg.depth; ++l) {
        const auto& blk = params.blocks[static_cast<size_t>(l)];
        auto attn_out = detail::multi_head_attention(layer_norm(x, blk.ln1_gamma, blk.ln1_beta), blk, cfg,
                                                     capture, l);
        if (drop) attn_out = dropout(attn_out, cfg.dropout_rate, *dropout_rng);
        x = add(x, attn_out);
        auto h = detail::vit_gelu(matmul(layer_norm(x, blk.ln2_gamma, blk.ln2_beta), blk.mlp_w1), cfg);
        auto mlp_out = matmul(h, blk.mlp_w2);
        if (drop) mlp_out = dropout(mlp_out, cfg.dropout_rate, *dropout_rng);
        x = add(x, mlp_out);
    }
    return layer_norm(x, params.final_ln_gamma, params.final_ln_beta);
}

// Head applied to the CLS token only.
template <typename S>
Tensor<S> classify(const Tensor<S>& tokens_out, const VitParams<S>& params) {
    return matmul(slice_rows(tokens_out, 0, 1), params.head);
}

// Full forward: patchify -> embed -> encoder -> CLS logits [1 x classes].
template <typename S>
Tensor<S> vit_logits(const SpectrogramImage& image, const VitParams<S>& params, const VitConfig& cfg,
                     AttentionStack<S>* capture = nullptr, Rng* dropout_rng = nullptr) {
    auto patches = patchify<S>(image, cfg.patch);
    return classify(encoder_forward(embed(patches, params), params, cfg, capture, dropout_rng), params);
}

// Final-LN CLS representation, the feature vector exported for embeddings.
template <typename S>
std::vector<S> vit_features(const SpectrogramImage& image, const VitParams<S>& params, const VitConfig& cfg) {
    auto patches = patchify<S>(image, cfg.patch);
    auto out = encoder_forward(embed(patches, params), params, cfg);
    std::vector<S> feat(static_cast<size_t>(cfg.embed_dim));
    std::copy_n(out.data(), cfg.embed_dim, feat.data());
    return feat;
}

// Projections ~ truncated normal std 0.02, LN gains 1 / biases 0,
// cls/pos ~ normal std 0.02. Deterministic for a fixed seed.
template <typename S>
VitParams<S> init_vit_params(const VitConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    auto trunc = [&rng](Shape shape) {
        auto t = Tensor<S>::zeros(std::move(shape), true);
        for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(rng.truncated_normal(0.0, 0.02));
        return t;
    };
    auto norm = [&rng](Shape shape) {
        auto t = Tensor<S>::zeros(std::move(shape), true);
        for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(rng.normal(0.0, 0.02));
        return t;
    };
    const int64_t d = cfg.embed_dim;
    VitParams<S> p;
    p.patch_proj = trunc({cfg.patch_dim(), d});
    p.cls_token = norm({1, d});
    p.pos_embed = norm({cfg.seq_len(), d});
    for (int l = 0; l < cfg.depth; ++l) {
        VitBlockParams<S> blk;
        blk.ln1_gamma = Tensor<S>::full({d}, S(1), true);
        blk.ln1_beta = Tensor<S>::zeros({d}, true);
        blk.wq = trunc({d, d});
        blk.wk = trunc({d, d});
        blk.wv = trunc({d, d});
        blk.wo = trunc({d, d});
        blk.ln2_gamma = Tensor<S>::full({d}, S(1), true);
        blk.ln2_beta = Tensor<S>::zeros({d}, true);
        blk.mlp_w1 = trunc({d, cfg.mlp_dim()});
        blk.mlp_w2 = trunc({cfg.mlp_dim(), d});
        p.blocks.push_back(std::move(blk));
    }
    p.final_ln_gamma = Tensor<S>::full({d}, S(1), true);
    p.final_ln_beta = Tensor<S>::zeros({d}, true);
    p.head = trunc({d, cfg.num_classes});
    return p;
}

template <typename S>
void save_vit_params(const std::string& path, VitParams<S>& params) {
    std::vector<CheckpointEntry> entries;
    for (auto& [name, tensor] : params.named()) entries.push_back(to_entry(name, tensor));
    write_checkpoint(path, entries);
}

template <typename S>
VitParams<S> load_vit_params(const std::string& path, const VitConfig& cfg) {
    auto entries = read_checkpoint(path);
    VitParams<S> params = init_vit_params<S>(cfg, 0);
    load_named_params(path, entries, params.named());
    return params;
}

// Head-averaged CLS -> patch attention of one 1-based layer, CLS self-weight
// dropped and the N patch weights renormalized to sum to 1.
template <typename S>
std::vector<double> attention_patch_map(const AttentionStack<S>& stack, int layer) {
    if (layer < 1 || layer > stack.layers)
        throw ValueError("attention layer " + std::to_string(layer) + " out of range; model depth is " +
                         std::to_string(stack.layers));
    const int t = stack.tokens;
    std::vector<double> cls_row(static_cast<size_t>(t), 0.0);
    for (int h = 0; h < stack.heads; ++h) {
        const S* row0 = stack.layer_head(layer - 1, h);  // row 0 = CLS query
        for (int j = 0; j < t; ++j) cls_row[static_cast<size_t>(j)] += static_cast<double>(row0[j]);
    }
    std::vector<double> patches(cls_row.begin() + 1, cls_row.end());
    double total = 0.0;
    for (double v : patches) total += v;
    for (double& v : patches) v /= total;
    return patches;
}

}  // namespace esvt
