#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tcjepa/graph.hpp"
#include "tcjepa/masking.hpp"
#include "tcjepa/rng.hpp"
#include "tcjepa/tensor.hpp"

namespace tcjepa {

struct EncoderConfig {
    int image_size = 32;
    int patch_size = 4;
    int embed_dim = 64;
    int depth = 4;
    int heads = 4;
    int mlp_ratio = 4;

    GridShape grid() const {
        int side = image_size / patch_size;
        return {side, side};
    }
    int num_patches() const { return grid().num_patches(); }
    int patch_dim() const { return patch_size * patch_size * 3; }

    void validate() const {
        if (image_size % patch_size != 0)
            throw ConfigError("image_size must be divisible by patch_size");
        if (embed_dim % heads != 0) throw ConfigError("heads must divide embed_dim");
        if (embed_dim % 4 != 0) throw ConfigError("embed_dim must be divisible by 4");
        if (depth < 0) throw ConfigError("depth must be >= 0");
    }
};

/// Row-major patch extraction, [H x W x 3] -> [num_patches x patch^2*3].
template <class T>
Tensor<T> patchify(const std::vector<float>& image, int image_size, int patch_size) {
    if (image_size % patch_size != 0)
        throw DimensionError("patchify: image size not divisible by patch size");
    if (long(image.size()) != long(image_size) * image_size * 3)
        throw DimensionError("patchify: image buffer size mismatch");
    int side = image_size / patch_size;
    int pd = patch_size * patch_size * 3;
    Tensor<T> out({side * side, pd});
    for (int pr = 0; pr < side; ++pr)
        for (int pc = 0; pc < side; ++pc) {
            size_t row = size_t(pr * side + pc);
            size_t o = 0;
            for (int y = 0; y < patch_size; ++y)
                for (int x = 0; x < patch_size; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        out.data[row * pd + o++] = T(
                            image[(size_t(pr * patch_size + y) * image_size +
                                   (pc * patch_size + x)) * 3 + ch]);
        }
    return out;
}

template <class T>
std::vector<float> unpatchify(const Tensor<T>& patches, int image_size, int patch_size) {
    int side = image_size / patch_size;
    int pd = patch_size * patch_size * 3;
    if (patches.rows() != side * side || patches.cols() != pd)
        throw DimensionError("unpatchify: patch matrix shape mismatch");
    std::vector<float> img(size_t(image_size) * image_size * 3);
    for (int pr = 0; pr < side; ++pr)
        for (int pc = 0; pc < side; ++pc) {
            size_t row = size_t(pr * side + pc);
            size_t o = 0;
            for (int y = 0; y < patch_size; ++y)
                for (int x = 0; x < patch_size; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        img[(size_t(pr * patch_size + y) * image_size +
                             (pc * patch_size + x)) * 3 + ch] =
                            float(patches.data[row * pd + o++]);
        }
    return img;
}

/// Fixed 2D sine-cosine position embeddings, half the channels per axis.
template <class T>
Tensor<T> sincos_pos_embed(GridShape grid, int d) {
    if (d % 4 != 0) throw ConfigError("sincos_pos_embed: d must be divisible by 4");
    int quarter = d / 4;
    Tensor<T> out({grid.num_patches(), d});
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            size_t row = size_t(r * grid.cols + c);
            for (int k = 0; k < quarter; ++k) {
                double omega = 1.0 / std::pow(10000.0, double(k) / quarter);
                out.data[row * d + k] = T(std::sin(r * omega));
                out.data[row * d + quarter + k] = T(std::cos(r * omega));
                out.data[row * d + 2 * quarter + k] = T(std::sin(c * omega));
                out.data[row * d + 3 * quarter + k] = T(std::cos(c * omega));
            }
        }
    return out;
}

template <class T>
struct BlockParams {
    Tensor<T> ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b;
    Tensor<T> ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;

    void init(int d, int mlp_ratio, Rng& rng) {
        int h = d * mlp_ratio;
        ln1_g = Tensor<T>::full({1, d}, T(1));
        ln1_b = Tensor<T>::zeros({1, d});
        qkv_w = Tensor<T>::trunc_normal({d, 3 * d}, 0.02, rng);
        qkv_b = Tensor<T>::zeros({1, 3 * d});
        proj_w = Tensor<T>::trunc_normal({d, d}, 0.02, rng);
        proj_b = Tensor<T>::zeros({1, d});
        ln2_g = Tensor<T>::full({1, d}, T(1));
        ln2_b = Tensor<T>::zeros({1, d});
        fc1_w = Tensor<T>::trunc_normal({d, h}, 0.02, rng);
        fc1_b = Tensor<T>::zeros({1, h});
        fc2_w = Tensor<T>::trunc_normal({h, d}, 0.02, rng);
        fc2_b = Tensor<T>::zeros({1, d});
        for (Tensor<T>* t : {&ln1_g, &ln1_b, &qkv_b, &proj_b, &ln2_g, &ln2_b, &fc1_b, &fc2_b})
            t->requires_grad = true;
    }

    template <class F>
    void for_each(const std::string& prefix, F&& f) {
        f(prefix + ".ln1_g", ln1_g);
        f(prefix + ".ln1_b", ln1_b);
        f(prefix + ".qkv_w", qkv_w);
        f(prefix + ".qkv_b", qkv_b);
        f(prefix + ".proj_w", proj_w);
        f(prefix + ".proj_b", proj_b);
        f(prefix + ".ln2_g", ln2_g);
        f(prefix + ".ln2_b", ln2_b);
        f(prefix + ".fc1_w", fc1_w);
        f(prefix + ".fc1_b", fc1_b);
        f(prefix + ".fc2_w", fc2_w);
        f(prefix + ".fc2_b", fc2_b);
    }
};

/// Per-block AdaLN modulation: scale/shift pairs for both LayerNorms,
/// each [1 x d]. Absent (invalid Values) means plain LayerNorm.
struct AdaLnMod {
    Value scale1, shift1, scale2, shift2;
};

template <class T>
Value multihead_self_attention(Graph<T>& g, Value x_ln, BlockParams<T>& b, int heads) {
    int d = g.cols(x_ln);
    int dh = d / heads;
    Value qkv = g.add(g.matmul(x_ln, g.leaf(b.qkv_w)), g.leaf(b.qkv_b));
    std::vector<Value> head_outs;
    for (int h = 0; h < heads; ++h) {
        Value q = g.slice_cols(qkv, h * dh, dh);
        Value k = g.slice_cols(qkv, d + h * dh, dh);
        Value v = g.slice_cols(qkv, 2 * d + h * dh, dh);
        Value logits = g.scale(g.matmul(q, k, false, true), T(1) / T(std::sqrt(double(dh))));
        Value attn = g.softmax_rows(logits);
        head_outs.push_back(g.matmul(attn, v));
    }
    Value cat = heads == 1 ? head_outs[0] : g.concat_cols(head_outs);
    return g.add(g.matmul(cat, g.leaf(b.proj_w)), g.leaf(b.proj_b));
}

template <class T>
using AttnOverride = std::function<Value(Graph<T>&, Value /*x_ln*/, BlockParams<T>&, int)>;

/// Pre-LN transformer block with optional AdaLN modulation of both LayerNorm
/// outputs (out = LN(x)*(1+scale)+shift; zero-init modulation is the plain block).
template <class T>
Value vit_block(Graph<T>& g, Value x, BlockParams<T>& b, int heads,
                const AdaLnMod* mod = nullptr,
                const AttnOverride<T>* attn_override = nullptr) {
    Value ln1 = g.layernorm_rows(x, g.leaf(b.ln1_g), g.leaf(b.ln1_b));
    if (mod) {
        ln1 = g.add(g.mul(ln1, g.add_scalar(mod->scale1, T(1))), mod->shift1);
    }
    Value att = attn_override ? (*attn_override)(g, ln1, b, heads)
                              : multihead_self_attention(g, ln1, b, heads);
    Value h = g.add(x, att);
    Value ln2 = g.layernorm_rows(h, g.leaf(b.ln2_g), g.leaf(b.ln2_b));
    if (mod) {
        ln2 = g.add(g.mul(ln2, g.add_scalar(mod->scale2, T(1))), mod->shift2);
    }
    Value m = g.add(g.matmul(g.gelu(g.add(g.matmul(ln2, g.leaf(b.fc1_w)), g.leaf(b.fc1_b))),
                             g.leaf(b.fc2_w)),
                    g.leaf(b.fc2_b));
    return g.add(h, m);
}

template <class T>
struct EncoderParams {
    EncoderConfig cfg;
    Tensor<T> patch_w, patch_b;
    std::vector<BlockParams<T>> blocks;
    Tensor<T> lnf_g, lnf_b;
    Tensor<T> pos;  // fixed sincos table, not trained

    void init(const EncoderConfig& c, Rng& rng) {
        c.validate();
        cfg = c;
        patch_w = Tensor<T>::trunc_normal({c.patch_dim(), c.embed_dim}, 0.02, rng);
        patch_b = Tensor<T>::zeros({1, c.embed_dim});
        patch_b.requires_grad = true;
        blocks.resize(c.depth);
        for (auto& b : blocks) b.init(c.embed_dim, c.mlp_ratio, rng);
        lnf_g = Tensor<T>::full({1, c.embed_dim}, T(1));
        lnf_b = Tensor<T>::zeros({1, c.embed_dim});
        lnf_g.requires_grad = lnf_b.requires_grad = true;
        pos = sincos_pos_embed<T>(c.grid(), c.embed_dim);
    }

    template <class F>
    void for_each(const std::string& prefix, F&& f) {
        f(prefix + ".patch_w", patch_w);
        f(prefix + ".patch_b", patch_b);
        for (size_t i = 0; i < blocks.size(); ++i)
            blocks[i].for_each(prefix + ".blk" + std::to_string(i), f);
        f(prefix + ".lnf_g", lnf_g);
        f(prefix + ".lnf_b", lnf_b);
    }

    void set_requires_grad(bool rg) {
        for_each("", [rg](const std::string&, Tensor<T>& t) { t.requires_grad = rg; });
    }

    /// Shared trunk: patch rows already gathered (constants), matching
    /// positional rows added before the first block.
    Value forward(Graph<T>& g, Value patch_rows, Value pos_rows) {
        Value x = g.add(g.add(g.matmul(patch_rows, g.leaf(patch_w)), g.leaf(patch_b)),
                        pos_rows);
        for (auto& b : blocks) x = vit_block(g, x, b, cfg.heads);
        if (blocks.empty()) return x;  // degenerate depth: projection + positions
        return g.layernorm_rows(x, g.leaf(lnf_g), g.leaf(lnf_b));
    }

    /// Online encoder over context patches only; dropped tokens never enter
    /// the sequence, so masked content cannot leak.
    Value encode_context(Graph<T>& g, const std::vector<float>& image, const MaskSpec& mask) {
        if (mask.context_indices.empty()) throw DomainError("encode_context: empty context");
        Tensor<T> patches = patchify<T>(image, cfg.image_size, cfg.patch_size);
        int pd = cfg.patch_dim(), d = cfg.embed_dim;
        int n = int(mask.context_indices.size());
        Tensor<T> sel({n, pd}), psel({n, d});
        for (int k = 0; k < n; ++k) {
            int i = mask.context_indices[k];
            std::copy(&patches.data[size_t(i) * pd], &patches.data[size_t(i) * pd] + pd,
                      &sel.data[size_t(k) * pd]);
            std::copy(&pos.data[size_t(i) * d], &pos.data[size_t(i) * d] + d,
                      &psel.data[size_t(k) * d]);
        }
        return forward(g, g.constant(sel), g.constant(psel));
    }

    /// Full-image forward with no gradient graph; used for targets and probing.
    Tensor<T> encode_full_nograd(const std::vector<float>& image) {
        Graph<T> g;
        Tensor<T> patches = patchify<T>(image, cfg.image_size, cfg.patch_size);
        Value out = forward(g, g.constant(patches), g.constant(pos));
        return Tensor<T>({g.rows(out), g.cols(out)}, g.val(out));
    }
};

template <class T>
struct EncoderPair {
    EncoderParams<T> online;
    EncoderParams<T> target;

    void init(const EncoderConfig& c, Rng& rng) {
        online.init(c, rng);
        target = online;  // theta_bar starts equal to theta
        target.set_requires_grad(false);
    }

    /// theta_bar <- m*theta_bar + (1-m)*theta, elementwise.
    void ema_update(T m) {
        if (m < T(0) || m > T(1)) throw DomainError("ema_update: momentum outside [0,1]");
        std::vector<Tensor<T>*> src, dst;
        online.for_each("", [&](const std::string&, Tensor<T>& t) { src.push_back(&t); });
        target.for_each("", [&](const std::string&, Tensor<T>& t) { dst.push_back(&t); });
        for (size_t i = 0; i < src.size(); ++i)
            for (size_t j = 0; j < dst[i]->data.size(); ++j)
                dst[i]->data[j] = m * dst[i]->data[j] + (T(1) - m) * src[i]->data[j];
    }

    /// Target features for rows in B_y, per block, gradient-detached.
    /// Rows are ordered by ascending patch index within each target block.
    std::vector<Tensor<T>> encode_target(const std::vector<float>& image,
                                         const MaskSpec& mask) {
        if (mask.target_blocks.empty()) throw DomainError("encode_target: no target blocks");
        for (const auto& b : mask.target_blocks)
            if (b.empty()) throw DomainError("encode_target: empty target block");
        Tensor<T> full = target.encode_full_nograd(image);
        int d = target.cfg.embed_dim;
        std::vector<Tensor<T>> out;
        for (const auto& blk : mask.target_blocks) {
            Tensor<T> rows({int(blk.size()), d});
            for (size_t k = 0; k < blk.size(); ++k)
                std::copy(&full.data[size_t(blk[k]) * d], &full.data[size_t(blk[k]) * d] + d,
                          &rows.data[k * d]);
            out.push_back(std::move(rows));
        }
        return out;
    }
};

}  // namespace tcjepa
