#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "tcjepa/text.hpp"
#include "tcjepa/vit.hpp"

namespace tcjepa {

enum class ConditionerKind { none, fine, sequence, holistic, adaln, feature };
enum class FusionKind { max, avg, attention };

inline const char* to_string(ConditionerKind k) {
    switch (k) {
        case ConditionerKind::none: return "none";
        case ConditionerKind::fine: return "fine";
        case ConditionerKind::sequence: return "sequence";
        case ConditionerKind::holistic: return "holistic";
        case ConditionerKind::adaln: return "adaln";
        case ConditionerKind::feature: return "feature";
    }
    return "?";
}
inline const char* to_string(FusionKind k) {
    switch (k) {
        case FusionKind::max: return "max";
        case FusionKind::avg: return "avg";
        case FusionKind::attention: return "attention";
    }
    return "?";
}

inline ConditionerKind conditioner_from_string(const std::string& s) {
    for (auto k : {ConditionerKind::none, ConditionerKind::fine, ConditionerKind::sequence,
                   ConditionerKind::holistic, ConditionerKind::adaln, ConditionerKind::feature})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown conditioner '" + s + "'");
}
inline FusionKind fusion_from_string(const std::string& s) {
    for (auto k : {FusionKind::max, FusionKind::avg, FusionKind::attention})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown fusion '" + s + "'");
}

struct PredictorConfig {
    int pred_dim = 64;
    int depth = 4;
    int heads = 4;
    int mlp_ratio = 4;
    ConditionerKind conditioner = ConditionerKind::none;
    FusionKind fusion = FusionKind::max;
    std::vector<int> cond_layers;  // empty means all layers

    bool layer_conditioned(int l) const {
        if (cond_layers.empty()) return true;
        return std::find(cond_layers.begin(), cond_layers.end(), l) != cond_layers.end();
    }
    int num_cond_layers() const {
        if (cond_layers.empty()) return depth;
        return int(cond_layers.size());
    }
};

/// Per-layer cross-attention conditioner (shared between the fine-grained
/// word-level path and the holistic single-vector baseline). The output
/// projection and the MLP output layer are zero-initialized so conditioning
/// is exactly the identity at init.
template <class T>
struct CrossAttnLayer {
    Tensor<T> wq, wk, wv, wo;          // [pd x pd], [d_t x pd] style (right-multiply)
    Tensor<T> ln_g, ln_b;
    Tensor<T> m1_w, m1_b, m2_w, m2_b;  // MLP, ratio 4
    Tensor<T> fuse_q;                  // [1 x pd], attention-fusion pooling query

    void init(int pd, int dt, Rng& rng) {
        wq = Tensor<T>::trunc_normal({pd, pd}, 0.02, rng);
        wk = Tensor<T>::trunc_normal({dt, pd}, 0.02, rng);
        wv = Tensor<T>::trunc_normal({dt, pd}, 0.02, rng);
        wo = Tensor<T>::zeros({pd, pd});
        ln_g = Tensor<T>::full({1, pd}, T(1));
        ln_b = Tensor<T>::zeros({1, pd});
        m1_w = Tensor<T>::trunc_normal({pd, 4 * pd}, 0.02, rng);
        m1_b = Tensor<T>::zeros({1, 4 * pd});
        m2_w = Tensor<T>::zeros({4 * pd, pd});
        m2_b = Tensor<T>::zeros({1, pd});
        fuse_q = Tensor<T>::trunc_normal({1, pd}, 0.02, rng);
        for (Tensor<T>* t : {&wo, &ln_g, &ln_b, &m1_b, &m2_w, &m2_b})
            t->requires_grad = true;
    }

    template <class F>
    void for_each(const std::string& p, F&& f) {
        f(p + ".wq", wq);
        f(p + ".wk", wk);
        f(p + ".wv", wv);
        f(p + ".wo", wo);
        f(p + ".ln_g", ln_g);
        f(p + ".ln_b", ln_b);
        f(p + ".m1_w", m1_w);
        f(p + ".m1_b", m1_b);
        f(p + ".m2_w", m2_w);
        f(p + ".m2_b", m2_b);
        f(p + ".fuse_q", fuse_q);
    }
};

template <class T>
struct AdaLnLayer {
    Tensor<T> h_w, h_b;  // [d_t x pd]
    Tensor<T> o_w, o_b;  // [pd x 4*pd], zero-init: scale1|shift1|scale2|shift2

    void init(int pd, int dt, Rng& rng) {
        h_w = Tensor<T>::trunc_normal({dt, pd}, 0.02, rng);
        h_b = Tensor<T>::zeros({1, pd});
        o_w = Tensor<T>::zeros({pd, 4 * pd});
        o_b = Tensor<T>::zeros({1, 4 * pd});
        for (Tensor<T>* t : {&h_b, &o_w, &o_b}) t->requires_grad = true;
    }
    template <class F>
    void for_each(const std::string& p, F&& f) {
        f(p + ".h_w", h_w);
        f(p + ".h_b", h_b);
        f(p + ".o_w", o_w);
        f(p + ".o_b", o_b);
    }
};

template <class T>
struct FeatureCondParams {
    Tensor<T> ln_g, ln_b;  // over [pd + d_t]
    Tensor<T> f1_w, f1_b;  // [(pd+d_t) x pd]
    Tensor<T> f2_w, f2_b;  // [pd x pd], zero-init

    void init(int pd, int dt, Rng& rng) {
        int cd = pd + dt;
        ln_g = Tensor<T>::full({1, cd}, T(1));
        ln_b = Tensor<T>::zeros({1, cd});
        f1_w = Tensor<T>::trunc_normal({cd, pd}, 0.02, rng);
        f1_b = Tensor<T>::zeros({1, pd});
        f2_w = Tensor<T>::zeros({pd, pd});
        f2_b = Tensor<T>::zeros({1, pd});
        for (Tensor<T>* t : {&ln_g, &ln_b, &f1_b, &f2_w, &f2_b}) t->requires_grad = true;
    }
    template <class F>
    void for_each(const std::string& p, F&& f) {
        f(p + ".ln_g", ln_g);
        f(p + ".ln_b", ln_b);
        f(p + ".f1_w", f1_w);
        f(p + ".f1_b", f1_b);
        f(p + ".f2_w", f2_w);
        f(p + ".f2_b", f2_b);
    }
};

template <class T>
struct SequenceCondParams {
    Tensor<T> tok_w, tok_b;       // [d_t x pd], zero-init projection
    std::vector<Tensor<T>> gate;  // per layer [1 x 1], zero-init

    void init(int pd, int dt, int depth, Rng&) {
        tok_w = Tensor<T>::zeros({dt, pd});
        tok_b = Tensor<T>::zeros({1, pd});
        tok_w.requires_grad = tok_b.requires_grad = true;
        gate.resize(depth);
        for (auto& g : gate) {
            g = Tensor<T>::zeros({1, 1});
            g.requires_grad = true;
        }
    }
    template <class F>
    void for_each(const std::string& p, F&& f) {
        f(p + ".tok_w", tok_w);
        f(p + ".tok_b", tok_b);
        for (size_t i = 0; i < gate.size(); ++i) f(p + ".gate" + std::to_string(i), gate[i]);
    }
};

/// Rectified patch-word similarities captured during a conditioned forward.
/// Indexing: O[caption][cond_layer][block_forward] is a [rows x S] node whose
/// rows follow the block forward's sequence (context rows, then mask rows).
struct SimilarityCapture {
    std::vector<std::vector<std::vector<Value>>> O;
    std::vector<std::vector<int>> row_patch_ids;  // per block forward
    int num_captions = 0;
    int num_cond_layers = 0;
    int seq_len = 0;
    bool populated() const { return num_captions > 0 && num_cond_layers > 0; }
};

template <class T>
struct PredictOutput {
    std::vector<Value> blocks;  // predicted target rows per block, [|blk| x d]
    SimilarityCapture sim;
};

template <class T>
struct PredictorParams {
    PredictorConfig cfg;
    int enc_dim = 0;
    int text_dim = 0;
    GridShape grid;
    Tensor<T> in_w, in_b;    // d -> pd
    Tensor<T> mask_token;    // [1 x pd], shared m~; m_j = pos_j + m~ on demand
    Tensor<T> pos;           // sincos at pd over the full grid
    std::vector<BlockParams<T>> blocks;
    Tensor<T> lnf_g, lnf_b;
    Tensor<T> out_w, out_b;  // pd -> d
    std::vector<CrossAttnLayer<T>> xattn;  // per layer (fine/holistic)
    std::vector<AdaLnLayer<T>> adaln;
    FeatureCondParams<T> feature;
    SequenceCondParams<T> sequence;
    Tensor<T> fuse_q;  // attention-fusion pooling query outside cross-attn layers

    void init(const PredictorConfig& c, int d, int dt, GridShape grid_shape, Rng& rng) {
        if (c.depth < 1) throw ConfigError("predictor depth must be >= 1");
        if (c.pred_dim % c.heads != 0) throw ConfigError("heads must divide pred_dim");
        cfg = c;
        enc_dim = d;
        text_dim = dt;
        grid = grid_shape;
        int pd = c.pred_dim;
        in_w = Tensor<T>::trunc_normal({d, pd}, 0.02, rng);
        in_b = Tensor<T>::zeros({1, pd});
        in_b.requires_grad = true;
        mask_token = Tensor<T>::trunc_normal({1, pd}, 0.02, rng);
        pos = sincos_pos_embed<T>(grid_shape, pd);
        blocks.resize(c.depth);
        for (auto& b : blocks) b.init(pd, c.mlp_ratio, rng);
        lnf_g = Tensor<T>::full({1, pd}, T(1));
        lnf_b = Tensor<T>::zeros({1, pd});
        lnf_g.requires_grad = lnf_b.requires_grad = true;
        out_w = Tensor<T>::trunc_normal({pd, d}, 0.02, rng);
        out_b = Tensor<T>::zeros({1, d});
        out_b.requires_grad = true;
        // conditioner parameter sets are created for the selected kind only
        if (c.conditioner == ConditionerKind::fine ||
            c.conditioner == ConditionerKind::holistic) {
            xattn.resize(c.depth);
            for (int l = 0; l < c.depth; ++l)
                if (c.layer_conditioned(l)) xattn[l].init(pd, dt, rng);
        }
        if (c.conditioner == ConditionerKind::adaln) {
            adaln.resize(c.depth);
            for (int l = 0; l < c.depth; ++l)
                if (c.layer_conditioned(l)) adaln[l].init(pd, dt, rng);
        }
        if (c.conditioner == ConditionerKind::feature) feature.init(pd, dt, rng);
        if (c.conditioner == ConditionerKind::sequence)
            sequence.init(pd, dt, c.depth, rng);
        if (c.fusion == FusionKind::attention &&
            (c.conditioner == ConditionerKind::adaln ||
             c.conditioner == ConditionerKind::feature))
            fuse_q = Tensor<T>::trunc_normal({1, pd}, 0.02, rng);
    }

    template <class F>
    void for_each(const std::string& p, F&& f) {
        f(p + ".in_w", in_w);
        f(p + ".in_b", in_b);
        f(p + ".mask_token", mask_token);
        for (size_t i = 0; i < blocks.size(); ++i)
            blocks[i].for_each(p + ".blk" + std::to_string(i), f);
        f(p + ".lnf_g", lnf_g);
        f(p + ".lnf_b", lnf_b);
        f(p + ".out_w", out_w);
        f(p + ".out_b", out_b);
        for (size_t l = 0; l < xattn.size(); ++l)
            if (cfg.layer_conditioned(int(l)))
                xattn[l].for_each(p + ".xattn" + std::to_string(l), f);
        for (size_t l = 0; l < adaln.size(); ++l)
            if (cfg.layer_conditioned(int(l)))
                adaln[l].for_each(p + ".adaln" + std::to_string(l), f);
        if (cfg.conditioner == ConditionerKind::feature) feature.for_each(p + ".feat", f);
        if (cfg.conditioner == ConditionerKind::sequence) sequence.for_each(p + ".seq", f);
        if (fuse_q.size() != 0) f(p + ".fuse_q", fuse_q);
    }

    // ---- fusion ------------------------------------------------------------

    Value fuse(Graph<T>& g, const std::vector<Value>& per_caption, int layer) {
        if (per_caption.empty()) throw DomainError("fuse_captions: empty list");
        if (per_caption.size() == 1) return per_caption[0];
        switch (cfg.fusion) {
            case FusionKind::max: {
                Value acc = per_caption[0];
                for (size_t n = 1; n < per_caption.size(); ++n)
                    acc = g.maximum(acc, per_caption[n]);
                return acc;
            }
            case FusionKind::avg: {
                Value acc = per_caption[0];
                for (size_t n = 1; n < per_caption.size(); ++n)
                    acc = g.add(acc, per_caption[n]);
                return g.scale(acc, T(1) / T(per_caption.size()));
            }
            case FusionKind::attention: {
                int pd = cfg.pred_dim;
                Tensor<T>& q = xattn.empty() ? fuse_q : xattn[layer].fuse_q;
                std::vector<Value> scores;
                for (Value x : per_caption)
                    scores.push_back(g.scale(g.matmul(x, g.leaf(q), false, true),
                                             T(1) / T(std::sqrt(double(pd)))));
                Value w = g.softmax_rows(g.concat_cols(scores));
                Value out;
                for (size_t n = 0; n < per_caption.size(); ++n) {
                    Value term = g.scale_rows(per_caption[n], g.slice_cols(w, int(n), 1));
                    out = n == 0 ? term : g.add(out, term);
                }
                return out;
            }
        }
        throw DomainError("unreachable fusion kind");
    }

    // ---- conditioner building blocks --------------------------------------

    /// Eq.-style residual cross-attention over a word sequence plus the
    /// pre-LN MLP, returning the updated rows and (optionally) the rectified
    /// cosine similarity slice with pad positions forced to zero.
    std::pair<Value, Value> cross_attend(Graph<T>& g, Value x, CrossAttnLayer<T>& layer,
                                         Value t_mat, const Tensor<T>* pad_mask,
                                         bool capture_o) {
        int S = g.cols(t_mat);
        if (S == 0) throw DomainError("cross_attend: empty word sequence");
        int pd = cfg.pred_dim;
        Value ql = g.matmul(x, g.leaf(layer.wq));                // [P x pd]
        Value K = g.matmul(t_mat, g.leaf(layer.wk), true, false);  // [S x pd]
        Value V = g.matmul(t_mat, g.leaf(layer.wv), true, false);  // [S x pd]
        Value logits = g.scale(g.matmul(ql, K, false, true), T(1) / T(std::sqrt(double(pd))));
        if (pad_mask) {
            // pad columns pushed to -1e30 so they get exactly zero weight
            Tensor<T> bias({1, S});
            for (int s = 0; s < S; ++s)
                bias.data[s] = pad_mask->data[s] > T(0) ? T(0) : T(-1e30);
            logits = g.add(logits, g.constant(bias));
        }
        Value attn = g.softmax_rows(logits);
        Value ctx = g.matmul(attn, V);  // [P x pd]
        Value x1 = g.add(x, g.matmul(ctx, g.leaf(layer.wo)));
        Value ln = g.layernorm_rows(x1, g.leaf(layer.ln_g), g.leaf(layer.ln_b));
        Value mlp = g.add(g.matmul(g.gelu(g.add(g.matmul(ln, g.leaf(layer.m1_w)),
                                                g.leaf(layer.m1_b))),
                                   g.leaf(layer.m2_w)),
                          g.leaf(layer.m2_b));
        Value x2 = g.add(x1, mlp);

        Value o{};
        if (capture_o) {
            // rectified cosine between q^(l) rows and K columns; the same
            // projections as the attention, without the logit scaling
            const T eps = T(1e-6);
            Value numer = g.matmul(ql, K, false, true);             // [P x S]
            Value qn = g.l2_rows(ql, g.zeros(g.rows(ql), pd));      // [P x 1]
            Value kn = g.l2_rows(K, g.zeros(S, pd));                // [S x 1]
            Value denom = g.add_scalar(g.matmul(qn, kn, false, true), eps);
            Value cosv = g.relu(g.div(numer, denom));
            if (pad_mask) cosv = g.mul(cosv, g.constant(*pad_mask));
            o = cosv;
        }
        return {x2, o};
    }

    /// Eq.-6-style input conditioning: rows <- rows + MLP(LN([rows, t_bar])).
    Value feature_condition_rows(Graph<T>& g, Value x, Value tbar) {
        int P = g.rows(x);
        Value tb_rows = g.add(g.zeros(P, text_dim), tbar);  // broadcast to [P x d_t]
        Value cat = g.concat_cols({x, tb_rows});
        Value ln = g.layernorm_rows(cat, g.leaf(feature.ln_g), g.leaf(feature.ln_b));
        Value h = g.gelu(g.add(g.matmul(ln, g.leaf(feature.f1_w)), g.leaf(feature.f1_b)));
        Value delta = g.add(g.matmul(h, g.leaf(feature.f2_w)), g.leaf(feature.f2_b));
        return g.add(x, delta);
    }

    AdaLnMod adaln_modulation(Graph<T>& g, AdaLnLayer<T>& layer, Value tbar) {
        int pd = cfg.pred_dim;
        Value h = g.gelu(g.add(g.matmul(tbar, g.leaf(layer.h_w)), g.leaf(layer.h_b)));
        Value mods = g.add(g.matmul(h, g.leaf(layer.o_w)), g.leaf(layer.o_b));  // [1 x 4pd]
        AdaLnMod m;
        m.scale1 = g.slice_cols(mods, 0, pd);
        m.shift1 = g.slice_cols(mods, pd, pd);
        m.scale2 = g.slice_cols(mods, 2 * pd, pd);
        m.shift2 = g.slice_cols(mods, 3 * pd, pd);
        return m;
    }

    /// Attention where queries in [0, n_img) see text columns only through a
    /// zero-init gate: at init the image rows are bit-identical to the
    /// unconditioned block, which is the identity-at-init contract the other
    /// conditioners get from their zero-init output projections.
    Value gated_sequence_attention(Graph<T>& g, Value x_ln, BlockParams<T>& b, int heads,
                                   int n_img, Value gate) {
        int d = g.cols(x_ln);
        int dh = d / heads;
        int R = g.rows(x_ln);
        Value qkv = g.add(g.matmul(x_ln, g.leaf(b.qkv_w)), g.leaf(b.qkv_b));
        std::vector<Value> head_outs;
        for (int h = 0; h < heads; ++h) {
            Value q = g.slice_cols(qkv, h * dh, dh);
            Value k = g.slice_cols(qkv, d + h * dh, dh);
            Value v = g.slice_cols(qkv, 2 * d + h * dh, dh);
            Value logits = g.scale(g.matmul(q, k, false, true), T(1) / T(std::sqrt(double(dh))));
            Value li = g.slice_rows(logits, 0, n_img);
            Value img_attn = g.softmax_rows(g.slice_cols(li, 0, n_img));
            Value txt_attn = g.softmax_rows(g.slice_cols(li, n_img, R - n_img));
            Value v_img = g.slice_rows(v, 0, n_img);
            Value v_txt = g.slice_rows(v, n_img, R - n_img);
            Value out_img = g.add(g.matmul(img_attn, v_img),
                                  g.mul(g.matmul(txt_attn, v_txt), gate));
            Value out_txt = g.matmul(g.softmax_rows(g.slice_rows(logits, n_img, R - n_img)), v);
            head_outs.push_back(g.concat_rows({out_img, out_txt}));
        }
        Value cat = heads == 1 ? head_outs[0] : g.concat_cols(head_outs);
        return g.add(g.matmul(cat, g.leaf(b.proj_w)), g.leaf(b.proj_b));
    }

    // ---- the predictor forward --------------------------------------------

    /// One forward per target block over [projected context || block mask
    /// tokens]; returns predictions in encoder dim plus the similarity
    /// capture when the fine conditioner is active.
    PredictOutput<T> predict(Graph<T>& g, Value z_x, const MaskSpec& mask,
                             const CaptionBatch<T>* captions) {
        bool needs_text = cfg.conditioner != ConditionerKind::none;
        if (needs_text && (!captions || captions->empty()))
            throw ConfigError("predict: conditioner '" +
                              std::string(to_string(cfg.conditioner)) +
                              "' requires a caption batch");
        int pd = cfg.pred_dim;
        int n_ctx = int(mask.context_indices.size());
        int N = needs_text ? int(captions->size()) : 0;

        PredictOutput<T> out;
        bool fine = cfg.conditioner == ConditionerKind::fine;
        if (fine) {
            out.sim.num_captions = N;
            out.sim.num_cond_layers = cfg.num_cond_layers();
            out.sim.seq_len = captions->front().t.cols();
            out.sim.O.assign(N, std::vector<std::vector<Value>>(cfg.depth));
        }

        // caption constants, shared across block forwards; the holistic mean
        // doubles as a length-1 word sequence ([d_t x 1] column form)
        std::vector<Value> t_mats, tbars, tcols;
        for (int n = 0; n < N; ++n) {
            t_mats.push_back(g.constant((*captions)[n].t));
            tbars.push_back(g.constant((*captions)[n].holistic));
            tcols.push_back(g.constant({text_dim, 1}, (*captions)[n].holistic.data));
        }

        // context rows projected into predictor width, plus pred-dim positions
        Tensor<T> pos_ctx({n_ctx, pd});
        for (int k = 0; k < n_ctx; ++k)
            std::copy(&pos.data[size_t(mask.context_indices[k]) * pd],
                      &pos.data[size_t(mask.context_indices[k]) * pd] + pd,
                      &pos_ctx.data[size_t(k) * pd]);
        Value ctx_in = g.add(g.add(g.matmul(z_x, g.leaf(in_w)), g.leaf(in_b)),
                             g.constant(pos_ctx));

        for (size_t bi = 0; bi < mask.target_blocks.size(); ++bi) {
            const auto& blk = mask.target_blocks[bi];
            int nb = int(blk.size());
            Tensor<T> pos_blk({nb, pd});
            for (int k = 0; k < nb; ++k)
                std::copy(&pos.data[size_t(blk[k]) * pd],
                          &pos.data[size_t(blk[k]) * pd] + pd,
                          &pos_blk.data[size_t(k) * pd]);
            // m_j = p_j + m~, built on demand
            Value mask_rows = g.add(g.add(g.zeros(nb, pd), g.leaf(mask_token)),
                                    g.constant(pos_blk));
            Value x = g.concat_rows({ctx_in, mask_rows});
            int n_img = n_ctx + nb;

            if (fine) {
                std::vector<int> ids = mask.context_indices;
                ids.insert(ids.end(), blk.begin(), blk.end());
                out.sim.row_patch_ids.push_back(std::move(ids));
            }

            if (cfg.conditioner == ConditionerKind::feature) {
                std::vector<Value> per_cap;
                for (int n = 0; n < N; ++n)
                    per_cap.push_back(feature_condition_rows(g, x, tbars[n]));
                x = fuse(g, per_cap, 0);
            }

            if (cfg.conditioner == ConditionerKind::sequence) {
                std::vector<Value> tok_parts;
                for (int n = 0; n < N; ++n)
                    tok_parts.push_back(g.add(
                        g.matmul(t_mats[n], g.leaf(sequence.tok_w), true, false),
                        g.leaf(sequence.tok_b)));
                x = g.concat_rows({x, g.concat_rows(tok_parts)});
            }

            for (int l = 0; l < cfg.depth; ++l) {
                if (cfg.conditioner == ConditionerKind::sequence) {
                    Value gate = g.leaf(sequence.gate[l]);
                    AttnOverride<T> ov = [this, n_img, gate](Graph<T>& gg, Value xln,
                                                             BlockParams<T>& bp, int heads) {
                        return gated_sequence_attention(gg, xln, bp, heads, n_img, gate);
                    };
                    x = vit_block(g, x, blocks[l], cfg.heads, nullptr, &ov);
                    continue;
                }
                if (cfg.conditioner == ConditionerKind::adaln && cfg.layer_conditioned(l)) {
                    std::vector<Value> per_cap;
                    for (int n = 0; n < N; ++n) {
                        AdaLnMod mod = adaln_modulation(g, adaln[l], tbars[n]);
                        per_cap.push_back(vit_block(g, x, blocks[l], cfg.heads, &mod));
                    }
                    x = fuse(g, per_cap, l);
                    continue;
                }
                x = vit_block(g, x, blocks[l], cfg.heads);
                if (cfg.conditioner == ConditionerKind::fine && cfg.layer_conditioned(l)) {
                    std::vector<Value> per_cap;
                    for (int n = 0; n < N; ++n) {
                        auto [xn, o] = cross_attend(g, x, xattn[l], t_mats[n],
                                                    &(*captions)[n].pad_mask, true);
                        per_cap.push_back(xn);
                        out.sim.O[n][l].push_back(o);
                    }
                    x = fuse(g, per_cap, l);
                } else if (cfg.conditioner == ConditionerKind::holistic &&
                           cfg.layer_conditioned(l)) {
                    std::vector<Value> per_cap;
                    for (int n = 0; n < N; ++n) {
                        auto [xn, o] = cross_attend(g, x, xattn[l], tcols[n], nullptr, false);
                        (void)o;
                        per_cap.push_back(xn);
                    }
                    x = fuse(g, per_cap, l);
                }
            }

            if (cfg.conditioner == ConditionerKind::sequence)
                x = g.slice_rows(x, 0, n_img);  // appended rows discarded
            x = g.layernorm_rows(x, g.leaf(lnf_g), g.leaf(lnf_b));
            Value pred_rows = g.slice_rows(x, n_ctx, nb);
            out.blocks.push_back(
                g.add(g.matmul(pred_rows, g.leaf(out_w)), g.leaf(out_b)));
        }
        return out;
    }
};

}  // namespace tcjepa
