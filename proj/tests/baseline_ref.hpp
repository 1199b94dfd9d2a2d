#pragma once

// Straight-line reference implementation of one unconditioned masked latent
// prediction loss (context encode -> predictor with mask tokens -> mean row
// L2 against detached EMA-encoder targets). Test-only dual route: the
// production path must match this bit for bit when no conditioner is active.

#include "tcjepa/trainer.hpp"

namespace tcjepa::testref {

inline float baseline_loss(Trainer<float>& tr, const SynthSample& s, const MaskSpec& mask) {
    auto& enc = tr.encoders().online;
    auto& pr = tr.predictor();
    const EncoderConfig& ec = enc.cfg;
    Graph<float> g;

    auto block_fwd = [&](Value x, BlockParams<float>& b, int heads) {
        int d = g.cols(x);
        int dh = d / heads;
        Value ln1 = g.layernorm_rows(x, g.leaf(b.ln1_g), g.leaf(b.ln1_b));
        Value qkv = g.add(g.matmul(ln1, g.leaf(b.qkv_w)), g.leaf(b.qkv_b));
        std::vector<Value> heads_out;
        for (int h = 0; h < heads; ++h) {
            Value q = g.slice_cols(qkv, h * dh, dh);
            Value k = g.slice_cols(qkv, d + h * dh, dh);
            Value v = g.slice_cols(qkv, 2 * d + h * dh, dh);
            Value logits =
                g.scale(g.matmul(q, k, false, true), 1.0f / float(std::sqrt(double(dh))));
            heads_out.push_back(g.matmul(g.softmax_rows(logits), v));
        }
        Value cat = heads == 1 ? heads_out[0] : g.concat_cols(heads_out);
        Value att = g.add(g.matmul(cat, g.leaf(b.proj_w)), g.leaf(b.proj_b));
        Value h = g.add(x, att);
        Value ln2 = g.layernorm_rows(h, g.leaf(b.ln2_g), g.leaf(b.ln2_b));
        Value m = g.add(
            g.matmul(g.gelu(g.add(g.matmul(ln2, g.leaf(b.fc1_w)), g.leaf(b.fc1_b))),
                     g.leaf(b.fc2_w)),
            g.leaf(b.fc2_b));
        return g.add(h, m);
    };

    // context rows only: gather patches and positions, project, run the trunk
    Tensor<float> patches = patchify<float>(s.image, ec.image_size, ec.patch_size);
    int pdim = ec.patch_dim(), d = ec.embed_dim;
    int n_ctx = int(mask.context_indices.size());
    Tensor<float> sel({n_ctx, pdim}), psel({n_ctx, d});
    for (int k = 0; k < n_ctx; ++k) {
        int i = mask.context_indices[k];
        std::copy(&patches.data[size_t(i) * pdim], &patches.data[size_t(i) * pdim] + pdim,
                  &sel.data[size_t(k) * pdim]);
        std::copy(&enc.pos.data[size_t(i) * d], &enc.pos.data[size_t(i) * d] + d,
                  &psel.data[size_t(k) * d]);
    }
    Value zx = g.add(g.add(g.matmul(g.constant(sel), g.leaf(enc.patch_w)),
                           g.leaf(enc.patch_b)),
                     g.constant(psel));
    for (auto& b : enc.blocks) zx = block_fwd(zx, b, ec.heads);
    zx = g.layernorm_rows(zx, g.leaf(enc.lnf_g), g.leaf(enc.lnf_b));

    // predictor input: projected context plus predictor-width positions
    int pd = pr.cfg.pred_dim;
    Tensor<float> pos_ctx({n_ctx, pd});
    for (int k = 0; k < n_ctx; ++k)
        std::copy(&pr.pos.data[size_t(mask.context_indices[k]) * pd],
                  &pr.pos.data[size_t(mask.context_indices[k]) * pd] + pd,
                  &pos_ctx.data[size_t(k) * pd]);
    Value ctx_in = g.add(g.add(g.matmul(zx, g.leaf(pr.in_w)), g.leaf(pr.in_b)),
                         g.constant(pos_ctx));

    // detached targets from the EMA encoder's full-image forward
    Tensor<float> full = tr.encoders().target.encode_full_nograd(s.image);

    long total_rows = 0;
    Value acc{};
    bool first = true;
    for (const auto& blk : mask.target_blocks) {
        int nb = int(blk.size());
        Tensor<float> pos_blk({nb, pd}), tgt({nb, d});
        for (int k = 0; k < nb; ++k) {
            std::copy(&pr.pos.data[size_t(blk[k]) * pd],
                      &pr.pos.data[size_t(blk[k]) * pd] + pd,
                      &pos_blk.data[size_t(k) * pd]);
            std::copy(&full.data[size_t(blk[k]) * d], &full.data[size_t(blk[k]) * d] + d,
                      &tgt.data[size_t(k) * d]);
        }
        Value mask_rows = g.add(g.add(g.zeros(nb, pd), g.leaf(pr.mask_token)),
                                g.constant(pos_blk));
        Value x = g.concat_rows({ctx_in, mask_rows});
        for (auto& b : pr.blocks) x = block_fwd(x, b, pr.cfg.heads);
        x = g.layernorm_rows(x, g.leaf(pr.lnf_g), g.leaf(pr.lnf_b));
        Value pred = g.add(g.matmul(g.slice_rows(x, n_ctx, nb), g.leaf(pr.out_w)),
                           g.leaf(pr.out_b));
        Value dist = g.l2_rows(pred, g.constant(tgt));
        total_rows += nb;
        Value sum = g.sum_all(dist);
        acc = first ? sum : g.add(acc, sum);
        first = false;
    }
    return g.scalar(g.scale(acc, 1.0f / float(total_rows)));
}

}  // namespace tcjepa::testref
