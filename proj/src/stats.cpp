#include "tcjepa/stats.hpp"

#include <cmath>
#include <sstream>

namespace tcjepa {

namespace {

long block_params(long d, long mlp_ratio) {
    long h = d * mlp_ratio;
    long ln = 2 * 2 * d;                  // two LayerNorm affines
    long attn = d * 3 * d + 3 * d + d * d + d;
    long mlp = d * h + h + h * d + d;
    return ln + attn + mlp;
}

double block_flops(double rows, double d, double mlp_ratio) {
    double h = d * mlp_ratio;
    double attn = 2 * rows * d * 3 * d      // qkv
                  + 2 * rows * rows * d     // logits
                  + 2 * rows * rows * d     // attn * V
                  + 2 * rows * d * d;       // output projection
    double mlp = 2 * rows * d * h + 2 * rows * h * d;
    return attn + mlp;
}

long xattn_layer_params(long pd, long dt) {
    long proj = pd * pd + dt * pd + dt * pd + pd * pd;  // wq, wk, wv, wo
    long ln = 2 * pd;
    long mlp = pd * 4 * pd + 4 * pd + 4 * pd * pd + pd;
    long fuse = pd;
    return proj + ln + mlp + fuse;
}

double xattn_layer_flops(double rows, double S, double pd, double dt) {
    double proj = 2 * rows * pd * pd        // q
                  + 2 * S * dt * pd * 2     // K, V
                  + 2 * rows * S * pd       // logits
                  + 2 * rows * S * pd       // attn * V
                  + 2 * rows * pd * pd;     // output projection
    double mlp = 2 * rows * pd * 4 * pd + 2 * rows * 4 * pd * pd;
    double cosine = 3 * rows * S * pd;      // numerator + the two norms
    return proj + mlp + cosine;
}

}  // namespace

ModelStats compute_stats(const TrainConfig& cfg) {
    cfg.encoder.validate();
    ModelStats s;
    const auto& e = cfg.encoder;
    const auto& p = cfg.predictor;
    long d = e.embed_dim, pd = p.pred_dim, dt = cfg.synth.embed_dim;
    long P = e.num_patches();
    long S = cfg.synth.seq_len;
    long N = cfg.n_captions;
    long L = p.num_cond_layers();

    // ---- parameters ---------------------------------------------------------
    s.encoder_params = long(e.patch_dim()) * d + d;           // patch projection
    s.encoder_params += long(e.depth) * block_params(d, e.mlp_ratio);
    if (e.depth > 0) s.encoder_params += 2 * d;               // final LayerNorm

    s.predictor_params = d * pd + pd      // input projection
                         + pd             // mask token
                         + 2 * pd         // final LayerNorm
                         + pd * d + d;    // output projection
    s.predictor_params += long(p.depth) * block_params(pd, p.mlp_ratio);

    switch (p.conditioner) {
        case ConditionerKind::none:
            break;
        case ConditionerKind::fine:
        case ConditionerKind::holistic:
            s.conditioner_params = L * xattn_layer_params(pd, dt);
            break;
        case ConditionerKind::adaln:
            s.conditioner_params = L * (dt * pd + pd + pd * 4 * pd + 4 * pd);
            break;
        case ConditionerKind::feature:
            s.conditioner_params = 2 * (pd + dt)                 // LayerNorm affine
                                   + (pd + dt) * pd + pd         // first MLP layer
                                   + pd * pd + pd;               // zero-init output
            break;
        case ConditionerKind::sequence:
            s.conditioner_params = dt * pd + pd + p.depth;       // projection + gates
            break;
    }
    s.total_params = s.encoder_params + s.predictor_params + s.conditioner_params;

    // ---- forward FLOPs ------------------------------------------------------
    double ctx_frac =
        0.5 * (cfg.masking.context_scale_min + cfg.masking.context_scale_max);
    double tgt_frac =
        0.5 * (cfg.masking.target_scale_min + cfg.masking.target_scale_max);
    double tgt_rows = std::max(1.0, tgt_frac * double(P));
    double ctx_rows = std::max(
        1.0, ctx_frac * double(P) * std::pow(1.0 - tgt_frac, cfg.masking.num_targets));
    double fwd_rows = ctx_rows + tgt_rows;  // one predictor forward

    s.encoder_flops = 2.0 * P * e.patch_dim() * d;
    for (int l = 0; l < e.depth; ++l) s.encoder_flops += block_flops(double(P), double(d), e.mlp_ratio);

    double nb = cfg.masking.num_targets;
    double base = 2.0 * ctx_rows * d * pd                  // input projection (shared)
                  + nb * (2.0 * fwd_rows * pd * d          // output projection
                          + 0);
    for (int l = 0; l < p.depth; ++l)
        base += nb * block_flops(fwd_rows, double(pd), p.mlp_ratio);
    s.predictor_flops_base = base;

    double cond = 0;
    switch (p.conditioner) {
        case ConditionerKind::none:
            break;
        case ConditionerKind::fine:
            cond = nb * N * L * xattn_layer_flops(fwd_rows, double(S), double(pd), double(dt));
            break;
        case ConditionerKind::holistic:
            cond = nb * N * L * xattn_layer_flops(fwd_rows, 1.0, double(pd), double(dt));
            break;
        case ConditionerKind::adaln:
            // modulation MLP per caption per layer, plus N-1 extra block runs
            cond = nb * N * L * (2.0 * dt * pd + 2.0 * pd * 4 * pd);
            cond += nb * (N - 1) * L * block_flops(fwd_rows, double(pd), p.mlp_ratio);
            break;
        case ConditionerKind::feature:
            cond = nb * N * (2.0 * fwd_rows * (pd + dt) * pd + 2.0 * fwd_rows * pd * pd);
            break;
        case ConditionerKind::sequence: {
            // attention rows grow by the appended caption tokens
            double rows2 = fwd_rows + double(N) * double(S);
            for (int l = 0; l < p.depth; ++l)
                cond += nb * (block_flops(rows2, double(pd), p.mlp_ratio) -
                              block_flops(fwd_rows, double(pd), p.mlp_ratio));
            cond += nb * 2.0 * double(N) * double(S) * dt * pd;  // token projection
            break;
        }
    }
    s.conditioner_flops = cond;
    s.overhead_ratio = (s.predictor_flops_base + cond) / s.predictor_flops_base;
    return s;
}

std::string ModelStats::describe() const {
    std::ostringstream os;
    os << "encoder_params=" << encoder_params << "\n"
       << "predictor_params=" << predictor_params << "\n"
       << "conditioner_params=" << conditioner_params << "\n"
       << "total_params=" << total_params << "\n"
       << "encoder_flops=" << encoder_flops << "\n"
       << "predictor_flops_base=" << predictor_flops_base << "\n"
       << "conditioner_flops=" << conditioner_flops << "\n"
       << "overhead_ratio=" << overhead_ratio << "\n";
    return os.str();
}

}  // namespace tcjepa
