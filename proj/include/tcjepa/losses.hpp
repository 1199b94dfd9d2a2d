#pragma once

#include <vector>

#include "tcjepa/predictor.hpp"

namespace tcjepa {

struct LossConfig {
    double lambda = 0.1;
    double beta = 0.5;

    void validate() const {
        if (lambda < 0 || beta < 0) throw ConfigError("loss coefficients must be >= 0");
    }
};

/// Eq.-4 breakdown. The component nodes stay in the graph so backward() on
/// `total` trains the whole composite.
struct LossBreakdown {
    Value l_predict;
    Value l_sparse;       // (1/N) sum over captions
    Value l_consistency;  // (1/N) sum over captions
    Value total;
};

/// Mean over all predicted rows (counted with multiplicity across target
/// blocks) of the row-wise Euclidean distance to the detached targets.
template <class T>
Value predict_loss(Graph<T>& g, const std::vector<Value>& pred_blocks,
                   const std::vector<Tensor<T>>& target_blocks) {
    if (pred_blocks.empty()) throw DomainError("predict_loss: no predicted blocks");
    if (pred_blocks.size() != target_blocks.size())
        throw DimensionError("predict_loss: block count mismatch");
    long total_rows = 0;
    Value acc{};
    for (size_t b = 0; b < pred_blocks.size(); ++b) {
        Value dist = g.l2_rows(pred_blocks[b], g.constant(target_blocks[b]));
        total_rows += g.rows(dist);
        Value s = g.sum_all(dist);
        acc = b == 0 ? s : g.add(acc, s);
    }
    return g.scale(acc, T(1) / T(total_rows));
}

namespace detail {

template <class T>
long sim_total_rows(Graph<T>& g, const SimilarityCapture& sim, int caption) {
    long rows = 0;
    for (const auto& layer : sim.O[caption])
        if (!layer.empty()) {
            for (Value o : layer) rows += g.rows(o);
            return rows;  // every conditioned layer shares the row structure
        }
    throw DomainError("similarity capture has no conditioned layers");
}

}  // namespace detail

/// Single-caption Eq.-3 sparsity term:
/// (1/(|B_x|+|B_y|)) * (1/L) * sum_{i,l} ||O^(l)_i||_1.
/// Entries are nonnegative by construction, so the L1 norm is a plain sum.
template <class T>
Value sparsity_loss(Graph<T>& g, const SimilarityCapture& sim, int caption) {
    if (!sim.populated()) throw DomainError("sparsity_loss: O not populated");
    long rows = detail::sim_total_rows(g, sim, caption);
    Value acc{};
    bool first = true;
    for (const auto& layer : sim.O[caption]) {
        for (Value o : layer) {
            Value s = g.sum_all(o);
            acc = first ? s : g.add(acc, s);
            first = false;
        }
    }
    return g.scale(acc, T(1) / (T(rows) * T(sim.num_cond_layers)));
}

/// Single-caption Eq.-3 consistency term:
/// (1/(|B_x|+|B_y|)) * (1/L) * sum_{i,l} ||O^(l)_i - Obar_i||_1,
/// with Obar the per-patch cross-layer mean. Exactly zero when L = 1.
template <class T>
Value consistency_loss(Graph<T>& g, const SimilarityCapture& sim, int caption) {
    if (!sim.populated()) throw DomainError("consistency_loss: O not populated");
    long rows = detail::sim_total_rows(g, sim, caption);
    int L = sim.num_cond_layers;
    size_t n_fwd = 0;
    for (const auto& layer : sim.O[caption])
        if (!layer.empty()) n_fwd = layer.size();

    Value acc{};
    bool first = true;
    for (size_t f = 0; f < n_fwd; ++f) {
        // cross-layer mean for this block forward
        Value obar{};
        bool ofirst = true;
        for (const auto& layer : sim.O[caption]) {
            if (layer.empty()) continue;
            obar = ofirst ? layer[f] : g.add(obar, layer[f]);
            ofirst = false;
        }
        obar = g.scale(obar, T(1) / T(L));
        for (const auto& layer : sim.O[caption]) {
            if (layer.empty()) continue;
            Value s = g.sum_all(g.abs(g.sub(layer[f], obar)));
            acc = first ? s : g.add(acc, s);
            first = false;
        }
    }
    return g.scale(acc, T(1) / (T(rows) * T(L)));
}

/// Eq. 4: total = l_predict + (lambda/N) sum_n sparse_n + (beta/N) sum_n cons_n.
/// With lambda = beta = 0 the similarity terms are never built, so total is
/// bit-identical to l_predict.
template <class T>
LossBreakdown total_loss(Graph<T>& g, Value l_predict, const SimilarityCapture& sim,
                         const LossConfig& cfg) {
    cfg.validate();
    LossBreakdown out;
    out.l_predict = l_predict;
    bool reg = (cfg.lambda > 0 || cfg.beta > 0) && sim.populated();
    if (!reg) {
        out.l_sparse = g.zeros(1, 1);
        out.l_consistency = g.zeros(1, 1);
        out.total = l_predict;
        return out;
    }
    int N = sim.num_captions;
    Value sp{}, co{};
    for (int n = 0; n < N; ++n) {
        Value s = sparsity_loss(g, sim, n);
        Value c = consistency_loss(g, sim, n);
        sp = n == 0 ? s : g.add(sp, s);
        co = n == 0 ? c : g.add(co, c);
    }
    out.l_sparse = g.scale(sp, T(1) / T(N));
    out.l_consistency = g.scale(co, T(1) / T(N));
    out.total = g.add(l_predict, g.add(g.scale(out.l_sparse, T(cfg.lambda)),
                                       g.scale(out.l_consistency, T(cfg.beta))));
    return out;
}

}  // namespace tcjepa
