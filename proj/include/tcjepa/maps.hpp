#pragma once

#include <json.hpp>

#include "tcjepa/losses.hpp"
#include "tcjepa/masking.hpp"
#include "tcjepa/synth.hpp"
#include "tcjepa/text.hpp"
#include "tcjepa/vit.hpp"

namespace tcjepa {

/// Patch-word similarity maps for one sample, in the layout documented in
/// docs/similarity_maps.schema.json: per (caption, layer, block forward, row)
/// score vectors over the S token positions, the layer-averaged map, and the
/// per-target-block prediction error.
template <class T>
nlohmann::json export_similarity_maps(EncoderParams<T>& online, EncoderPair<T>& pair,
                                      PredictorParams<T>& predictor,
                                      const Vocabulary& vocab, const SynthSample& sample,
                                      const MaskSpec& mask) {
    if (predictor.cfg.conditioner != ConditionerKind::fine)
        throw ConfigError("similarity maps require conditioner=fine, got '" +
                          std::string(to_string(predictor.cfg.conditioner)) + "'");
    Graph<T> g;
    Value z_x = online.encode_context(g, sample.image, mask);
    CaptionBatch<T> captions = make_caption_batch<T>(vocab, sample.captions);
    PredictOutput<T> po = predictor.predict(g, z_x, mask, &captions);

    nlohmann::json out;
    out["seq_len"] = po.sim.seq_len;
    out["num_captions"] = po.sim.num_captions;
    out["num_layers"] = po.sim.num_cond_layers;
    out["grid_rows"] = mask.grid.rows;
    out["grid_cols"] = mask.grid.cols;

    auto& records = out["records"];
    records = nlohmann::json::array();
    auto& averaged = out["layer_averaged"];
    averaged = nlohmann::json::array();
    int S = po.sim.seq_len;
    for (int n = 0; n < po.sim.num_captions; ++n) {
        for (size_t f = 0; f < po.sim.row_patch_ids.size(); ++f) {
            const auto& ids = po.sim.row_patch_ids[f];
            std::vector<std::vector<double>> mean(ids.size(), std::vector<double>(S, 0.0));
            for (int l = 0; l < predictor.cfg.depth; ++l) {
                if (po.sim.O[n][l].empty()) continue;
                Value o = po.sim.O[n][l][f];
                const auto& vals = g.val(o);
                for (size_t r = 0; r < ids.size(); ++r) {
                    nlohmann::json rec;
                    rec["caption_index"] = n;
                    rec["layer"] = l;
                    rec["block_forward"] = f;
                    rec["patch_index"] = ids[r];
                    auto& scores = rec["scores"];
                    scores = nlohmann::json::array();
                    for (int s = 0; s < S; ++s) {
                        double v = double(vals[r * size_t(S) + s]);
                        scores.push_back(v);
                        mean[r][s] += v / po.sim.num_cond_layers;
                    }
                    records.push_back(std::move(rec));
                }
            }
            for (size_t r = 0; r < ids.size(); ++r) {
                nlohmann::json rec;
                rec["caption_index"] = n;
                rec["block_forward"] = f;
                rec["patch_index"] = ids[r];
                rec["scores"] = mean[r];
                averaged.push_back(std::move(rec));
            }
        }
    }

    std::vector<Tensor<T>> targets = pair.encode_target(sample.image, mask);
    Value lp = predict_loss(g, po.blocks, targets);
    out["l_predict"] = double(g.scalar(lp));
    auto& per_block = out["block_errors"];
    per_block = nlohmann::json::array();
    for (size_t b = 0; b < po.blocks.size(); ++b) {
        Graph<T> gb;
        Value d = gb.l2_rows(gb.constant({g.rows(po.blocks[b]), g.cols(po.blocks[b])},
                                         g.val(po.blocks[b])),
                             gb.constant(targets[b]));
        per_block.push_back(double(gb.scalar(gb.mean_all(d))));
    }
    return out;
}

}  // namespace tcjepa
