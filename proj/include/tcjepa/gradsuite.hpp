#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tcjepa/gradcheck.hpp"
#include "tcjepa/losses.hpp"
#include "tcjepa/synth.hpp"
#include "tcjepa/text.hpp"
#include "tcjepa/vit.hpp"

namespace tcjepa {

using GradSuiteResult = std::vector<std::pair<std::string, GradCheckReport>>;

namespace gradsuite_detail {

inline Tensor<double> rand_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(s), true);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace gradsuite_detail

/// Finite-difference oracle over every autodiff op. Inputs are random but
/// seeded, kept away from kinks (|x| bounded below for relu/abs, positive
/// for sqrt/log, ties broken for max paths).
inline GradSuiteResult run_op_gradchecks() {
    using gradsuite_detail::rand_tensor;
    GradSuiteResult out;
    Rng rng(2024);
    auto check = [&](const std::string& name, std::vector<Tensor<double>*> inputs,
                     const GradCheckFn& f) {
        out.emplace_back(name, grad_check(f, std::move(inputs)));
    };

    // matmul, all transpose combinations
    for (int ta = 0; ta < 2; ++ta)
        for (int tb = 0; tb < 2; ++tb) {
            auto a = std::make_shared<Tensor<double>>(
                rand_tensor(ta ? Shape{4, 3} : Shape{3, 4}, rng));
            auto b = std::make_shared<Tensor<double>>(
                rand_tensor(tb ? Shape{5, 4} : Shape{4, 5}, rng));
            check("matmul_t" + std::to_string(ta) + std::to_string(tb),
                  {a.get(), b.get()},
                  [a, b, ta, tb](Graph<double>& g, std::vector<Tensor<double>*>&) {
                      return g.sum_all(
                          g.gelu(g.matmul(g.leaf(*a), g.leaf(*b), ta != 0, tb != 0)));
                  });
        }

    // binary ops across broadcast shapes
    struct BinCase {
        const char* name;
        Shape bshape;
    };
    for (const BinCase& bc :
         {BinCase{"full", {3, 4}}, BinCase{"row", {1, 4}}, BinCase{"scalar", {1, 1}}}) {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({3, 4}, rng, 0.5, 2.0));
        auto b = std::make_shared<Tensor<double>>(rand_tensor(bc.bshape, rng, 0.5, 2.0));
        check(std::string("add_") + bc.name, {a.get(), b.get()},
              [a, b](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.gelu(g.add(g.leaf(*a), g.leaf(*b))));
              });
        check(std::string("sub_") + bc.name, {a.get(), b.get()},
              [a, b](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.gelu(g.sub(g.leaf(*a), g.leaf(*b))));
              });
        check(std::string("mul_") + bc.name, {a.get(), b.get()},
              [a, b](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.gelu(g.mul(g.leaf(*a), g.leaf(*b))));
              });
        check(std::string("div_") + bc.name, {a.get(), b.get()},
              [a, b](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.gelu(g.div(g.leaf(*a), g.leaf(*b))));
              });
        // keep operands well separated so the finite difference never
        // crosses the max kink
        auto am = std::make_shared<Tensor<double>>(*a);
        auto bm = std::make_shared<Tensor<double>>(*b);
        for (size_t i = 0; i < bm->data.size(); ++i) bm->data[i] += 0.37;
        check(std::string("maximum_") + bc.name, {am.get(), bm.get()},
              [am, bm](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.gelu(g.maximum(g.leaf(*am), g.leaf(*bm))));
              });
    }

    {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({3, 5}, rng));
        check("scale", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.scale(g.leaf(*a), -1.7)));
        });
        check("add_scalar", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.add_scalar(g.leaf(*a), 0.31)));
        });
        check("gelu", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.leaf(*a)));
        });
    }
    {
        // keep |x| > 0.1 so relu/abs kinks stay out of the stencil
        auto a = std::make_shared<Tensor<double>>(rand_tensor({3, 5}, rng));
        for (auto& v : a->data) v += (v >= 0 ? 0.15 : -0.15);
        check("relu", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.relu(g.leaf(*a))));
        });
        check("abs", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.abs(g.leaf(*a))));
        });
    }
    {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({3, 5}, rng, 0.5, 3.0));
        check("sqrt", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.sqrt(g.leaf(*a))));
        });
        check("log", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.log(g.leaf(*a))));
        });
    }
    {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({3, 6}, rng));
        check("softmax_rows", {a.get()},
              [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  auto w = g.softmax_rows(g.leaf(*a));
                  // weighted readout so the gradient is not trivially zero
                  Tensor<double> r({3, 6});
                  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] = double(i % 7) - 3.0;
                  return g.sum_all(g.mul(w, g.constant(r)));
              });
    }
    {
        auto x = std::make_shared<Tensor<double>>(rand_tensor({3, 8}, rng));
        auto gm = std::make_shared<Tensor<double>>(rand_tensor({1, 8}, rng, 0.5, 1.5));
        auto bt = std::make_shared<Tensor<double>>(rand_tensor({1, 8}, rng));
        check("layernorm_rows", {x.get(), gm.get(), bt.get()},
              [x, gm, bt](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(
                      g.gelu(g.layernorm_rows(g.leaf(*x), g.leaf(*gm), g.leaf(*bt))));
              });
    }
    for (int axis = 0; axis < 2; ++axis) {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({3, 5}, rng));
        for (ReduceKind k : {ReduceKind::sum, ReduceKind::mean, ReduceKind::max}) {
            const char* kn = k == ReduceKind::sum ? "sum" : k == ReduceKind::mean ? "mean" : "max";
            check(std::string("reduce_") + kn + "_axis" + std::to_string(axis), {a.get()},
                  [a, k, axis](Graph<double>& g, std::vector<Tensor<double>*>&) {
                      return g.sum_all(g.gelu(g.reduce(g.leaf(*a), k, axis)));
                  });
        }
    }
    {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({5, 4}, rng));
        check("gather_rows", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.gather_rows(g.leaf(*a), {4, 0, 2, 0})));
        });
        check("slice_rows", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.slice_rows(g.leaf(*a), 1, 3)));
        });
        check("slice_cols", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.slice_cols(g.leaf(*a), 1, 2)));
        });
        check("transpose", {a.get()}, [a](Graph<double>& g, std::vector<Tensor<double>*>&) {
            return g.sum_all(g.gelu(g.transpose(g.leaf(*a))));
        });
    }
    {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({2, 4}, rng));
        auto b = std::make_shared<Tensor<double>>(rand_tensor({3, 4}, rng));
        check("concat_rows", {a.get(), b.get()},
              [a, b](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.gelu(g.concat_rows({g.leaf(*a), g.leaf(*b)})));
              });
        auto c = std::make_shared<Tensor<double>>(rand_tensor({2, 3}, rng));
        check("concat_cols", {a.get(), c.get()},
              [a, c](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.gelu(g.concat_cols({g.leaf(*a), g.leaf(*c)})));
              });
    }
    {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({3, 4}, rng));
        auto s = std::make_shared<Tensor<double>>(rand_tensor({3, 1}, rng, 0.5, 2.0));
        check("scale_rows", {a.get(), s.get()},
              [a, s](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.gelu(g.scale_rows(g.leaf(*a), g.leaf(*s))));
              });
    }
    {
        auto a = std::make_shared<Tensor<double>>(rand_tensor({3, 4}, rng));
        auto b = std::make_shared<Tensor<double>>(rand_tensor({3, 4}, rng, 2.0, 3.0));
        check("l2_rows", {a.get(), b.get()},
              [a, b](Graph<double>& g, std::vector<Tensor<double>*>&) {
                  return g.sum_all(g.l2_rows(g.leaf(*a), g.leaf(*b)));
              });
    }
    return out;
}

/// End-to-end oracle for the full Eq. 4 composite: fine conditioner, N=2
/// captions, 2x2-patch model, f64 parameters. Target features are a fixed
/// detached constant (the real trainer detaches them the same way).
inline GradCheckReport run_composite_gradcheck() {
    EncoderConfig ec;
    ec.image_size = 8;
    ec.patch_size = 4;
    ec.embed_dim = 8;
    ec.depth = 1;
    ec.heads = 2;
    ec.mlp_ratio = 2;

    PredictorConfig pc;
    pc.pred_dim = 8;
    pc.depth = 2;
    pc.heads = 2;
    pc.mlp_ratio = 2;
    pc.conditioner = ConditionerKind::fine;
    pc.fusion = FusionKind::max;

    SynthConfig sc;
    sc.image_size = 8;
    sc.cell_grid = 2;
    sc.seq_len = 8;
    sc.embed_dim = 8;
    sc.vocab_size = 32;
    sc.min_placements = 2;
    sc.max_placements = 2;

    Rng rng(7);
    auto enc = std::make_shared<EncoderParams<double>>();
    enc->init(ec, rng);
    auto pred = std::make_shared<PredictorParams<double>>();
    pred->init(pc, ec.embed_dim, sc.embed_dim, ec.grid(), rng);
    // zero-init paths would hide bad conditioner gradients; perturb them
    Rng prng(11);
    pred->for_each("", [&](const std::string&, Tensor<double>& t) {
        for (auto& v : t.data) v += prng.uniform(-0.05, 0.05);
    });

    Vocabulary vocab(sc);
    auto sample =
        std::make_shared<SynthSample>(make_sample(sc, vocab, 2, 123, 0));
    auto mask = std::make_shared<MaskSpec>();
    mask->grid = ec.grid();
    mask->context_indices = {0, 1};
    mask->target_blocks = {{2}, {3}};
    auto captions = std::make_shared<CaptionBatch<double>>(
        make_caption_batch<double>(vocab, sample->captions));
    auto targets = std::make_shared<std::vector<Tensor<double>>>();
    {
        Rng trng(17);
        for (const auto& blk : mask->target_blocks)
            targets->push_back(gradsuite_detail::rand_tensor(
                {int(blk.size()), ec.embed_dim}, trng, -0.5, 0.5));
    }
    LossConfig lc;  // defaults: lambda 0.1, beta 0.5

    std::vector<Tensor<double>*> inputs;
    enc->for_each("enc", [&](const std::string&, Tensor<double>& t) { inputs.push_back(&t); });
    pred->for_each("pred", [&](const std::string&, Tensor<double>& t) { inputs.push_back(&t); });

    GradCheckFn f = [enc, pred, sample, mask, captions, targets,
                     lc](Graph<double>& g, std::vector<Tensor<double>*>&) {
        Value z_x = enc->encode_context(g, sample->image, *mask);
        PredictOutput<double> po = pred->predict(g, z_x, *mask, captions.get());
        Value lp = predict_loss(g, po.blocks, *targets);
        LossBreakdown lb = total_loss(g, lp, po.sim, lc);
        return lb.total;
    };
    return grad_check(f, inputs);
}

}  // namespace tcjepa
