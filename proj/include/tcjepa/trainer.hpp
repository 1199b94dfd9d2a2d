#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "tcjepa/checkpoint.hpp"
#include "tcjepa/losses.hpp"
#include "tcjepa/masking.hpp"
#include "tcjepa/optim.hpp"
#include "tcjepa/synth.hpp"
#include "tcjepa/text.hpp"
#include "tcjepa/vit.hpp"

namespace tcjepa {

struct TrainConfig {
    EncoderConfig encoder;
    PredictorConfig predictor;
    SynthConfig synth;
    MaskingConfig masking;
    OptimConfig optim;
    LossConfig loss;
    int n_captions = 4;       // N
    int batch_size = 4;
    long dataset_size = 512;  // images cycled deterministically
    uint64_t seed = 1;
    long steps = 1000;
    int log_every = 10;

    void validate() const {
        encoder.validate();
        optim.validate();
        loss.validate();
        if (n_captions < 1) throw ConfigError("n_captions must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (dataset_size < 1) throw ConfigError("dataset_size must be >= 1");
        if (steps < 1) throw ConfigError("steps must be >= 1");
        if (encoder.image_size != synth.image_size)
            throw ConfigError("encoder and dataset image sizes disagree");
        if (predictor.conditioner != ConditionerKind::none &&
            synth.embed_dim < 4)
            throw ConfigError("text embed_dim too small");
    }
};

struct StepMetrics {
    long step = 0;
    double l_predict = 0, l_sparse = 0, l_consistency = 0, total = 0;
    double lr = 0, wd = 0, ema_m = 0;
};

inline std::string metrics_header() {
    return "step,l_predict,l_sparse,l_consistency,total,lr,wd,ema_m";
}

inline std::string format_metrics(const StepMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                  m.step, m.l_predict, m.l_sparse, m.l_consistency, m.total, m.lr, m.wd,
                  m.ema_m);
    return buf;
}

template <class T = float>
class Trainer {
public:
    explicit Trainer(TrainConfig cfg)
        : cfg_(std::move(cfg)), vocab_(cfg_.synth), opt_(cfg_.optim),
          mask_rng_(cfg_.seed ^ 0x6d61736bULL) {
        cfg_.validate();
        cfg_.optim.validate();
        Rng init_rng(cfg_.seed);
        encoders_.init(cfg_.encoder, init_rng);
        predictor_.init(cfg_.predictor, cfg_.encoder.embed_dim, cfg_.synth.embed_dim,
                        cfg_.encoder.grid(), init_rng);
        register_params();
    }

    /// Builds the full forward for one image and returns the loss breakdown
    /// in the caller's graph (shared by training and the dual-route tests).
    LossBreakdown image_loss(Graph<T>& g, const SynthSample& sample, const MaskSpec& mask) {
        Value z_x = encoders_.online.encode_context(g, sample.image, mask);
        CaptionBatch<T> captions;
        const CaptionBatch<T>* cap_ptr = nullptr;
        if (cfg_.predictor.conditioner != ConditionerKind::none) {
            captions = make_caption_batch<T>(vocab_, sample.captions);
            cap_ptr = &captions;
        }
        PredictOutput<T> pred = predictor_.predict(g, z_x, mask, cap_ptr);
        std::vector<Tensor<T>> targets = targets_for(sample.image, mask);
        Value lp = predict_loss(g, pred.blocks, targets);
        return total_loss(g, lp, pred.sim, cfg_.loss);
    }

    StepMetrics train_step() {
        StepMetrics m;
        m.step = step_;
        m.lr = lr_at(cfg_.optim, step_);
        m.wd = wd_at(cfg_.optim, step_);
        m.ema_m = ema_at(cfg_.optim, step_);
        for (int b = 0; b < cfg_.batch_size; ++b) {
            long index = (step_ * cfg_.batch_size + b) % cfg_.dataset_size;
            SynthSample sample =
                make_sample(cfg_.synth, vocab_, cfg_.n_captions, cfg_.seed, index);
            MaskSpec mask = sample_mask(cfg_.masking, cfg_.encoder.grid(), mask_rng_);
            Graph<T> g;
            LossBreakdown lb = image_loss(g, sample, mask);
            double total = double(g.scalar(lb.total));
            if (!std::isfinite(total))
                throw NumericError("train step " + std::to_string(step_) +
                                   ": non-finite loss (l_predict=" +
                                   std::to_string(double(g.scalar(lb.l_predict))) +
                                   ", l_sparse=" +
                                   std::to_string(double(g.scalar(lb.l_sparse))) +
                                   ", l_cons=" +
                                   std::to_string(double(g.scalar(lb.l_consistency))) + ")");
            m.l_predict += double(g.scalar(lb.l_predict)) / cfg_.batch_size;
            m.l_sparse += double(g.scalar(lb.l_sparse)) / cfg_.batch_size;
            m.l_consistency += double(g.scalar(lb.l_consistency)) / cfg_.batch_size;
            m.total += total / cfg_.batch_size;
            g.backward(lb.total, T(1) / T(cfg_.batch_size));
        }
        opt_.step();
        encoders_.ema_update(T(m.ema_m));
        ++step_;
        return m;
    }

    /// Runs until cfg.steps, appending metrics rows every log_every steps
    /// (and always for the final step).
    void run(std::ostream* metrics_out) {
        if (metrics_out && step_ == 0) *metrics_out << metrics_header() << "\n";
        while (step_ < cfg_.steps) {
            StepMetrics m = train_step();
            if (metrics_out &&
                (m.step % cfg_.log_every == 0 || m.step == cfg_.steps - 1)) {
                *metrics_out << format_metrics(m) << "\n";
                metrics_out->flush();
            }
        }
    }

    // ---- persistence --------------------------------------------------------

    void save(const std::string& path) {
        ckpt::Store store;
        for_each_param([&](const std::string& name, Tensor<T>& t) {
            ckpt::put_tensor(store, name, t);
        });
        encoders_.target.for_each(
            "tgt", [&](const std::string& name, Tensor<T>& t) {
                ckpt::put_tensor(store, name, t);
            });
        opt_.for_each_state([&](const std::string& name, std::vector<double>& mom,
                                std::vector<double>& vel) {
            ckpt::put_vector(store, "opt.m." + name, mom);
            ckpt::put_vector(store, "opt.v." + name, vel);
        });
        ckpt::put_u64(store, "meta.step", uint64_t(step_));
        ckpt::put_u64(store, "meta.opt_step", uint64_t(opt_.step_count()));
        ckpt::put_u64(store, "meta.mask_rng", mask_rng_.state());
        ckpt::save(path, store);
    }

    void load(const std::string& path) {
        ckpt::Store store = ckpt::load(path);
        for_each_param([&](const std::string& name, Tensor<T>& t) {
            ckpt::load_tensor(store, name, t);
        });
        encoders_.target.for_each(
            "tgt", [&](const std::string& name, Tensor<T>& t) {
                ckpt::load_tensor(store, name, t);
            });
        opt_.for_each_state([&](const std::string& name, std::vector<double>& mom,
                                std::vector<double>& vel) {
            auto lm = ckpt::get_vector<double>(store, "opt.m." + name);
            auto lv = ckpt::get_vector<double>(store, "opt.v." + name);
            if (lm.size() != mom.size() || lv.size() != vel.size())
                throw CheckpointError("optimizer state size mismatch for " + name);
            mom = std::move(lm);
            vel = std::move(lv);
        });
        step_ = long(ckpt::get_u64(store, "meta.step"));
        opt_.set_step_count(long(ckpt::get_u64(store, "meta.opt_step")));
        mask_rng_.set_state(ckpt::get_u64(store, "meta.mask_rng"));
    }

    // ---- access -------------------------------------------------------------

    const TrainConfig& config() const { return cfg_; }
    long step() const { return step_; }
    EncoderPair<T>& encoders() { return encoders_; }
    PredictorParams<T>& predictor() { return predictor_; }
    const Vocabulary& vocab() const { return vocab_; }
    Rng& mask_rng() { return mask_rng_; }

    template <class F>
    void for_each_param(F&& f) {
        encoders_.online.for_each("enc", f);
        predictor_.for_each("pred", f);
    }

    std::vector<Tensor<T>> targets_for(const std::vector<float>& image,
                                       const MaskSpec& mask) {
        return encoders_.encode_target(image, mask);
    }

private:
    void register_params() {
        for_each_param([&](const std::string& name, Tensor<T>& t) {
            opt_.add_param(name, t);
        });
    }

    TrainConfig cfg_;
    Vocabulary vocab_;
    EncoderPair<T> encoders_;
    PredictorParams<T> predictor_;
    AdamW<T> opt_;
    Rng mask_rng_;
    long step_ = 0;
};

}  // namespace tcjepa
