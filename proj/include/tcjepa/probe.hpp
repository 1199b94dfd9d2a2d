#pragma once

#include <cmath>
#include <vector>

#include "tcjepa/synth.hpp"
#include "tcjepa/vit.hpp"

namespace tcjepa {

struct ProbeConfig {
    long train_size = 256;
    long eval_size = 128;
    int epochs = 200;
    double lr = 0.5;
    uint64_t seed = 99;  // dataset seed; eval uses a disjoint index range

    void validate() const {
        if (train_size < 1 || eval_size < 1) throw ConfigError("probe set sizes must be >= 1");
        if (epochs < 1) throw ConfigError("probe epochs must be >= 1");
        if (lr <= 0) throw ConfigError("probe lr must be > 0");
    }
};

struct ProbeResult {
    double train_acc = 0;
    double eval_acc = 0;
};

/// Frozen average-pooled patch features for one image.
template <class T>
std::vector<double> probe_features(EncoderParams<T>& enc, const std::vector<float>& image) {
    Tensor<T> full = enc.encode_full_nograd(image);
    int P = full.rows(), d = full.cols();
    std::vector<double> f(d, 0.0);
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < d; ++j) f[j] += double(full.data[size_t(i) * d + j]);
    for (double& v : f) v /= P;
    return f;
}

/// Linear probing: a multinomial logistic classifier trained by full-batch
/// gradient descent on frozen features (encoder never updated). Labels are
/// the subject glyph ids, so chance is 1/num_glyphs.
template <class T>
ProbeResult run_probe(EncoderParams<T>& enc, const SynthConfig& synth,
                      const Vocabulary& vocab, const ProbeConfig& cfg) {
    cfg.validate();
    int C = synth.num_glyphs;
    int d = enc.cfg.embed_dim;

    auto gather = [&](long offset, long count, std::vector<std::vector<double>>& xs,
                      std::vector<int>& ys) {
        for (long i = 0; i < count; ++i) {
            SynthSample s = make_sample(synth, vocab, 1, cfg.seed, offset + i);
            xs.push_back(probe_features(enc, s.image));
            ys.push_back(s.label);
        }
    };
    std::vector<std::vector<double>> xtr, xev;
    std::vector<int> ytr, yev;
    gather(0, cfg.train_size, xtr, ytr);
    gather(cfg.train_size + (1L << 20), cfg.eval_size, xev, yev);  // disjoint indices

    // standardize with train statistics
    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    for (const auto& x : xtr)
        for (int j = 0; j < d; ++j) mu[j] += x[j];
    for (double& v : mu) v /= double(xtr.size());
    for (const auto& x : xtr)
        for (int j = 0; j < d; ++j) sd[j] += (x[j] - mu[j]) * (x[j] - mu[j]);
    for (double& v : sd) v = std::sqrt(v / double(xtr.size())) + 1e-8;
    auto standardize = [&](std::vector<std::vector<double>>& xs) {
        for (auto& x : xs)
            for (int j = 0; j < d; ++j) x[j] = (x[j] - mu[j]) / sd[j];
    };
    standardize(xtr);
    standardize(xev);

    std::vector<double> W(size_t(d) * C, 0.0), b(C, 0.0);
    std::vector<double> gw(W.size()), gb(C), logits(C);
    long n = long(xtr.size());
    for (int e = 0; e < cfg.epochs; ++e) {
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (long i = 0; i < n; ++i) {
            const auto& x = xtr[i];
            double mx = -1e300;
            for (int c = 0; c < C; ++c) {
                double z = b[c];
                for (int j = 0; j < d; ++j) z += x[j] * W[size_t(j) * C + c];
                logits[c] = z;
                mx = std::max(mx, z);
            }
            double sum = 0;
            for (int c = 0; c < C; ++c) {
                logits[c] = std::exp(logits[c] - mx);
                sum += logits[c];
            }
            for (int c = 0; c < C; ++c) {
                double p = logits[c] / sum - (c == ytr[i] ? 1.0 : 0.0);
                gb[c] += p;
                for (int j = 0; j < d; ++j) gw[size_t(j) * C + c] += p * x[j];
            }
        }
        double s = cfg.lr / double(n);
        for (size_t k = 0; k < W.size(); ++k) W[k] -= s * gw[k];
        for (int c = 0; c < C; ++c) b[c] -= s * gb[c];
    }

    auto accuracy = [&](const std::vector<std::vector<double>>& xs,
                        const std::vector<int>& ys) {
        long hit = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            int best = 0;
            double bz = -1e300;
            for (int c = 0; c < C; ++c) {
                double z = b[c];
                for (int j = 0; j < d; ++j) z += xs[i][j] * W[size_t(j) * C + c];
                if (z > bz) {
                    bz = z;
                    best = c;
                }
            }
            if (best == ys[i]) ++hit;
        }
        return double(hit) / double(xs.size());
    };
    ProbeResult r;
    r.train_acc = accuracy(xtr, ytr);
    r.eval_acc = accuracy(xev, yev);
    return r;
}

}  // namespace tcjepa
