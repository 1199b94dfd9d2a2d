#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tcjepa/tensor.hpp"

namespace tcjepa {

struct OptimConfig {
    double lr = 1e-3;            // peak learning rate
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double wd_start = 0.04;      // decoupled weight decay, linearly ramped
    double wd_end = 0.4;
    int warmup_steps = 100;
    int total_steps = 1000;
    double lr_final_frac = 0.0;  // cosine floor as a fraction of peak
    double ema_start = 0.996;    // target-encoder momentum, linearly ramped
    double ema_end = 1.0;

    void validate() const {
        if (lr <= 0) throw ConfigError("lr must be > 0");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw ConfigError("adam betas must lie in [0,1)");
        if (eps <= 0) throw ConfigError("adam eps must be > 0");
        if (warmup_steps < 0 || total_steps < 1 || warmup_steps > total_steps)
            throw ConfigError("need 0 <= warmup_steps <= total_steps, total_steps >= 1");
        if (wd_start < 0 || wd_end < 0) throw ConfigError("weight decay must be >= 0");
        if (ema_start < 0 || ema_start > 1 || ema_end < 0 || ema_end > 1)
            throw ConfigError("ema momentum must lie in [0,1]");
    }
};

/// Linear warmup to the peak, then cosine decay to lr_final_frac * peak.
inline double lr_at(const OptimConfig& c, long step) {
    if (step < 0) throw DomainError("lr_at: negative step");
    if (c.warmup_steps > 0 && step < c.warmup_steps)
        return c.lr * (double(step) + 1.0) / double(c.warmup_steps);
    long decay_steps = c.total_steps - c.warmup_steps;
    double t = decay_steps <= 0
                   ? 1.0
                   : double(std::min(step, long(c.total_steps)) - c.warmup_steps) /
                         double(decay_steps);
    double lo = c.lr * c.lr_final_frac;
    return lo + 0.5 * (c.lr - lo) * (1.0 + std::cos(t * 3.14159265358979323846));
}

/// Linear schedule over the full run (weight decay and EMA momentum).
inline double linear_at(double start, double end, long step, long total_steps) {
    if (total_steps <= 1) return end;
    double t = double(std::min(step, total_steps - 1)) / double(total_steps - 1);
    return start + (end - start) * t;
}

inline double wd_at(const OptimConfig& c, long step) {
    return linear_at(c.wd_start, c.wd_end, step, c.total_steps);
}
inline double ema_at(const OptimConfig& c, long step) {
    return linear_at(c.ema_start, c.ema_end, step, c.total_steps);
}

/// AdamW with decoupled weight decay and bias correction. Parameter order is
/// fixed at registration, so updates are deterministic.
template <class T>
class AdamW {
public:
    explicit AdamW(OptimConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    void add_param(const std::string& name, Tensor<T>& t) {
        if (!t.requires_grad) return;
        slots_.push_back(Slot{name, &t, std::vector<double>(t.data.size(), 0.0),
                              std::vector<double>(t.data.size(), 0.0)});
    }

    /// One update using the tensors' accumulated .grad, then zeroes grads.
    void step() {
        double lr = lr_at(cfg_, t_);
        double wd = wd_at(cfg_, t_);
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (auto& s : slots_) {
            Tensor<T>& p = *s.param;
            p.ensure_grad();
            bool decay = apply_decay(s.name, p);
            for (size_t i = 0; i < p.data.size(); ++i) {
                double g = double(p.grad[i]);
                if (!std::isfinite(g))
                    throw NumericError("AdamW: non-finite gradient in " + s.name);
                s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
                s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
                double mh = s.m[i] / bc1;
                double vh = s.v[i] / bc2;
                double x = double(p.data[i]);
                x -= lr * (mh / (std::sqrt(vh) + cfg_.eps));
                if (decay) x -= lr * wd * double(p.data[i]);
                p.data[i] = T(x);
            }
            p.zero_grad();
        }
    }

    long step_count() const { return t_; }
    void set_step_count(long t) {
        if (t < 0) throw DomainError("optimizer step count must be >= 0");
        t_ = t;
    }
    double current_lr() const { return lr_at(cfg_, t_); }
    double current_wd() const { return wd_at(cfg_, t_); }
    const OptimConfig& config() const { return cfg_; }

    size_t num_slots() const { return slots_.size(); }

    /// Moment access for checkpointing, in registration order.
    template <class F>
    void for_each_state(F&& f) {
        for (auto& s : slots_) f(s.name, s.m, s.v);
    }

private:
    struct Slot {
        std::string name;
        Tensor<T>* param;
        std::vector<double> m, v;
    };

    /// 1-D parameters (biases, LayerNorm affines, gates, the mask token and
    /// pooling queries are [1 x d]) are excluded from weight decay.
    static bool apply_decay(const std::string&, const Tensor<T>& p) {
        return p.rows() > 1 && p.cols() > 1;
    }

    OptimConfig cfg_;
    std::vector<Slot> slots_;
    long t_ = 0;
};

}  // namespace tcjepa
