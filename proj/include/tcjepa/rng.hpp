#pragma once

#include <cmath>
#include <cstdint>

namespace tcjepa {

/// Counter-based generator (splitmix64). State is a single u64, which keeps
/// checkpointing and cross-platform reproducibility trivial; std distributions
/// are implementation-defined so all sampling is done by hand here.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    /// Box-Muller; the spare sample is discarded so the state stays a plain u64.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Rejection-sampled truncated normal at +-2 sigma (ViT init convention).
    double trunc_normal(double stddev) {
        for (;;) {
            double x = normal();
            if (x >= -2.0 && x <= 2.0) return x * stddev;
        }
    }

    /// Derive an independent stream, e.g. per batch index.
    Rng fork(uint64_t salt) {
        Rng r(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL));
        return r;
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

private:
    uint64_t state_;
};

}  // namespace tcjepa
