// Benchmark comparing the serial reference kernels against the OpenMP
// variants, verifying bit-identical results while timing.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "tcjepa/kernels.hpp"
#include "tcjepa/rng.hpp"

using namespace tcjepa;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch())
        .count();
}

template <class F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        double t0 = now_ms();
        f();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

}  // namespace

int main() {
    Rng rng(1);
    std::printf("threads: %d\n", kernels::max_threads());
    std::printf("%8s %12s %12s %8s %s\n", "size", "serial(ms)", "omp(ms)", "speedup",
                "bitmatch");
    for (int n : {64, 128, 256, 512}) {
        std::vector<float> a(size_t(n) * n), b(size_t(n) * n);
        for (auto& v : a) v = float(rng.uniform(-1, 1));
        for (auto& v : b) v = float(rng.uniform(-1, 1));
        std::vector<float> cs(size_t(n) * n), cp(size_t(n) * n);
        double ts = time_best_of(3, [&] {
            kernels::matmul_serial(a.data(), b.data(), cs.data(), n, n, n, false, false);
        });
        double tp = time_best_of(3, [&] {
            kernels::matmul(a.data(), b.data(), cp.data(), n, n, n, false, false);
        });
        bool match = std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(float)) == 0;
        std::printf("%8d %12.3f %12.3f %8.2f %s\n", n, ts, tp, ts / tp,
                    match ? "yes" : "NO");
        if (!match) return 1;
    }
    return 0;
}
