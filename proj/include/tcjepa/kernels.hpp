#pragma once

#include <cstddef>

#ifdef TCJEPA_OPENMP
#include <omp.h>
#endif

namespace tcjepa::kernels {

// Dense row-major kernels. Each output element is an independent dot product
// with a fixed k-loop order, so the parallel and serial variants are
// bit-identical; tests compare them and tools/bench_kernels times them.

template <class T>
void matmul_serial(const T* a, const T* b, T* c, int m, int k, int n,
                   bool trans_a, bool trans_b) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T acc = 0;
            for (int p = 0; p < k; ++p) {
                T av = trans_a ? a[p * m + i] : a[i * k + p];
                T bv = trans_b ? b[j * k + p] : b[p * n + j];
                acc += av * bv;
            }
            c[i * n + j] = acc;
        }
    }
}

template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n,
            bool trans_a, bool trans_b) {
#ifdef TCJEPA_OPENMP
    if (long(m) * k * n >= 32768) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                T acc = 0;
                for (int p = 0; p < k; ++p) {
                    T av = trans_a ? a[p * m + i] : a[i * k + p];
                    T bv = trans_b ? b[j * k + p] : b[p * n + j];
                    acc += av * bv;
                }
                c[i * n + j] = acc;
            }
        }
        return;
    }
#endif
    matmul_serial(a, b, c, m, k, n, trans_a, trans_b);
}

// c += a*b (used by matmul backward).
template <class T>
void matmul_acc_serial(const T* a, const T* b, T* c, int m, int k, int n,
                       bool trans_a, bool trans_b) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T acc = 0;
            for (int p = 0; p < k; ++p) {
                T av = trans_a ? a[p * m + i] : a[i * k + p];
                T bv = trans_b ? b[j * k + p] : b[p * n + j];
                acc += av * bv;
            }
            c[i * n + j] += acc;
        }
    }
}

template <class T>
void matmul_acc(const T* a, const T* b, T* c, int m, int k, int n,
                bool trans_a, bool trans_b) {
#ifdef TCJEPA_OPENMP
    if (long(m) * k * n >= 32768) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                T acc = 0;
                for (int p = 0; p < k; ++p) {
                    T av = trans_a ? a[p * m + i] : a[i * k + p];
                    T bv = trans_b ? b[j * k + p] : b[p * n + j];
                    acc += av * bv;
                }
                c[i * n + j] += acc;
            }
        }
        return;
    }
#endif
    matmul_acc_serial(a, b, c, m, k, n, trans_a, trans_b);
}

template <class T, class F>
void map_serial(const T* x, T* y, size_t n, F f) {
    for (size_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

template <class T, class F>
void map(const T* x, T* y, size_t n, F f) {
#ifdef TCJEPA_OPENMP
    if (n >= 16384) {
#pragma omp parallel for schedule(static)
        for (long i = 0; i < long(n); ++i) y[i] = f(x[i]);
        return;
    }
#endif
    map_serial(x, y, n, f);
}

inline int max_threads() {
#ifdef TCJEPA_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef TCJEPA_OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace tcjepa::kernels
