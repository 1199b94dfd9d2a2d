#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "tcjepa/common.hpp"
#include "tcjepa/kernels.hpp"
#include "tcjepa/tensor.hpp"

namespace tcjepa {

/// Handle to a node in a Graph. Valid only for the graph that produced it.
struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

enum class ReduceKind { sum, mean, max };
enum class EwKind { relu, gelu, abs_, sqrt_, log_ };

/// Reverse-mode autodiff tape over rank-2 tensors. Nodes are appended in
/// creation order, which is a topological order; backward replays it in
/// reverse. All shapes are [rows x cols]; scalars are [1x1].
template <class T>
class Graph {
public:
    Value leaf(Tensor<T>& t) {
        Shape s = t.shape;
        if (s.size() == 1) s = {1, s[0]};
        if (s.size() != 2) throw DimensionError("graph leaves must be rank 1 or 2");
        int id = new_node(s, t.requires_grad);
        nodes_[id].val = t.data;
        nodes_[id].leaf = &t;
        return {id};
    }

    Value constant(Shape s, std::vector<T> d) {
        if (s.size() == 1) s = {1, s[0]};
        int id = new_node(s, false);
        if (long(d.size()) != numel(s))
            throw DimensionError("constant data does not match shape " + shape_str(s));
        nodes_[id].val = std::move(d);
        return {id};
    }

    Value constant(const Tensor<T>& t) {
        Shape s = t.shape;
        if (s.size() == 1) s = {1, s[0]};
        return constant(s, t.data);
    }

    Value zeros(int r, int c) { return constant({r, c}, std::vector<T>(size_t(r) * c, T(0))); }

    // ---- shape/value access -------------------------------------------------

    const Shape& shape(Value v) const { return nodes_[v.id].shape; }
    int rows(Value v) const { return nodes_[v.id].shape[0]; }
    int cols(Value v) const { return nodes_[v.id].shape[1]; }
    const std::vector<T>& val(Value v) const { return nodes_[v.id].val; }
    const std::vector<T>& grad(Value v) const { return nodes_[v.id].grad; }
    T scalar(Value v) const {
        if (nodes_[v.id].val.size() != 1) throw DimensionError("scalar() on non-scalar value");
        return nodes_[v.id].val[0];
    }

    // ---- linear algebra -----------------------------------------------------

    Value matmul(Value a, Value b, bool trans_a = false, bool trans_b = false) {
        int am = rows(a), an = cols(a), bm = rows(b), bn = cols(b);
        int m = trans_a ? an : am;
        int k = trans_a ? am : an;
        int kb = trans_b ? bn : bm;
        int n = trans_b ? bm : bn;
        if (k != kb)
            throw DimensionError("matmul: inner dimensions disagree " + shape_str(shape(a)) +
                                 (trans_a ? "^T" : "") + " vs " + shape_str(shape(b)) +
                                 (trans_b ? "^T" : ""));
        int id = new_node({m, n}, needs(a) || needs(b));
        kernels::matmul(nodes_[a.id].val.data(), nodes_[b.id].val.data(),
                        nodes_[id].val.data(), m, k, n, trans_a, trans_b);
        check_finite(id, "matmul");
        set_back(id, [this, id, a, b, trans_a, trans_b, m, k, n]() {
            const T* g = nodes_[id].grad.data();
            if (needs(a)) {
                // dA = g . B^T (adjusted for transposes)
                if (!trans_a)
                    kernels::matmul_acc(g, nodes_[b.id].val.data(), grad_buf(a), m, n, k,
                                        false, !trans_b);
                else
                    kernels::matmul_acc(nodes_[b.id].val.data(), g, grad_buf(a), k, n, m,
                                        trans_b, true);
            }
            if (needs(b)) {
                if (!trans_b)
                    kernels::matmul_acc(nodes_[a.id].val.data(), g, grad_buf(b), k, m, n,
                                        !trans_a, false);
                else
                    kernels::matmul_acc(g, nodes_[a.id].val.data(), grad_buf(b), n, m, k,
                                        true, trans_a);
            }
        });
        return {id};
    }

    // ---- elementwise with trailing-dim broadcast of b ----------------------
    // Accepted shapes for b: equal to a, [1 x cols(a)], or [1 x 1].

    Value add(Value a, Value b) { return binary(a, b, BinOp::add); }
    Value sub(Value a, Value b) { return binary(a, b, BinOp::sub); }
    Value mul(Value a, Value b) { return binary(a, b, BinOp::mul); }
    Value div(Value a, Value b) { return binary(a, b, BinOp::div); }
    Value maximum(Value a, Value b) { return binary(a, b, BinOp::max); }

    Value scale(Value a, T c) {
        int id = new_node(shape(a), needs(a));
        const auto& x = nodes_[a.id].val;
        for (size_t i = 0; i < x.size(); ++i) nodes_[id].val[i] = x[i] * c;
        set_back(id, [this, id, a, c]() {
            if (!needs(a)) return;
            T* ga = grad_buf(a);
            const auto& g = nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        });
        return {id};
    }

    Value add_scalar(Value a, T c) {
        int id = new_node(shape(a), needs(a));
        const auto& x = nodes_[a.id].val;
        for (size_t i = 0; i < x.size(); ++i) nodes_[id].val[i] = x[i] + c;
        set_back(id, [this, id, a]() {
            if (!needs(a)) return;
            T* ga = grad_buf(a);
            const auto& g = nodes_[id].grad;
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
        return {id};
    }

    Value elementwise(Value a, EwKind kind) {
        int id = new_node(shape(a), needs(a));
        const auto& x = nodes_[a.id].val;
        auto& y = nodes_[id].val;
        switch (kind) {
            case EwKind::relu:
                for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
                break;
            case EwKind::gelu:
                for (size_t i = 0; i < x.size(); ++i) y[i] = gelu_fwd(x[i]);
                break;
            case EwKind::abs_:
                for (size_t i = 0; i < x.size(); ++i) y[i] = std::abs(x[i]);
                break;
            case EwKind::sqrt_:
                for (size_t i = 0; i < x.size(); ++i) y[i] = std::sqrt(x[i]);
                break;
            case EwKind::log_:
                for (size_t i = 0; i < x.size(); ++i) y[i] = std::log(x[i]);
                break;
        }
        check_finite(id, "elementwise");
        set_back(id, [this, id, a, kind]() {
            if (!needs(a)) return;
            T* ga = grad_buf(a);
            const auto& g = nodes_[id].grad;
            const auto& x = nodes_[a.id].val;
            const auto& y = nodes_[id].val;
            switch (kind) {
                case EwKind::relu:
                    for (size_t i = 0; i < g.size(); ++i)
                        if (x[i] > T(0)) ga[i] += g[i];
                    break;
                case EwKind::gelu:
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * gelu_bwd(x[i]);
                    break;
                case EwKind::abs_:
                    // subgradient at 0 is 0
                    for (size_t i = 0; i < g.size(); ++i)
                        ga[i] += x[i] > T(0) ? g[i] : (x[i] < T(0) ? -g[i] : T(0));
                    break;
                case EwKind::sqrt_:
                    for (size_t i = 0; i < g.size(); ++i)
                        ga[i] += g[i] / (T(2) * y[i]);
                    break;
                case EwKind::log_:
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
                    break;
            }
        });
        return {id};
    }

    Value relu(Value a) { return elementwise(a, EwKind::relu); }
    Value gelu(Value a) { return elementwise(a, EwKind::gelu); }
    Value abs(Value a) { return elementwise(a, EwKind::abs_); }
    Value sqrt(Value a) { return elementwise(a, EwKind::sqrt_); }
    Value log(Value a) { return elementwise(a, EwKind::log_); }

    // ---- softmax / layernorm -----------------------------------------------

    /// Row softmax with max subtraction. Entries at -1e30 (pad masking) get
    /// exactly zero weight.
    Value softmax_rows(Value a) {
        int r = rows(a), c = cols(a);
        int id = new_node({r, c}, needs(a));
        const auto& x = nodes_[a.id].val;
        auto& y = nodes_[id].val;
        for (int i = 0; i < r; ++i) {
            const T* xi = &x[size_t(i) * c];
            T* yi = &y[size_t(i) * c];
            T mx = xi[0];
            for (int j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
            if (!std::isfinite(double(mx))) throw NumericError("softmax: non-finite input");
            T sum = 0;
            for (int j = 0; j < c; ++j) {
                yi[j] = std::exp(xi[j] - mx);
                sum += yi[j];
            }
            for (int j = 0; j < c; ++j) yi[j] /= sum;
        }
        set_back(id, [this, id, a, r, c]() {
            if (!needs(a)) return;
            T* ga = grad_buf(a);
            const auto& g = nodes_[id].grad;
            const auto& y = nodes_[id].val;
            for (int i = 0; i < r; ++i) {
                const T* yi = &y[size_t(i) * c];
                const T* gi = &g[size_t(i) * c];
                T dot = 0;
                for (int j = 0; j < c; ++j) dot += yi[j] * gi[j];
                for (int j = 0; j < c; ++j) ga[size_t(i) * c + j] += yi[j] * (gi[j] - dot);
            }
        });
        return {id};
    }

    /// Per-row layer norm followed by affine gamma/beta ([1 x c] each).
    Value layernorm_rows(Value a, Value gamma, Value beta, T eps = T(1e-6)) {
        int r = rows(a), c = cols(a);
        if (cols(gamma) != c || cols(beta) != c)
            throw DimensionError("layernorm: affine dim " + shape_str(shape(gamma)) +
                                 " does not match input " + shape_str(shape(a)));
        if (eps <= T(0)) throw DomainError("layernorm: eps must be positive");
        int id = new_node({r, c}, needs(a) || needs(gamma) || needs(beta));
        const auto& x = nodes_[a.id].val;
        const auto& gm = nodes_[gamma.id].val;
        const auto& bt = nodes_[beta.id].val;
        auto& y = nodes_[id].val;
        // save normalized activations and inverse stddevs for backward
        auto xhat = std::make_shared<std::vector<T>>(size_t(r) * c);
        auto istd = std::make_shared<std::vector<T>>(r);
        for (int i = 0; i < r; ++i) {
            const T* xi = &x[size_t(i) * c];
            T mean = 0;
            for (int j = 0; j < c; ++j) mean += xi[j];
            mean /= T(c);
            T var = 0;
            for (int j = 0; j < c; ++j) var += (xi[j] - mean) * (xi[j] - mean);
            var /= T(c);
            T is = T(1) / std::sqrt(var + eps);
            (*istd)[i] = is;
            for (int j = 0; j < c; ++j) {
                T xh = (xi[j] - mean) * is;
                (*xhat)[size_t(i) * c + j] = xh;
                y[size_t(i) * c + j] = xh * gm[j] + bt[j];
            }
        }
        set_back(id, [this, id, a, gamma, beta, r, c, xhat, istd]() {
            const auto& g = nodes_[id].grad;
            const auto& gm = nodes_[gamma.id].val;
            if (needs(gamma)) {
                T* gg = grad_buf(gamma);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        gg[j] += g[size_t(i) * c + j] * (*xhat)[size_t(i) * c + j];
            }
            if (needs(beta)) {
                T* gb = grad_buf(beta);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gb[j] += g[size_t(i) * c + j];
            }
            if (needs(a)) {
                T* ga = grad_buf(a);
                for (int i = 0; i < r; ++i) {
                    const T* gi = &g[size_t(i) * c];
                    const T* xh = &(*xhat)[size_t(i) * c];
                    T sum_gy = 0, sum_gyx = 0;
                    for (int j = 0; j < c; ++j) {
                        T gy = gi[j] * gm[j];
                        sum_gy += gy;
                        sum_gyx += gy * xh[j];
                    }
                    for (int j = 0; j < c; ++j) {
                        T gy = gi[j] * gm[j];
                        ga[size_t(i) * c + j] +=
                            (*istd)[i] * (gy - sum_gy / T(c) - xh[j] * sum_gyx / T(c));
                    }
                }
            }
        });
        return {id};
    }

    // ---- reductions ---------------------------------------------------------

    /// axis 0 reduces rows -> [1 x c]; axis 1 reduces cols -> [r x 1].
    /// max routes its gradient to the lowest-index maximizer.
    Value reduce(Value a, ReduceKind kind, int axis) {
        int r = rows(a), c = cols(a);
        if (axis != 0 && axis != 1) throw DomainError("reduce: axis must be 0 or 1");
        int n_red = axis == 0 ? r : c;
        if (n_red == 0) throw DomainError("reduce: empty axis");
        int orr = axis == 0 ? 1 : r;
        int orc = axis == 0 ? c : 1;
        int id = new_node({orr, orc}, needs(a));
        const auto& x = nodes_[a.id].val;
        auto& y = nodes_[id].val;
        auto argmax = std::make_shared<std::vector<int>>();
        if (kind == ReduceKind::max) argmax->assign(size_t(orr) * orc, 0);
        for (int o = 0; o < orr * orc; ++o) {
            T acc = kind == ReduceKind::max ? x[index(axis, o, 0, r, c)] : T(0);
            for (int p = (kind == ReduceKind::max ? 1 : 0); p < n_red; ++p) {
                T v = x[index(axis, o, p, r, c)];
                if (kind == ReduceKind::max) {
                    if (v > acc) {
                        acc = v;
                        (*argmax)[o] = p;
                    }
                } else {
                    acc += v;
                }
            }
            y[o] = kind == ReduceKind::mean ? acc / T(n_red) : acc;
        }
        set_back(id, [this, id, a, kind, axis, r, c, n_red, argmax]() {
            if (!needs(a)) return;
            T* ga = grad_buf(a);
            const auto& g = nodes_[id].grad;
            for (size_t o = 0; o < g.size(); ++o) {
                if (kind == ReduceKind::max) {
                    ga[index(axis, int(o), (*argmax)[o], r, c)] += g[o];
                } else {
                    T gv = kind == ReduceKind::mean ? g[o] / T(n_red) : g[o];
                    for (int p = 0; p < n_red; ++p) ga[index(axis, int(o), p, r, c)] += gv;
                }
            }
        });
        return {id};
    }

    Value sum_all(Value a) {
        Value rowsum = reduce(a, ReduceKind::sum, 1);  // [r x 1]
        return reduce(rowsum, ReduceKind::sum, 0);     // [1 x 1]
    }
    Value mean_all(Value a) {
        long n = numel(shape(a));
        return scale(sum_all(a), T(1) / T(n));
    }

    // ---- structural ops -----------------------------------------------------

    Value gather_rows(Value a, const std::vector<int>& idx) {
        if (idx.empty()) throw DomainError("gather_rows: empty index set");
        int c = cols(a), r = rows(a);
        for (int i : idx)
            if (i < 0 || i >= r) throw DomainError("gather_rows: index out of range");
        int id = new_node({int(idx.size()), c}, needs(a));
        const auto& x = nodes_[a.id].val;
        for (size_t k = 0; k < idx.size(); ++k)
            std::copy(&x[size_t(idx[k]) * c], &x[size_t(idx[k]) * c] + c,
                      &nodes_[id].val[k * c]);
        auto saved = std::make_shared<std::vector<int>>(idx);
        set_back(id, [this, id, a, c, saved]() {
            if (!needs(a)) return;
            T* ga = grad_buf(a);
            const auto& g = nodes_[id].grad;
            for (size_t k = 0; k < saved->size(); ++k)
                for (int j = 0; j < c; ++j)
                    ga[size_t((*saved)[k]) * c + j] += g[k * size_t(c) + j];
        });
        return {id};
    }

    Value concat_rows(const std::vector<Value>& parts) {
        if (parts.empty()) throw DomainError("concat_rows: empty list");
        int c = cols(parts[0]);
        int r = 0;
        bool ng = false;
        for (Value p : parts) {
            if (cols(p) != c) throw DimensionError("concat_rows: column mismatch");
            r += rows(p);
            ng = ng || needs(p);
        }
        int id = new_node({r, c}, ng);
        size_t off = 0;
        for (Value p : parts) {
            const auto& x = nodes_[p.id].val;
            std::copy(x.begin(), x.end(), nodes_[id].val.begin() + off);
            off += x.size();
        }
        auto saved = std::make_shared<std::vector<Value>>(parts);
        set_back(id, [this, id, saved]() {
            const auto& g = nodes_[id].grad;
            size_t off = 0;
            for (Value p : *saved) {
                size_t n = nodes_[p.id].val.size();
                if (needs(p)) {
                    T* gp = grad_buf(p);
                    for (size_t i = 0; i < n; ++i) gp[i] += g[off + i];
                }
                off += n;
            }
        });
        return {id};
    }

    Value concat_cols(const std::vector<Value>& parts) {
        if (parts.empty()) throw DomainError("concat_cols: empty list");
        int r = rows(parts[0]);
        int c = 0;
        bool ng = false;
        for (Value p : parts) {
            if (rows(p) != r) throw DimensionError("concat_cols: row mismatch");
            c += cols(p);
            ng = ng || needs(p);
        }
        int id = new_node({r, c}, ng);
        int coff = 0;
        for (Value p : parts) {
            int pc = cols(p);
            const auto& x = nodes_[p.id].val;
            for (int i = 0; i < r; ++i)
                std::copy(&x[size_t(i) * pc], &x[size_t(i) * pc] + pc,
                          &nodes_[id].val[size_t(i) * c + coff]);
            coff += pc;
        }
        auto saved = std::make_shared<std::vector<Value>>(parts);
        set_back(id, [this, id, saved, r, c]() {
            const auto& g = nodes_[id].grad;
            int coff = 0;
            for (Value p : *saved) {
                int pc = cols(p);
                if (needs(p)) {
                    T* gp = grad_buf(p);
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < pc; ++j)
                            gp[size_t(i) * pc + j] += g[size_t(i) * c + coff + j];
                }
                coff += pc;
            }
        });
        return {id};
    }

    Value slice_rows(Value a, int start, int len) {
        std::vector<int> idx(len);
        for (int i = 0; i < len; ++i) idx[i] = start + i;
        return gather_rows(a, idx);
    }

    Value transpose(Value a) {
        int r = rows(a), c = cols(a);
        int id = new_node({c, r}, needs(a));
        const auto& x = nodes_[a.id].val;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) nodes_[id].val[size_t(j) * r + i] = x[size_t(i) * c + j];
        set_back(id, [this, id, a, r, c]() {
            if (!needs(a)) return;
            T* ga = grad_buf(a);
            const auto& g = nodes_[id].grad;
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) ga[size_t(i) * c + j] += g[size_t(j) * r + i];
        });
        return {id};
    }

    Value slice_cols(Value a, int start, int len) {
        int r = rows(a), c = cols(a);
        if (start < 0 || start + len > c) throw DomainError("slice_cols: out of range");
        int id = new_node({r, len}, needs(a));
        const auto& x = nodes_[a.id].val;
        for (int i = 0; i < r; ++i)
            std::copy(&x[size_t(i) * c + start], &x[size_t(i) * c + start] + len,
                      &nodes_[id].val[size_t(i) * len]);
        set_back(id, [this, id, a, start, len, r, c]() {
            if (!needs(a)) return;
            T* ga = grad_buf(a);
            const auto& g = nodes_[id].grad;
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < len; ++j)
                    ga[size_t(i) * c + start + j] += g[size_t(i) * len + j];
        });
        return {id};
    }

    /// Multiply each row i of a [r x c] by scalar s[i] ([r x 1]).
    Value scale_rows(Value a, Value s) {
        int r = rows(a), c = cols(a);
        if (rows(s) != r || cols(s) != 1)
            throw DimensionError("scale_rows: scale must be [r x 1]");
        int id = new_node({r, c}, needs(a) || needs(s));
        const auto& x = nodes_[a.id].val;
        const auto& sv = nodes_[s.id].val;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                nodes_[id].val[size_t(i) * c + j] = x[size_t(i) * c + j] * sv[i];
        set_back(id, [this, id, a, s, r, c]() {
            const auto& g = nodes_[id].grad;
            const auto& x = nodes_[a.id].val;
            const auto& sv = nodes_[s.id].val;
            if (needs(a)) {
                T* ga = grad_buf(a);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        ga[size_t(i) * c + j] += g[size_t(i) * c + j] * sv[i];
            }
            if (needs(s)) {
                T* gs = grad_buf(s);
                for (int i = 0; i < r; ++i) {
                    T acc = 0;
                    for (int j = 0; j < c; ++j)
                        acc += g[size_t(i) * c + j] * x[size_t(i) * c + j];
                    gs[i] += acc;
                }
            }
        });
        return {id};
    }

    /// Row-wise Euclidean distance ||a_i - b_i||_2 -> [r x 1]. The subgradient
    /// at zero distance is defined as 0, so exact predictions do not NaN.
    Value l2_rows(Value a, Value b) {
        require_same_shape(shape(a), shape(b), "l2_rows");
        int r = rows(a), c = cols(a);
        int id = new_node({r, 1}, needs(a) || needs(b));
        const auto& xa = nodes_[a.id].val;
        const auto& xb = nodes_[b.id].val;
        for (int i = 0; i < r; ++i) {
            T acc = 0;
            for (int j = 0; j < c; ++j) {
                T d = xa[size_t(i) * c + j] - xb[size_t(i) * c + j];
                acc += d * d;
            }
            nodes_[id].val[i] = std::sqrt(acc);
        }
        set_back(id, [this, id, a, b, r, c]() {
            const auto& g = nodes_[id].grad;
            const auto& xa = nodes_[a.id].val;
            const auto& xb = nodes_[b.id].val;
            const auto& y = nodes_[id].val;
            for (int i = 0; i < r; ++i) {
                if (y[i] == T(0)) continue;
                T s = g[i] / y[i];
                for (int j = 0; j < c; ++j) {
                    T d = (xa[size_t(i) * c + j] - xb[size_t(i) * c + j]) * s;
                    if (needs(a)) grad_buf(a)[size_t(i) * c + j] += d;
                    if (needs(b)) grad_buf(b)[size_t(i) * c + j] -= d;
                }
            }
        });
        return {id};
    }

    Value l2_distance(Value a, Value b) {
        // vectors as [1 x d]
        return l2_rows(a, b);
    }

    // ---- backward -----------------------------------------------------------

    /// Seeds d(out)/d(out) = seed and accumulates leaf gradients into the
    /// referenced Tensors. May be called once per graph.
    void backward(Value out, T seed = T(1)) {
        if (numel(shape(out)) != 1) throw DimensionError("backward: output must be scalar");
        for (auto& n : nodes_)
            if (n.needs_grad) n.grad.assign(n.val.size(), T(0));
        if (!nodes_[out.id].needs_grad) return;
        nodes_[out.id].grad[0] = seed;
        for (int i = out.id; i >= 0; --i) {
            auto& n = nodes_[i];
            if (n.needs_grad && n.back) n.back();
        }
        for (auto& n : nodes_) {
            if (n.leaf && n.needs_grad) {
                n.leaf->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) n.leaf->grad[i] += n.grad[i];
            }
        }
    }

    size_t num_nodes() const { return nodes_.size(); }

private:
    enum class BinOp { add, sub, mul, div, max };

    struct Node {
        Shape shape;
        std::vector<T> val;
        std::vector<T> grad;
        bool needs_grad = false;
        std::function<void()> back;
        Tensor<T>* leaf = nullptr;
    };

    std::vector<Node> nodes_;

    int new_node(Shape s, bool ng) {
        nodes_.push_back(Node{});
        Node& n = nodes_.back();
        n.shape = std::move(s);
        n.val.assign(numel(n.shape), T(0));
        n.needs_grad = ng;
        return int(nodes_.size()) - 1;
    }

    bool needs(Value v) const { return nodes_[v.id].needs_grad; }

    T* grad_buf(Value v) { return nodes_[v.id].grad.data(); }

    void set_back(int id, std::function<void()> f) {
        if (nodes_[id].needs_grad) nodes_[id].back = std::move(f);
    }

    void check_finite(int id, const char* what) {
#ifndef NDEBUG
        for (T v : nodes_[id].val)
            if (!std::isfinite(double(v)))
                throw NumericError(std::string(what) + ": non-finite forward value");
#else
        (void)id;
        (void)what;
#endif
    }

    static size_t index(int axis, int o, int p, int r, int c) {
        (void)r;
        return axis == 0 ? size_t(p) * c + o : size_t(o) * c + p;
    }

    static T gelu_fwd(T x) {
        // tanh approximation
        const T k = T(0.7978845608028654);  // sqrt(2/pi)
        T inner = k * (x + T(0.044715) * x * x * x);
        return T(0.5) * x * (T(1) + std::tanh(inner));
    }

    static T gelu_bwd(T x) {
        const T k = T(0.7978845608028654);
        T x3 = x * x * x;
        T inner = k * (x + T(0.044715) * x3);
        T th = std::tanh(inner);
        T sech2 = T(1) - th * th;
        return T(0.5) * (T(1) + th) + T(0.5) * x * sech2 * k * (T(1) + T(0.134145) * x * x);
    }

    Value binary(Value a, Value b, BinOp op) {
        int r = rows(a), c = cols(a);
        int br = rows(b), bc = cols(b);
        bool full = (br == r && bc == c);
        bool rowb = (br == 1 && bc == c);    // broadcast over rows
        bool scal = (br == 1 && bc == 1);
        if (!full && !rowb && !scal)
            throw DimensionError("elementwise: shapes not broadcastable " + shape_str(shape(a)) +
                                 " vs " + shape_str(shape(b)));
        int id = new_node({r, c}, needs(a) || needs(b));
        const auto& xa = nodes_[a.id].val;
        const auto& xb = nodes_[b.id].val;
        auto& y = nodes_[id].val;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                size_t ia = size_t(i) * c + j;
                size_t ib = full ? ia : (rowb ? size_t(j) : 0);
                switch (op) {
                    case BinOp::add: y[ia] = xa[ia] + xb[ib]; break;
                    case BinOp::sub: y[ia] = xa[ia] - xb[ib]; break;
                    case BinOp::mul: y[ia] = xa[ia] * xb[ib]; break;
                    case BinOp::div: y[ia] = xa[ia] / xb[ib]; break;
                    // ties go to a, matching the documented lowest-index rule
                    case BinOp::max: y[ia] = xa[ia] >= xb[ib] ? xa[ia] : xb[ib]; break;
                }
            }
        check_finite(id, "elementwise-binary");
        set_back(id, [this, id, a, b, op, r, c, full, rowb]() {
            const auto& g = nodes_[id].grad;
            const auto& xa = nodes_[a.id].val;
            const auto& xb = nodes_[b.id].val;
            T* ga = needs(a) ? grad_buf(a) : nullptr;
            T* gb = needs(b) ? grad_buf(b) : nullptr;
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) {
                    size_t ia = size_t(i) * c + j;
                    size_t ib = full ? ia : (rowb ? size_t(j) : 0);
                    T gv = g[ia];
                    switch (op) {
                        case BinOp::add:
                            if (ga) ga[ia] += gv;
                            if (gb) gb[ib] += gv;
                            break;
                        case BinOp::sub:
                            if (ga) ga[ia] += gv;
                            if (gb) gb[ib] -= gv;
                            break;
                        case BinOp::mul:
                            if (ga) ga[ia] += gv * xb[ib];
                            if (gb) gb[ib] += gv * xa[ia];
                            break;
                        case BinOp::div:
                            if (ga) ga[ia] += gv / xb[ib];
                            if (gb) gb[ib] -= gv * xa[ia] / (xb[ib] * xb[ib]);
                            break;
                        case BinOp::max:
                            if (xa[ia] >= xb[ib]) {
                                if (ga) ga[ia] += gv;
                            } else if (gb) {
                                gb[ib] += gv;
                            }
                            break;
                    }
                }
        });
        return {id};
    }
};

}  // namespace tcjepa
