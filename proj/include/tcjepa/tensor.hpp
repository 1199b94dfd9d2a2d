#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "tcjepa/common.hpp"
#include "tcjepa/rng.hpp"

namespace tcjepa {

/// Plain dense value holder. Parameters and constants live here; autodiff
/// happens on Graph nodes that reference these for leaves.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first backward touches this leaf
    bool requires_grad = false;

    Tensor() = default;
    Tensor(Shape s, bool rg = false) : shape(std::move(s)), requires_grad(rg) {
        data.assign(numel(shape), T(0));
    }
    Tensor(Shape s, std::vector<T> d, bool rg = false)
        : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
        if (long(data.size()) != numel(shape))
            throw DimensionError("tensor data size does not match shape " + shape_str(shape));
    }

    long size() const { return long(data.size()); }
    int rows() const { return shape.size() >= 1 ? shape[0] : 1; }
    int cols() const { return shape.size() >= 2 ? shape[1] : 1; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() {
        if (!grad.empty()) grad.assign(grad.size(), T(0));
    }

    void fill(T v) { data.assign(data.size(), v); }

    static Tensor zeros(Shape s, bool rg = false) { return Tensor(std::move(s), rg); }

    static Tensor full(Shape s, T v) {
        Tensor t(std::move(s));
        t.fill(v);
        return t;
    }

    static Tensor trunc_normal(Shape s, double stddev, Rng& rng, bool rg = true) {
        Tensor t(std::move(s), rg);
        for (auto& v : t.data) v = T(rng.trunc_normal(stddev));
        return t;
    }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(double(v))) return false;
        return true;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.requires_grad = requires_grad;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }
};

}  // namespace tcjepa
