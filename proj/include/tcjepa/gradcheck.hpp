#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "tcjepa/graph.hpp"
#include "tcjepa/tensor.hpp"

namespace tcjepa {

struct GradCheckReport {
    bool pass = true;
    double max_rel_err = 0.0;
    int worst_input = -1;
    long worst_coord = -1;
    double analytic = 0.0;
    double numeric = 0.0;

    std::string describe() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%s max_rel_err=%.3e (input %d coord %ld: analytic=%.6e numeric=%.6e)",
                      pass ? "pass" : "FAIL", max_rel_err, worst_input, worst_coord,
                      analytic, numeric);
        return buf;
    }
};

using GradCheckFn =
    std::function<Value(Graph<double>&, std::vector<Tensor<double>*>&)>;

/// Central-difference gradient check. `f` must deterministically rebuild the
/// computation from the current contents of `inputs` and return the scalar
/// loss node. Runs in f64; intended tolerances are 1e-4 and tighter.
inline GradCheckReport grad_check(const GradCheckFn& f,
                                  std::vector<Tensor<double>*> inputs,
                                  double h = 1e-4, double tol = 1e-4) {
    for (auto* t : inputs) {
        t->requires_grad = true;
        t->ensure_grad();
        t->zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Graph<double> g;
        Value out = f(g, inputs);
        g.backward(out);
    }
    for (auto* t : inputs) {
        t->ensure_grad();
        analytic.push_back(t->grad);
    }

    auto eval = [&]() {
        Graph<double> g;
        Value out = f(g, inputs);
        return g.scalar(out);
    };

    GradCheckReport rep;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor<double>* t = inputs[ti];
        for (long i = 0; i < t->size(); ++i) {
            double keep = t->data[i];
            t->data[i] = keep + h;
            double fp = eval();
            t->data[i] = keep - h;
            double fm = eval();
            t->data[i] = keep;
            double numeric = (fp - fm) / (2.0 * h);
            double an = analytic[ti][i];
            double denom = std::max({std::fabs(numeric), std::fabs(an), 1e-6});
            double rel = std::fabs(numeric - an) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_input = int(ti);
                rep.worst_coord = i;
                rep.analytic = an;
                rep.numeric = numeric;
            }
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

}  // namespace tcjepa
