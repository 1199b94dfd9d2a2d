#include <doctest.h>

#include <cmath>

#include "tcjepa/optim.hpp"

using namespace tcjepa;

TEST_CASE("lr schedule: warmup endpoints, peak, cosine floor") {
    OptimConfig c;
    c.lr = 0.5;
    c.warmup_steps = 10;
    c.total_steps = 110;
    c.lr_final_frac = 0.1;
    // first step is a fraction of peak, not zero
    CHECK(lr_at(c, 0) == doctest::Approx(0.05).epsilon(1e-12));
    // last warmup step reaches the peak exactly
    CHECK(lr_at(c, 9) == doctest::Approx(0.5).epsilon(1e-12));
    // cosine starts at the peak: no discontinuity at the boundary
    CHECK(lr_at(c, 10) == doctest::Approx(0.5).epsilon(1e-12));
    // halfway through the decay: midpoint of peak and floor
    CHECK(lr_at(c, 60) == doctest::Approx(0.5 * (0.5 + 0.05)).epsilon(1e-9));
    // end of schedule hits the floor; beyond stays there
    CHECK(lr_at(c, 110) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(lr_at(c, 10000) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK_THROWS_AS(lr_at(c, -1), DomainError);

    // monotone: non-decreasing through warmup, non-increasing after
    for (long s = 1; s < 10; ++s) CHECK(lr_at(c, s) >= lr_at(c, s - 1));
    for (long s = 11; s <= 110; ++s) CHECK(lr_at(c, s) <= lr_at(c, s - 1) + 1e-15);
}

TEST_CASE("wd and ema linear schedules hit their endpoints") {
    OptimConfig c;
    c.total_steps = 5;
    CHECK(wd_at(c, 0) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(wd_at(c, 4) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(wd_at(c, 2) == doctest::Approx(0.22).epsilon(1e-12));
    CHECK(ema_at(c, 0) == doctest::Approx(0.996).epsilon(1e-12));
    CHECK(ema_at(c, 4) == doctest::Approx(1.0).epsilon(1e-12));
    // clamped past the end
    CHECK(wd_at(c, 99) == doctest::Approx(0.4).epsilon(1e-12));
    // degenerate single-step run returns the endpoint
    OptimConfig one = c;
    one.total_steps = 1;
    one.warmup_steps = 0;
    CHECK(wd_at(one, 0) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("config validation") {
    OptimConfig c;
    c.lr = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimConfig{};
    c.warmup_steps = 50;
    c.total_steps = 10;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimConfig{};
    c.beta2 = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimConfig{};
    c.ema_start = 1.2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("single AdamW step matches a hand computation") {
    OptimConfig c;
    c.lr = 0.1;
    c.warmup_steps = 0;
    c.total_steps = 1000;  // wd at step 0 = wd_start = 0.04
    c.lr_final_frac = 1.0;  // constant lr to keep the hand math simple
    AdamW<double> opt(c);
    Tensor<double> w({2, 2}, {1.0, -2.0, 0.5, 3.0}, true);
    opt.add_param("w", w);
    w.ensure_grad();
    std::vector<double> g = {0.3, -0.1, 0.0, 2.0};
    for (int i = 0; i < 4; ++i) w.grad[i] = g[i];
    auto before = w.data;
    opt.step();
    for (int i = 0; i < 4; ++i) {
        double m = 0.1 * g[i], v = 0.05 * g[i] * g[i];
        double mh = m / 0.1, vh = v / 0.05;  // bias correction at t=1
        double expect = before[i] - 0.1 * (mh / (std::sqrt(vh) + 1e-8))
                        - 0.1 * 0.04 * before[i];
        CHECK(w.data[i] == doctest::Approx(expect).epsilon(1e-12));
    }
    // grads were consumed
    for (int i = 0; i < 4; ++i) CHECK(w.grad[i] == 0.0);
    CHECK(opt.step_count() == 1);
}

TEST_CASE("zero gradient with no decay leaves the parameter unchanged") {
    OptimConfig c;
    c.warmup_steps = 0;
    c.total_steps = 10;
    AdamW<double> opt(c);
    Tensor<double> bias({1, 4}, {1, 2, 3, 4}, true);  // 1-D: decay-excluded
    opt.add_param("b", bias);
    bias.ensure_grad();
    auto before = bias.data;
    opt.step();
    CHECK(bias.data == before);
}

TEST_CASE("weight decay applies to matrices but not 1-D parameters") {
    OptimConfig c;
    c.warmup_steps = 0;
    c.total_steps = 10;
    c.wd_start = c.wd_end = 0.5;
    c.lr = 0.1;
    AdamW<double> opt(c);
    Tensor<double> mat({2, 2}, {4.0, 4.0, 4.0, 4.0}, true);
    Tensor<double> vec({1, 2}, {4.0, 4.0}, true);
    Tensor<double> col({2, 1}, {4.0, 4.0}, true);
    opt.add_param("mat", mat);
    opt.add_param("vec", vec);
    opt.add_param("col", col);
    for (Tensor<double>* t : {&mat, &vec, &col}) t->ensure_grad();
    opt.step();  // zero grads everywhere: only decay can move anything
    CHECK(mat.data[0] == doctest::Approx(4.0 - 0.1 * 0.5 * 4.0).epsilon(1e-12));
    CHECK(vec.data[0] == 4.0);
    CHECK(col.data[0] == 4.0);
}

TEST_CASE("frozen tensors are not registered; non-finite grads abort") {
    OptimConfig c;
    c.warmup_steps = 0;
    c.total_steps = 10;
    AdamW<float> opt(c);
    Tensor<float> frozen({2, 2});  // requires_grad = false
    opt.add_param("frozen", frozen);
    CHECK(opt.num_slots() == 0);

    Tensor<float> w({1, 1}, {1.0f}, true);
    opt.add_param("w", w);
    w.ensure_grad();
    w.grad[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(opt.step(), NumericError);
}

TEST_CASE("two optimizers with identical inputs stay bit-identical") {
    OptimConfig c;
    c.warmup_steps = 2;
    c.total_steps = 20;
    AdamW<float> o1(c), o2(c);
    Tensor<float> w1({3, 3}), w2({3, 3});
    Rng rng(5);
    for (int i = 0; i < 9; ++i) w1.data[i] = w2.data[i] = float(rng.uniform(-1, 1));
    w1.requires_grad = w2.requires_grad = true;
    o1.add_param("w", w1);
    o2.add_param("w", w2);
    for (int s = 0; s < 20; ++s) {
        w1.ensure_grad();
        w2.ensure_grad();
        for (int i = 0; i < 9; ++i) {
            float g = float(rng.uniform(-1, 1));
            w1.grad[i] = g;
            w2.grad[i] = g;
        }
        o1.step();
        o2.step();
        CHECK(w1.data == w2.data);
    }
}
