#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fruitnet/optim.hpp"
#include "fruitnet/prng.hpp"

using namespace fruitnet;

TEST_CASE("adam zero gradient leaves weights untouched") {
    AdamState<double> st(Shape{3});
    TensorD w(Shape{3}, 1.5);
    adam_step(st, w, TensorD(Shape{3}, 0.0));
    for (std::size_t i = 0; i < 3; ++i) CHECK(w[i] == 1.5);
    CHECK(st.t == 1);
}

TEST_CASE("adam first and second step against hand computation") {
    // beta1 0.9, beta2 0.999, eta 0.002, eps 1e-8, g = 1:
    // t=1: m=0.1, v=0.001, mhat=vhat=1, dw = -0.002/(1+1e-8)
    AdamState<double> st(Shape{1});
    TensorD w(Shape{1}, 0.0);
    TensorD g(Shape{1}, 1.0);
    adam_step(st, w, g);
    CHECK(std::abs(w[0] - (-0.002)) < 1e-9);
    const double w1 = w[0];

    // t=2: m=0.19, 1-b1^2=0.19 => mhat=1; same cancellation for v
    adam_step(st, w, g);
    CHECK(std::abs((w[0] - w1) - (-0.002)) < 1e-9);
    CHECK(st.t == 2);
}

TEST_CASE("adam step-1 magnitude is eta*|g|/(|g|+eps) for any scalar g") {
    for (double g : {1e-6, 1e-3, 1.0, 42.0, 1e6, -5.0, -1e-4}) {
        AdamState<double> st(Shape{1});
        TensorD w(Shape{1}, 0.0);
        TensorD gt(Shape{1}, g);
        adam_step(st, w, gt);
        const double expected = st.eta * std::abs(g) / (std::abs(g) + st.eps);
        CHECK(std::abs(w[0]) == doctest::Approx(expected).epsilon(1e-12));
        CHECK((g > 0 ? w[0] < 0 : w[0] > 0));
    }
}

TEST_CASE("adam moments decay geometrically once gradients stop") {
    AdamState<double> st(Shape{1});
    TensorD w(Shape{1}, 0.0);
    adam_step(st, w, TensorD(Shape{1}, 1.0));
    double m_prev = st.m[0], v_prev = st.v[0];
    for (int i = 0; i < 5; ++i) {
        adam_step(st, w, TensorD(Shape{1}, 0.0));
        CHECK(st.m[0] == doctest::Approx(m_prev * st.beta1).epsilon(1e-12));
        CHECK(st.v[0] == doctest::Approx(v_prev * st.beta2).epsilon(1e-12));
        m_prev = st.m[0];
        v_prev = st.v[0];
    }
}

TEST_CASE("adam is deterministic and keeps second moment nonnegative") {
    Prng prng(31);
    auto g1 = uniform_fill<double>(prng, Shape{16}, -3, 3);
    auto g2 = uniform_fill<double>(prng, Shape{16}, -3, 3);

    AdamState<double> sa(Shape{16});
    AdamState<double> sb(Shape{16});
    TensorD wa(Shape{16}, 0.25), wb(Shape{16}, 0.25);
    for (const auto& g : {g1, g2}) {
        adam_step(sa, wa, g);
        adam_step(sb, wb, g);
    }
    CHECK(wa == wb);
    CHECK(sa.m == sb.m);
    CHECK(sa.v == sb.v);
    for (std::size_t i = 0; i < 16; ++i) CHECK(sa.v[i] >= 0.0);
}

TEST_CASE("adam input validation") {
    AdamState<double> st(Shape{2});
    TensorD w(Shape{2}, 0.0);
    CHECK_THROWS_AS(adam_step(st, w, TensorD(Shape{3}, 0.0)), std::invalid_argument);

    TensorD bad(Shape{2}, 0.0);
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(adam_step(st, w, bad, "conv1.weights"),
                         doctest::Contains("conv1.weights"), std::runtime_error);
}

TEST_CASE("plateau schedule") {
    PlateauSchedule sched;  // factor 0.5, patience 3
    double eta = 0.002;

    SUBCASE("improving metric never reduces") {
        double metric = 0.1;
        for (int e = 0; e < 10; ++e) {
            eta = lr_on_epoch_end(sched, eta, metric);
            metric += 0.05;
        }
        CHECK(eta == 0.002);
    }

    SUBCASE("three flat epochs halve the rate") {
        eta = lr_on_epoch_end(sched, eta, 0.5);  // improvement over -inf
        for (int e = 0; e < 3; ++e) eta = lr_on_epoch_end(sched, eta, 0.5);
        CHECK(eta == 0.001);
        CHECK(sched.epochs_since_improve == 0);  // counter reset after reduction
    }

    SUBCASE("rate never drops below min_lr") {
        sched.min_lr = 1e-5;
        eta = lr_on_epoch_end(sched, eta, 0.5);
        for (int e = 0; e < 100; ++e) eta = lr_on_epoch_end(sched, eta, 0.5);
        CHECK(eta == 1e-5);
        eta = lr_on_epoch_end(sched, eta, 0.5);
        CHECK(eta == 1e-5);
    }

    SUBCASE("rate is non-increasing over any metric sequence") {
        Prng prng(32);
        double prev = eta;
        for (int e = 0; e < 50; ++e) {
            eta = lr_on_epoch_end(sched, eta, prng.uniform(0, 1));
            CHECK(eta <= prev);
            prev = eta;
        }
    }
}
