#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fruitnet/network.hpp"

using namespace fruitnet;

namespace {

std::vector<LayerKind> kinds(const NetworkSpec& spec) {
    std::vector<LayerKind> out;
    for (const auto& d : spec.layers) out.push_back(d.kind);
    return out;
}

}  // namespace

TEST_CASE("case 4 is the reference architecture") {
    auto spec = make_case_spec(4, 25);
    using K = LayerKind;
    CHECK(kinds(spec) == std::vector<K>{K::conv, K::relu, K::pool, K::conv, K::relu, K::pool,
                                        K::dropout, K::flatten, K::dense, K::relu, K::dropout,
                                        K::dense});
    CHECK(spec.layers[6].drop_p == 0.25);
    CHECK(spec.layers[10].drop_p == 0.5);
    CHECK(spec.layers[8].units == 500);
    CHECK(spec.layers.back().units == 25);
    for (const auto& d : spec.layers)
        if (d.kind == K::conv) {
            CHECK(d.out_channels == 64);
            CHECK(d.kernel == 3);
            CHECK(d.stride == 1);
        }
}

TEST_CASE("case 1 drops the dropouts, cases 2/3 stack convs, case 5 doubles up") {
    using K = LayerKind;
    CHECK(kinds(make_case_spec(1)) == std::vector<K>{K::conv, K::relu, K::pool, K::conv,
                                                     K::relu, K::pool, K::flatten, K::dense,
                                                     K::relu, K::dense});
    CHECK(kinds(make_case_spec(2)) == std::vector<K>{K::conv, K::relu, K::conv, K::relu,
                                                     K::pool, K::pool, K::flatten, K::dense,
                                                     K::relu, K::dense});
    CHECK(kinds(make_case_spec(3)) == std::vector<K>{K::conv, K::relu, K::conv, K::relu,
                                                     K::pool, K::pool, K::dropout, K::flatten,
                                                     K::dense, K::relu, K::dropout, K::dense});
    auto five = kinds(make_case_spec(5));
    CHECK(std::count(five.begin(), five.end(), K::dropout) == 3);
}

TEST_CASE("invalid case ids are rejected with the valid range") {
    CHECK_THROWS_WITH_AS(make_case_spec(0), doctest::Contains("1, 2, 3, 4, 5"),
                         std::invalid_argument);
    CHECK_THROWS_AS(make_case_spec(6), std::invalid_argument);
}

TEST_CASE("build is seeded: same seed, same parameters") {
    auto a = build_case<double>(4, 4, 77, 16, 16);
    auto b = build_case<double>(4, 4, 77, 16, 16);
    auto c = build_case<double>(4, 4, 78, 16, 16);
    auto pa = parameters(a), pb = parameters(b), pc = parameters(c);
    REQUIRE(pa.size() == pb.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(*pa[i].value == *pb[i].value);
        if (!(*pa[i].value == *pc[i].value)) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("lecun uniform limits and zero biases") {
    auto net = build_case<double>(1, 25, 3);
    auto params = parameters(net);
    REQUIRE(params.size() == 8);
    CHECK(params[0].name == "conv1.weights");
    CHECK(params[1].name == "conv1.bias");
    CHECK(params[2].name == "conv2.weights");
    CHECK(params[4].name == "fc1.weights");
    CHECK(params[7].name == "fc2.bias");

    const double conv1_limit = std::sqrt(3.0 / (3 * 3 * 3));
    for (std::size_t i = 0; i < params[0].value->size(); ++i) {
        CHECK(std::abs((*params[0].value)[i]) <= conv1_limit);
    }
    const double conv2_limit = std::sqrt(3.0 / (64 * 3 * 3));
    for (std::size_t i = 0; i < params[2].value->size(); ++i)
        CHECK(std::abs((*params[2].value)[i]) <= conv2_limit);

    // fc1 fan-in at 100x100 input: 64 * 25 * 25 = 40000
    CHECK(params[4].value->shape() == Shape{500, 40000});
    const double fc1_limit = std::sqrt(3.0 / 40000.0);
    for (std::size_t i = 0; i < 1000; ++i)
        CHECK(std::abs((*params[4].value)[i]) <= fc1_limit);

    for (std::size_t pi : {1u, 3u, 5u, 7u})
        for (std::size_t i = 0; i < params[pi].value->size(); ++i)
            CHECK((*params[pi].value)[i] == 0.0);
}

TEST_CASE("paper shape pipeline ends at [N,25]") {
    auto net = build_case<float>(4, 25, 5);
    Prng prng(1);
    auto x = uniform_fill<float>(prng, Shape{1, 3, 100, 100}, 0, 1);
    Prng dropout_prng(2);
    auto fwd = forward_full(net, x, Mode::eval, dropout_prng);
    CHECK(fwd.logits.shape() == Shape{1, 25});
    CHECK(fwd.probs.shape() == Shape{1, 25});
    double sum = 0;
    for (std::size_t j = 0; j < 25; ++j) sum += fwd.probs[j];
    CHECK(std::abs(sum - 1.0) < 1e-6);
}

TEST_CASE("batch of 15 through case 4 gives [15,25] logits") {
    auto net = build_case<double>(4, 25, 6, 32, 32);
    Prng prng(3);
    auto x = uniform_fill<double>(prng, Shape{15, 3, 32, 32}, 0, 1);
    Prng dp(4);
    auto fwd = forward_full(net, x, Mode::train, dp);
    CHECK(fwd.logits.shape() == Shape{15, 25});
    for (std::size_t n = 0; n < 15; ++n) {
        double sum = 0;
        for (std::size_t j = 0; j < 25; ++j) sum += fwd.probs.at(n, j);
        CHECK(std::abs(sum - 1.0) <= 1e-12 * 25);
    }
}

TEST_CASE("eval mode is repeatable and ignores the prng") {
    auto net = build_case<double>(5, 3, 9, 16, 16);
    Prng prng(10);
    auto x = uniform_fill<double>(prng, Shape{2, 3, 16, 16}, 0, 1);
    Prng d1(111), d2(222);
    auto a = forward_full(net, x, Mode::eval, d1);
    auto b = forward_full(net, x, Mode::eval, d2);
    CHECK(a.logits == b.logits);
}

TEST_CASE("forward rejects mismatched input shape") {
    auto net = build_case<double>(1, 3, 9, 16, 16);
    Prng d(0);
    CHECK_THROWS_AS(forward_full(net, TensorD(Shape{1, 3, 8, 8}, 0.0), Mode::eval, d),
                    std::invalid_argument);
    CHECK_THROWS_AS(forward_full(net, TensorD(Shape{1, 1, 16, 16}, 0.0), Mode::eval, d),
                    std::invalid_argument);
}

TEST_CASE("backward_full aligns gradients with parameters") {
    auto net = build_case<double>(2, 3, 13, 8, 8);
    Prng prng(5);
    auto x = uniform_fill<double>(prng, Shape{2, 3, 8, 8}, 0, 1);
    Prng dp(6);
    auto fwd = forward_full(net, x, Mode::eval, dp);
    auto params = parameters(net);

    auto back = backward_full(net, fwd.caches, TensorD(fwd.logits.shape(), 0.0));
    REQUIRE(back.param_grads.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(back.param_grads[i].shape() == params[i].value->shape());
        for (std::size_t j = 0; j < back.param_grads[i].size(); ++j)
            CHECK(back.param_grads[i][j] == 0.0);
    }
    CHECK(back.input_grad.shape() == x.shape());
}
