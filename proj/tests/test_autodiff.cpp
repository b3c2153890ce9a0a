#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fd_check.hpp"
#include "flowlab/adam.hpp"
#include "flowlab/graph.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

using flowlab::Graph;
using flowlab::Tensor;
using flowlab::Var;
using fdtest::Params;

TEST_CASE("doubling and annihilation") {
    Graph g;
    Var x = g.input("x", Tensor({2}, {1, 2}));
    Var y = x + x;
    g.mark_output("y", y);
    CHECK(g.value(y)[0] == 2);
    CHECK(g.value(y)[1] == 4);

    Var zero = g.constant(Tensor::zeros({2}));
    Var y2 = x * zero;
    CHECK(g.value(y2)[0] == 0);
    CHECK(g.value(y2)[1] == 0);
}

TEST_CASE("two-layer MLP forward matches hand computation") {
    // x [1,2] -> tanh(x W1 + b1) W2 + b2, everything recomputed with plain doubles
    const double x0 = 0.5, x1 = -0.5;
    Graph g;
    Var x = g.input("x", Tensor({1, 2}, {x0, x1}));
    Var w1 = g.param("w1", Tensor({2, 2}, {1.0, -2.0, 0.5, 1.0}));
    Var b1 = g.param("b1", Tensor({1, 2}, {0.25, -0.25}));
    Var w2 = g.param("w2", Tensor({2, 1}, {2.0, -1.0}));
    Var b2 = g.param("b2", Tensor({1, 1}, {0.5}));
    Var y = flowlab::matmul(flowlab::tanh_op(flowlab::matmul(x, w1) + b1), w2) + b2;
    g.mark_output("y", y);

    const double h0 = std::tanh(x0 * 1.0 + x1 * 0.5 + 0.25);
    const double h1 = std::tanh(x0 * -2.0 + x1 * 1.0 - 0.25);
    const double want = h0 * 2.0 + h1 * -1.0 + 0.5;
    CHECK(g.value(y).item() == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("power rule: y = x^2 at x = 3") {
    Graph g;
    Var x = g.param("x", Tensor::scalar(3.0));
    g.mark_output("y", flowlab::square(x));
    auto grads = g.backward("y", Tensor::scalar(1.0));
    CHECK(grads.at("x").item() == 6.0);
}

TEST_CASE("constant output yields zero grads for unreachable params") {
    Graph g;
    g.param("w", Tensor({2, 2}, {1, 2, 3, 4}));
    Var c = g.constant(Tensor::scalar(5.0));
    g.mark_output("y", c);
    auto grads = g.backward("y", Tensor::scalar(1.0));
    REQUIRE(grads.count("w") == 1);
    for (std::int64_t k = 0; k < 4; ++k) CHECK(grads.at("w")[k] == 0.0);
}

TEST_CASE("MLP 2-16-16-2 gradients match central finite differences") {
    flowlab::Rng rng(7);
    Params params = fdtest::random_mlp_params(rng, {2, 16, 16, 2});
    Tensor x = rng.normal_matrix(5, 2);
    Params grads;
    fdtest::eval_mlp_msq(params, x, 3, &grads);
    auto loss = [&](const Params& p) { return fdtest::eval_mlp_msq(p, x, 3, nullptr); };
    CHECK(fdtest::max_fd_rel_err(loss, params, grads) <= 1e-4);
}

TEST_CASE("broadcast, gather and reduction gradients match finite differences") {
    flowlab::Rng rng(21);
    Params params;
    params.emplace("m", rng.normal_matrix(4, 3));
    params.emplace("colv", rng.normal_matrix(4, 1));
    params.emplace("bias", rng.normal_matrix(1, 3));
    params.emplace("table", rng.normal_matrix(3, 2));

    auto build = [](const Params& p, Params* grads) {
        Graph g;
        Var m = g.param("m", p.at("m"));
        Var colv = g.param("colv", p.at("colv"));
        Var bias = g.param("bias", p.at("bias"));
        Var table = g.param("table", p.at("table"));
        // row id 1 repeated: scatter-add must accumulate
        Var emb = flowlab::rows_gather(table, {0, 1, 1, 2});
        Var h = flowlab::silu((m + bias) * colv);
        Var j = flowlab::concat_cols(h, flowlab::softplus(emb));
        Var r = flowlab::row_sum(flowlab::square(j));
        Var loss = flowlab::mean(flowlab::sigmoid(r));
        g.mark_output("loss", loss);
        if (grads) *grads = g.backward("loss", Tensor::scalar(1.0));
        return g.value(loss).item();
    };
    Params grads;
    build(params, &grads);
    auto loss = [&](const Params& p) { return build(p, nullptr); };
    CHECK(fdtest::max_fd_rel_err(loss, params, grads) <= 1e-4);
}

TEST_CASE("random op chains: gradient property over many graphs") {
    flowlab::Rng rng(123);
    for (int trial = 0; trial < 12; ++trial) {
        fdtest::ChainSpec spec = fdtest::make_random_chain(rng);
        Params params = fdtest::random_chain_params(rng, spec);
        Params grads;
        fdtest::eval_chain(spec, params, &grads);
        auto loss = [&](const Params& p) { return fdtest::eval_chain(spec, p, nullptr); };
        INFO("trial ", trial);
        CHECK(fdtest::max_fd_rel_err(loss, params, grads) <= 1e-4);
    }
}

TEST_CASE("backward is linear in the output scale") {
    flowlab::Rng rng(5);
    Tensor w0 = rng.normal_matrix(3, 3);
    const double alpha = 3.5;

    auto grads_for = [&](double a) {
        Graph g;
        Var w = g.param("w", w0);
        Var loss = flowlab::scale(flowlab::mean(flowlab::square(flowlab::silu(w))), a);
        g.mark_output("loss", loss);
        return g.backward("loss", Tensor::scalar(1.0));
    };
    auto g1 = grads_for(1.0);
    auto ga = grads_for(alpha);
    for (std::int64_t k = 0; k < 9; ++k)
        CHECK(ga.at("w")[k] == doctest::Approx(alpha * g1.at("w")[k]).epsilon(1e-13));
}

TEST_CASE("forward/backward are bit-deterministic") {
    flowlab::Rng rng(99);
    fdtest::ChainSpec spec = fdtest::make_random_chain(rng);
    Params params = fdtest::random_chain_params(rng, spec);
    Params g1, g2;
    double v1 = fdtest::eval_chain(spec, params, &g1);
    double v2 = fdtest::eval_chain(spec, params, &g2);
    CHECK(v1 == v2);
    for (const auto& [name, t] : g1)
        for (std::int64_t k = 0; k < t.size(); ++k) CHECK(t[k] == g2.at(name)[k]);
}

TEST_CASE("stop_grad blocks gradient but passes value") {
    Graph g;
    Var w = g.param("w", Tensor({2}, {1.5, -2.0}));
    Var y = flowlab::mean(flowlab::square(flowlab::stop_grad(w)));
    g.mark_output("y", y);
    CHECK(g.value(y).item() == doctest::Approx((1.5 * 1.5 + 4.0) / 2.0));
    auto grads = g.backward("y", Tensor::scalar(1.0));
    CHECK(grads.at("w")[0] == 0.0);
    CHECK(grads.at("w")[1] == 0.0);
}

TEST_CASE("input rebinding recomputes the whole tape") {
    Graph g;
    Var x = g.input("x", Tensor({2, 2}, {1, 0, 0, 1}));
    Var w = g.param("w", Tensor({2, 2}, {1, 2, 3, 4}));
    Var y = flowlab::matmul(x, w);
    g.mark_output("y", y);

    auto out = g.forward({{"x", Tensor({3, 2}, {1, 1, 2, 0, 0, 2})}});
    REQUIRE(out.at("y").rows() == 3);
    CHECK(out.at("y").at(0, 0) == 4);   // (1,1) . (1,3)
    CHECK(out.at("y").at(0, 1) == 6);   // (1,1) . (2,4)
    CHECK(out.at("y").at(2, 0) == 6);
    CHECK(out.at("y").at(2, 1) == 8);
}

TEST_CASE("graph boundary errors") {
    Graph g;
    Var x = g.input("x", Tensor({2}, {1, 2}));
    Var w = g.param("w", Tensor({2}, {3, 4}));
    g.mark_output("y", flowlab::mean(x * w));

    CHECK_THROWS_AS(g.input("x", Tensor({2})), std::invalid_argument);   // duplicate leaf
    CHECK_THROWS_AS(g.param("x", Tensor({2})), std::invalid_argument);   // clashes with input
    CHECK_THROWS_AS((void)g.forward({{"nope", Tensor({2})}}), std::invalid_argument);
    CHECK_THROWS_AS((void)g.backward("nope", Tensor::scalar(1.0)), std::invalid_argument);
    CHECK_THROWS_AS((void)g.backward("y", Tensor({2})), std::invalid_argument);  // seed shape

    // rebinding without re-evaluation leaves the tape stale
    g.set_input("x", Tensor({2}, {5, 6}));
    CHECK_THROWS_AS((void)g.backward("y", Tensor::scalar(1.0)), std::runtime_error);
    (void)g.forward({});
    auto grads = g.backward("y", Tensor::scalar(1.0));
    CHECK(grads.at("w")[0] == 2.5);  // d mean(x*w) / dw = x/2
    CHECK(grads.at("w")[1] == 3.0);

    Tensor nan({1}, {std::nan("")});
    CHECK_THROWS_AS(g.set_input("x", nan), std::runtime_error);

    Graph g2;
    Var a = g2.input("a", Tensor({2}, {1, 1}));
    CHECK_THROWS_AS(flowlab::add(x, a), std::invalid_argument);  // cross-graph
    CHECK_THROWS_AS(flowlab::matmul(a, a), std::invalid_argument);  // rank-1 matmul
}

TEST_CASE("shape mismatch errors name the op") {
    Graph g;
    Var a = g.input("a", Tensor({2, 3}));
    Var b = g.input("b", Tensor({3, 2}));
    CHECK_THROWS_WITH_AS(flowlab::add(a, b),
                         doctest::Contains("add: shape mismatch"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(flowlab::concat_cols(a, b),
                         doctest::Contains("concat_cols"), std::invalid_argument);
}

TEST_CASE("adam: fresh state with zero grads leaves params unchanged") {
    flowlab::AdamState opt{flowlab::AdamConfig{}};
    std::map<std::string, Tensor> params{{"w", Tensor({2}, {1.0, -1.0})}};
    std::map<std::string, Tensor> zeros{{"w", Tensor::zeros({2})}};
    for (int i = 0; i < 5; ++i) opt.step(params, zeros, 0.1);
    CHECK(params.at("w")[0] == 1.0);
    CHECK(params.at("w")[1] == -1.0);
    CHECK(opt.step_count() == 5);
}

TEST_CASE("adam: first step with unit grad moves by ~lr") {
    flowlab::AdamState opt{flowlab::AdamConfig{}};
    std::map<std::string, Tensor> params{{"w", Tensor::scalar(0.0)}};
    std::map<std::string, Tensor> grads{{"w", Tensor::scalar(1.0)}};
    const double lr = 1e-3;
    opt.step(params, grads, lr);
    // m-hat = 1, v-hat = 1 -> update = lr / (1 + eps)
    CHECK(params.at("w").item() == doctest::Approx(-lr / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam: constant grad drives update magnitude to lr") {
    flowlab::AdamState opt{flowlab::AdamConfig{}};
    std::map<std::string, Tensor> params{{"w", Tensor::scalar(0.0)}};
    std::map<std::string, Tensor> grads{{"w", Tensor::scalar(0.7)}};
    const double lr = 1e-2;
    double prev = params.at("w").item();
    double last_update = 0.0;
    for (int i = 0; i < 300; ++i) {
        opt.step(params, grads, lr);
        last_update = params.at("w").item() - prev;
        prev = params.at("w").item();
    }
    CHECK(std::abs(last_update) == doctest::Approx(lr).epsilon(0.01));
}

TEST_CASE("adam: moments decay toward zero on zero grads") {
    flowlab::AdamState opt{flowlab::AdamConfig{}};
    std::map<std::string, Tensor> params{{"w", Tensor::scalar(0.0)}};
    opt.step(params, {{"w", Tensor::scalar(1.0)}}, 1e-3);
    const double m1 = opt.m().at("w").item();
    std::map<std::string, Tensor> zeros{{"w", Tensor::scalar(0.0)}};
    opt.step(params, zeros, 1e-3);
    opt.step(params, zeros, 1e-3);
    CHECK(opt.m().at("w").item() == doctest::Approx(m1 * 0.9 * 0.9).epsilon(1e-12));
    CHECK(std::abs(opt.m().at("w").item()) < std::abs(m1));
}

TEST_CASE("adam: error cases") {
    flowlab::AdamState opt{flowlab::AdamConfig{}};
    std::map<std::string, Tensor> params{{"w", Tensor::scalar(0.0)}};
    CHECK_THROWS_AS(opt.step(params, {}, 1e-3), std::invalid_argument);  // missing grad
    std::map<std::string, Tensor> bad{{"w", Tensor::scalar(std::nan(""))}};
    CHECK_THROWS_AS(opt.step(params, bad, 1e-3), std::invalid_argument);
    std::map<std::string, Tensor> wrong{{"w", Tensor({2})}};
    CHECK_THROWS_AS(opt.step(params, wrong, 1e-3), std::invalid_argument);
    CHECK(opt.step_count() == 0);  // failed steps must not advance the counter
}
