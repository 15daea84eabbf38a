#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fd_check.hpp"
#include "stk/graph.hpp"
#include "stk/optim.hpp"

using namespace stk;

TEST_CASE("grad of sum is all ones") {
    ParamSet ps;
    std::mt19937_64 rng(1);
    ps.add("x", Tensor::randn(2, 3, rng));
    Graph g;
    g.backward(g.sum(g.param(ps, "x")));
    const Tensor& gx = g.grads().at("x");
    REQUIRE(gx.rows() == 2);
    REQUIRE(gx.cols() == 3);
    for (size_t i = 0; i < gx.size(); ++i) CHECK(gx[i] == 1.0);
}

TEST_CASE("stop_gradient forward identity, backward zero") {
    ParamSet ps;
    std::mt19937_64 rng(2);
    ps.add("x", Tensor::randn(1, 4, rng));

    Graph g;
    NodeId x = g.param(ps, "x");
    NodeId sg = g.stop_gradient(x);
    for (size_t i = 0; i < ps.at("x").size(); ++i) CHECK(g.value(sg)[i] == ps.at("x")[i]);

    g.backward(g.sum(sg));
    CHECK(g.grads().count("x") == 0);  // unreached == zero
}

TEST_CASE("sum(sg(x) * x) gradient equals x values") {
    ParamSet ps;
    std::mt19937_64 rng(3);
    ps.add("x", Tensor::randn(2, 2, rng));
    Graph g;
    NodeId x = g.param(ps, "x");
    g.backward(g.sum(g.mul(g.stop_gradient(x), x)));
    const Tensor& gx = g.grads().at("x");
    for (size_t i = 0; i < gx.size(); ++i) CHECK(gx[i] == ps.at("x")[i]);
}

TEST_CASE("||sg(v) - c||^2 flows only to c") {
    ParamSet ps;
    std::mt19937_64 rng(4);
    ps.add("v", Tensor::randn(1, 3, rng));
    ps.add("c", Tensor::randn(1, 3, rng));
    Graph g;
    NodeId diff = g.sub(g.stop_gradient(g.param(ps, "v")), g.param(ps, "c"));
    g.backward(g.sum(g.mul(diff, diff)));
    CHECK(g.grads().count("v") == 0);
    CHECK(g.grads().count("c") == 1);
}

TEST_CASE("backward rejects non-scalar loss") {
    ParamSet ps;
    std::mt19937_64 rng(5);
    ps.add("x", Tensor::randn(2, 2, rng));
    Graph g;
    NodeId x = g.param(ps, "x");
    CHECK_THROWS_AS(g.backward(x), Error);
}

// Finite-difference check of every primitive through a composite graph that
// exercises it, plus the 2-layer MLP case.
TEST_CASE("primitive ops pass finite-difference checks") {
    std::mt19937_64 rng(42);

    auto check = [&](const char* tag, auto build, int rows, int cols) {
        CAPTURE(tag);
        ParamSet ps;
        ps.add("x", Tensor::randn(rows, cols, rng, 0.7));
        auto loss_fn = [&]() {
            Graph g;
            return g.value(build(g, ps)).item();
        };
        Graph g;
        NodeId loss = build(g, ps);
        g.backward(loss);
        CHECK(test::max_rel_error(ps, loss_fn, g.grads()) < 1e-4);
    };

    check("tanh", [](Graph& g, ParamSet& ps) {
        NodeId y = g.tanh(g.param(ps, "x"));
        return g.sum(g.mul(y, y));
    }, 3, 4);
    check("relu", [](Graph& g, ParamSet& ps) {
        NodeId y = g.relu(g.param(ps, "x"));
        return g.sum(g.mul(y, y));
    }, 3, 4);
    check("sigmoid", [](Graph& g, ParamSet& ps) {
        NodeId y = g.sigmoid(g.param(ps, "x"));
        return g.sum(g.mul(y, y));
    }, 3, 4);
    check("softmax", [](Graph& g, ParamSet& ps) {
        NodeId y = g.softmax_rows(g.param(ps, "x"));
        return g.sum(g.mul(y, y));
    }, 3, 5);
    check("log_softmax", [](Graph& g, ParamSet& ps) {
        NodeId y = g.log_softmax_rows(g.param(ps, "x"));
        return g.sum(g.mul(y, y));
    }, 3, 5);
    check("layer_norm", [](Graph& g, ParamSet& ps) {
        NodeId y = g.layer_norm_rows(g.param(ps, "x"));
        NodeId w = g.constant(Tensor(1, 6, 0.3));
        return g.sum(g.mul(g.mul(y, y), w));
    }, 4, 6);
    check("matmul+transpose", [](Graph& g, ParamSet& ps) {
        NodeId x = g.param(ps, "x");
        NodeId y = g.matmul(x, g.transpose(x));
        return g.sum(g.mul(y, y));
    }, 3, 4);
    check("slice+concat", [](Graph& g, ParamSet& ps) {
        NodeId x = g.param(ps, "x");
        NodeId a = g.slice_cols(x, 0, 2);
        NodeId b = g.slice_cols(x, 2, 2);
        NodeId y = g.concat_cols({b, a});
        return g.sum(g.mul(y, y));
    }, 3, 4);
    check("pick+log", [](Graph& g, ParamSet& ps) {
        NodeId y = g.softmax_rows(g.param(ps, "x"));
        NodeId p = g.pick(g.log(g.clamp(y, 1e-12, 1.0)), {0, 2, 1});
        return g.scale(g.sum(p), -1.0);
    }, 3, 4);
    check("broadcast add/mul", [](Graph& g, ParamSet& ps) {
        NodeId x = g.param(ps, "x");
        NodeId bias = g.slice_cols(g.stop_gradient(x), 0, 4);  // constant-ish row
        NodeId row = g.slice_cols(x, 0, 4);
        (void)bias;
        NodeId y = g.add(x, g.matmul(g.constant(Tensor(1, 3, 1.0 / 3)), row));
        return g.sum(g.mul(y, y));
    }, 3, 4);
}

TEST_CASE("embedding gather gradient is scatter-add") {
    std::mt19937_64 rng(7);
    ParamSet ps;
    ps.add("table", Tensor::randn(5, 3, rng));
    auto build = [&](Graph& g) {
        NodeId e = g.gather_rows(g.param(ps, "table"), {1, 3, 1});
        return g.sum(g.mul(e, e));
    };
    Graph g;
    NodeId loss = build(g);
    g.backward(loss);
    auto loss_fn = [&]() {
        Graph h;
        return h.value(build(h)).item();
    };
    CHECK(test::max_rel_error(ps, loss_fn, g.grads()) < 1e-4);
    // rows 0, 2, 4 untouched
    const Tensor& gt = g.grads().at("table");
    for (int c = 0; c < 3; ++c) {
        CHECK(gt.at(0, c) == 0.0);
        CHECK(gt.at(2, c) == 0.0);
        CHECK(gt.at(4, c) == 0.0);
    }
}

TEST_CASE("random 2-layer MLP matches finite differences") {
    std::mt19937_64 rng(11);
    ParamSet ps;
    ps.add("w1", Tensor::randn(4, 8, rng, 0.5));
    ps.add("b1", Tensor::randn(1, 8, rng, 0.1));
    ps.add("w2", Tensor::randn(8, 1, rng, 0.5));
    ps.add("b2", Tensor::randn(1, 1, rng, 0.1));
    Tensor input = Tensor::randn(3, 4, rng);

    auto build = [&](Graph& g) {
        NodeId x = g.constant(input);
        NodeId h = g.tanh(g.add(g.matmul(x, g.param(ps, "w1")), g.param(ps, "b1")));
        NodeId y = g.add(g.matmul(h, g.param(ps, "w2")), g.param(ps, "b2"));
        return g.sum(g.mul(y, y));
    };
    Graph g;
    g.backward(build(g));
    auto loss_fn = [&]() {
        Graph h;
        return h.value(build(h)).item();
    };
    CHECK(test::max_rel_error(ps, loss_fn, g.grads()) < 1e-4);
}

TEST_CASE("determinism: identical seed gives bitwise-identical forward") {
    auto run = [] {
        std::mt19937_64 rng(99);
        ParamSet ps;
        ps.add("w", Tensor::randn(6, 6, rng));
        Graph g;
        NodeId y = g.softmax_rows(g.matmul(g.param(ps, "w"), g.param(ps, "w")));
        return g.value(g.sum(y)).item();
    };
    CHECK(run() == run());
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    ParamSet ps;
    std::mt19937_64 rng(13);
    ps.add("w", Tensor::randn(2, 2, rng));
    Tensor before = ps.at("w");
    Adam opt;
    opt.step(ps, {});  // no grads at all
    GradMap zero;
    zero.emplace("w", Tensor(2, 2));
    opt.step(ps, zero);
    for (size_t i = 0; i < before.size(); ++i) CHECK(ps.at("w")[i] == before[i]);
}

TEST_CASE("adam default learning rate is 1e-3") {
    Adam opt;
    CHECK(opt.lr() == 1e-3);
}

TEST_CASE("adam single step matches hand-evaluated recurrence") {
    // one scalar parameter p=2, grad=0.5, defaults
    ParamSet ps;
    ps.add("p", Tensor::scalar(2.0));
    GradMap gm;
    gm.emplace("p", Tensor::scalar(0.5));
    Adam opt;
    opt.step(ps, gm);

    double g = 0.5, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = (1 - b1) * g, v = (1 - b2) * g * g;
    double mhat = m / (1 - b1), vhat = v / (1 - b2);
    double expect = 2.0 - lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(std::abs(ps.at("p")[0] - expect) < 1e-12);
}

TEST_CASE("adam rejects shape mismatch") {
    ParamSet ps;
    ps.add("p", Tensor(2, 2));
    GradMap gm;
    gm.emplace("p", Tensor(3, 1));
    Adam opt;
    CHECK_THROWS_AS(opt.step(ps, gm), Error);
}
