#include <cmath>
#include <numbers>
#include <vector>

#include "avp/autograd.hpp"
#include "avp/errors.hpp"
#include "avp/grad_check.hpp"
#include "avp/ops.hpp"
#include "avp/optim.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace avp;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.dim(2) == 4);
    t.at({1, 2, 3}) = 7.0;
    CHECK(t[23] == 7.0);
    CHECK_THROWS_AS(t.dim(3), ContractError);
    CHECK_THROWS_AS(t.at({2, 0, 0}), ContractError);
    CHECK_THROWS_AS(Tensor({2, 0}), ContractError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), ContractError);
    CHECK_THROWS_AS(t.reshaped({5, 5}), ContractError);
    CHECK(t.reshaped({24}).data()[23] == 7.0);

    const Tensor s = Tensor::scalar(2.5);
    CHECK(s.rank() == 0);
    CHECK(s.numel() == 1);
    CHECK(s.item() == 2.5);
    CHECK_THROWS_AS(t.item(), ContractError);
}

TEST_CASE("bitwise equality distinguishes signed zero") {
    Tensor a({2}, std::vector<double>{0.0, 1.0});
    Tensor b({2}, std::vector<double>{-0.0, 1.0});
    CHECK(a == b);
    CHECK_FALSE(bitwise_equal(a, b));
    CHECK(tensor_hash(a) != tensor_hash(b));
    CHECK(tensor_hash(a) != tensor_hash(a.reshaped({2, 1})));
}

TEST_CASE("counter rng is order independent") {
    CounterRng a({1, 2, 3});
    CounterRng b({1, 2, 3});
    CounterRng c({1, 2, 4});
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CounterRng u(42);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK((v >= 0.0 && v < 1.0));
        CHECK(u.below(7) < 7);
    }
    CHECK(std::isfinite(gumbel_from_uniform(0.0)));
    CHECK(std::isfinite(gumbel_from_uniform(1.0)));
    CHECK(gumbel_from_uniform(0.0) == doctest::Approx(-std::log(-std::log(1e-12))));
}

TEST_CASE("conv2d worked examples") {
    SUBCASE("identity 1x1 kernel") {
        const Tensor x = oracle::random_tensor({1, 1, 3, 3}, 1);
        const Tensor y = detail::conv2d_forward(x, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}), {});
        CHECK(bitwise_equal(x, y));
    }
    SUBCASE("zero input yields bias") {
        const Tensor y = detail::conv2d_forward(Tensor({1, 1, 4, 4}), oracle::random_tensor({2, 1, 3, 3}, 2),
                                                Tensor({2}, std::vector<double>{0.25, -3.0}), {1, 1});
        for (std::size_t i = 0; i < 16; ++i) CHECK(y[i] == 0.25);
        for (std::size_t i = 16; i < 32; ++i) CHECK(y[i] == -3.0);
    }
    SUBCASE("strided padded case matches direct summation") {
        const Tensor x = oracle::random_tensor({1, 2, 5, 5}, 3);
        const Tensor k = oracle::random_tensor({3, 2, 3, 3}, 4);
        const Tensor b = oracle::random_tensor({3}, 5);
        const Tensor y = detail::conv2d_forward(x, k, b, {2, 1});
        CHECK(y.shape() == Shape{1, 3, 3, 3});
        CHECK(oracle::max_abs_diff(y, oracle::conv2d(x, k, b, 2, 1)) < 1e-12);
    }
}

TEST_CASE("conv2d matches direct summation over random geometries") {
    CounterRng rng(77);
    int cases = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng.below(3), stride = 1 + rng.below(2), pad = rng.below(2);
        const std::size_t h = 1 + rng.below(7), w = 1 + rng.below(7);
        if (h + 2 * pad < k || w + 2 * pad < k) continue;
        const std::size_t n = 1 + rng.below(2), cin = 1 + rng.below(3), cout = 1 + rng.below(3);
        const Tensor x = oracle::random_tensor({n, cin, h, w}, 1000 + trial);
        const Tensor ker = oracle::random_tensor({cout, cin, k, k}, 2000 + trial);
        const Tensor b = oracle::random_tensor({cout}, 3000 + trial);
        const Tensor y = detail::conv2d_forward(x, ker, b, {stride, pad});
        const Tensor ref = oracle::conv2d(x, ker, b, stride, pad);
        REQUIRE(y.shape() == ref.shape());
        CHECK(oracle::max_abs_diff(y, ref) < 1e-10);
        ++cases;
    }
    CHECK(cases >= 100);
}

TEST_CASE("conv2d shape errors name both shapes") {
    const Tensor x({1, 2, 4, 4});
    try {
        detail::conv2d_forward(x, Tensor({1, 3, 3, 3}), Tensor({1}), {});
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[1x2x4x4]") != std::string::npos);
        CHECK(msg.find("[1x3x3x3]") != std::string::npos);
    }
    CHECK_THROWS_AS(detail::conv2d_forward(x, Tensor({2, 2, 3, 3}), Tensor({3}), {}), ContractError);
    CHECK_THROWS_AS(detail::conv2d_forward(x, Tensor({1, 2, 5, 5}), Tensor({1}), {}), ContractError);
    CHECK_THROWS_AS(detail::conv2d_forward(x, Tensor({1, 2, 3, 3}), Tensor({1}), {0, 0}), ContractError);
}

TEST_CASE("softmax worked examples") {
    const auto sm = [](std::vector<double> v, double t) {
        const std::size_t n = v.size();
        return softmax(constant(Tensor({n}, std::move(v))), 0, t).value();
    };
    const Tensor a = sm({0.0, 0.0}, 1.0);
    CHECK(a[0] == 0.5);
    CHECK(a[1] == 0.5);
    const Tensor b = sm({1.0, 0.0}, 1.0);
    CHECK(b[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(b[1] == doctest::Approx(0.2689).epsilon(1e-4));
    CHECK(b[0] == doctest::Approx(oracle::softmax_first(1.0, 0.0)).epsilon(1e-15));
    CHECK(sm({1.0, 0.0}, 0.01)[0] > 1.0 - 1e-10);
    CHECK_THROWS_AS(sm({1.0, 0.0}, 0.0), ContractError);
    CHECK_THROWS_AS(sm({1.0, 0.0}, -1.0), ContractError);
}

TEST_CASE("softmax is a shift-invariant probability vector") {
    CounterRng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(6);
        const std::size_t axis = rng.below(2);
        const double t = rng.uniform(0.1, 5.0);
        const double shift = rng.uniform(-50.0, 50.0);
        Tensor x = oracle::random_tensor({rows, cols}, 100 + trial, -10.0, 10.0);
        Tensor xs = x;
        for (double& v : xs.data()) v += shift;
        const Tensor p = softmax(constant(x), axis, t).value();
        const Tensor q = softmax(constant(xs), axis, t).value();
        for (std::size_t i = 0; i < p.numel(); ++i) {
            CHECK(p[i] > 0.0);
            CHECK(p[i] < 1.0 + 1e-15);
            CHECK(std::abs(p[i] - q[i]) < 1e-12);
        }
        const std::size_t outer = axis == 0 ? cols : rows, len = axis == 0 ? rows : cols;
        for (std::size_t o = 0; o < outer; ++o) {
            double s = 0.0;
            for (std::size_t j = 0; j < len; ++j) s += axis == 0 ? p.at({j, o}) : p.at({o, j});
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("backward worked examples") {
    Var p = parameter(oracle::random_tensor({2, 3}, 9));
    backward(sum(p));
    for (double g : p.grad().data()) CHECK(g == 1.0);

    Var q = parameter(Tensor({3}, std::vector<double>{1, 2, 3}));
    backward(sum(mul(q, q)));
    CHECK(q.grad()[0] == 2.0);
    CHECK(q.grad()[1] == 4.0);
    CHECK(q.grad()[2] == 6.0);

    SUBCASE("leaf grads accumulate across sweeps") {
        backward(sum(mul(q, q)));
        CHECK(q.grad()[2] == 12.0);
    }
    SUBCASE("non-scalar loss is rejected") { CHECK_THROWS_AS(backward(mul(q, q)), ContractError); }
    SUBCASE("constants never receive grads") {
        Var c = constant(Tensor({3}, 1.0));
        backward(sum(mul(c, q)));
        CHECK_FALSE(c.has_grad());
        CHECK_THROWS_AS(c.grad(), ContractError);
    }
}

TEST_CASE("shared subexpressions are visited once") {
    Var p = parameter(Tensor({2}, std::vector<double>{1.5, -2.0}));
    const Var e = exp(p);
    backward(sum(add(e, e)));
    CHECK(p.grad()[0] == doctest::Approx(2.0 * std::exp(1.5)).epsilon(1e-15));
    CHECK(p.grad()[1] == doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-15));
}

TEST_CASE("composed conv relu softmax cross-entropy passes gradient check") {
    const std::vector<std::size_t> labels{2};
    const auto build = [&](std::span<const Var> v) {
        const Var h = relu(conv2d(v[0], v[1], v[2], {1, 1}));
        const Var logits = reshape(global_avg_pool(h), {1, 3});
        return cross_entropy(logits, labels);
    };
    const std::vector<Shape> shapes{{1, 1, 6, 6}, {3, 1, 3, 3}, {3}};
    CHECK(grad_check(build, shapes, 11).max_rel_error < 1e-4);
}

TEST_CASE("grad_check worked examples") {
    SUBCASE("softmax then log") {
        const auto build = [](std::span<const Var> v) { return sum(log(softmax(v[0], 0, 1.3))); };
        const std::vector<Shape> shapes{{4}};
        CHECK(grad_check(build, shapes, 3).max_rel_error < 1e-6);
    }
    SUBCASE("padded conv") {
        const auto build = [](std::span<const Var> v) {
            return sum(mul(conv2d(v[0], v[1], v[2], {1, 1}), conv2d(v[0], v[1], v[2], {1, 1})));
        };
        const std::vector<Shape> shapes{{1, 1, 4, 4}, {1, 1, 3, 3}, {1}};
        CHECK(grad_check(build, shapes, 4).max_rel_error < 1e-6);
    }
    SUBCASE("identity map") {
        const auto build = [](std::span<const Var> v) { return sum(v[0]); };
        const std::vector<Shape> shapes{{1}};
        CHECK(grad_check(build, shapes, 5).max_rel_error <= 1e-12);
    }
}

TEST_CASE("every op family passes gradient check") {
    const std::vector<std::size_t> labels{0, 2, 1};
    struct Case {
        const char* name;
        GraphBuilder build;
        std::vector<Shape> shapes;
    };
    const std::vector<Case> cases{
        {"add", [](auto v) { return sum(mul(add(v[0], v[1]), v[0])); }, {{2, 3}, {2, 3}}},
        {"sub", [](auto v) { return sum(mul(sub(v[0], v[1]), v[1])); }, {{4}, {4}}},
        {"mul", [](auto v) { return sum(mul(v[0], v[1])); }, {{3, 2}, {3, 2}}},
        {"scale", [](auto v) { return sum(mul(scale(v[0], -2.5), v[0])); }, {{5}}},
        {"relu", [](auto v) { return sum(mul(relu(v[0]), v[1])); }, {{6}, {6}}},
        {"exp", [](auto v) { return sum(exp(v[0])); }, {{2, 2}}},
        {"log", [](auto v) { return sum(log(exp(v[0]))); }, {{3}}},
        {"mean", [](auto v) { return mean(mul(v[0], v[0])); }, {{2, 5}}},
        {"reshape", [](auto v) { return sum(mul(reshape(v[0], {6}), v[1])); }, {{2, 3}, {6}}},
        {"softmax axis 1", [](auto v) { return sum(mul(softmax(v[0], 1, 0.7), v[1])); }, {{2, 4}, {2, 4}}},
        {"softmax axis 0", [](auto v) { return sum(mul(softmax(v[0], 0, 2.0), v[1])); }, {{3, 2}, {3, 2}}},
        {"conv stride 2", [](auto v) { return sum(mul(conv2d(v[0], v[1], v[2], {2, 1}), conv2d(v[0], v[1], v[2], {2, 1}))); },
         {{2, 2, 5, 5}, {3, 2, 3, 3}, {3}}},
        {"conv 1x1", [](auto v) { return sum(mul(conv2d(v[0], v[1], v[2]), conv2d(v[0], v[1], v[2]))); },
         {{1, 3, 3, 3}, {2, 3, 1, 1}, {2}}},
        {"global avg pool", [](auto v) { return sum(mul(global_avg_pool(v[0]), v[1])); }, {{2, 3, 4, 4}, {2, 3}}},
        {"linear", [](auto v) { return sum(mul(linear(v[0], v[1], v[2]), linear(v[0], v[1], v[2]))); },
         {{3, 4}, {2, 4}, {2}}},
        {"cross entropy", [&](auto v) { return cross_entropy(v[0], labels); }, {{3, 4}}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        CHECK(grad_check(c.build, c.shapes, 21).max_rel_error < 1e-4);
    }
}

TEST_CASE("op contract errors") {
    const Var a = constant(Tensor({2}));
    const Var b = constant(Tensor({3}));
    CHECK_THROWS_AS(add(a, b), ContractError);
    CHECK_THROWS_AS(mul(a, b), ContractError);
    CHECK_THROWS_AS(log(constant(Tensor({2}, std::vector<double>{1.0, 0.0}))), NumericError);
    CHECK_THROWS_AS(softmax(a, 1), ContractError);
    const std::vector<std::size_t> bad{3};
    CHECK_THROWS_AS(cross_entropy(constant(Tensor({1, 3})), bad), ContractError);
}

TEST_CASE("cross entropy of uniform scores is log K") {
    const std::vector<std::size_t> labels{1, 3};
    CHECK(cross_entropy(constant(Tensor({2, 4}, 0.3)), labels).value().item() == doctest::Approx(std::log(4.0)));
}

TEST_CASE("sgd step and cosine schedule") {
    SUBCASE("one arithmetic step") {
        Var p = parameter(Tensor::scalar(1.0));
        backward(scale(p, 0.5));
        SgdState s({{"p", {p}, 1.0}}, 10);
        sgd_step(s);
        CHECK(p.value().item() == 0.5);
        CHECK_FALSE(p.has_grad());
    }
    SUBCASE("zero gradient leaves parameter unchanged") {
        Var p = parameter(Tensor({2}, std::vector<double>{3.0, -1.0}));
        backward(scale(sum(p), 0.0));
        SgdState s({{"p", {p}, 40.0}}, 10);
        sgd_step(s);
        CHECK(p.value()[0] == 3.0);
        CHECK(p.value()[1] == -1.0);
    }
    SUBCASE("missing grad") {
        Var p = parameter(Tensor({1}));
        SgdState s({{"p", {p}, 1.0}}, 1);
        CHECK_THROWS_AS(sgd_step(s), ContractError);
    }
    SUBCASE("divergence is reported") {
        Var p = parameter(Tensor({1}, 1e308));
        backward(scale(sum(p), 1e308));
        SgdState s({{"p", {p}, 10.0}}, 1);
        CHECK_THROWS_AS(sgd_step(s), NumericError);
    }
    CHECK(std::abs(SgdState::cosine_rate(40.0, 15, 30) - 20.0) < 1e-9);
    CHECK(SgdState::cosine_rate(40.0, 0, 30) == 40.0);
    for (std::size_t e = 0; e <= 30; ++e) {
        const double lr = SgdState::cosine_rate(1.0, e, 30);
        CHECK(lr >= 0.0);
        CHECK(lr == doctest::Approx(0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(e) / 30.0))));
    }
}

TEST_CASE("identical seeds give bitwise identical trajectories") {
    const auto run = [] {
        Var w = parameter(oracle::random_tensor({2, 1, 3, 3}, 8));
        Var b = parameter(Tensor({2}));
        const Tensor x = oracle::random_tensor({2, 1, 5, 5}, 9);
        const std::vector<std::size_t> labels{0, 1};
        SgdState s({{"conv", {w, b}, 0.5}}, 5);
        for (std::size_t e = 0; e < 5; ++e) {
            s.set_epoch(e);
            backward(cross_entropy(global_avg_pool(relu(conv2d(constant(x), w, b, {1, 1}))), labels));
            sgd_step(s);
        }
        return w.value();
    };
    CHECK(bitwise_equal(run(), run()));
}
