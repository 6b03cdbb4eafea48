#include "avp/errors.hpp"
#include "avp/grad_check.hpp"
#include "avp/mask_generator.hpp"
#include "avp/ops.hpp"
#include "avp/prompt.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace avp;

namespace {

std::size_t ones(const Tensor& t) {
    std::size_t n = 0;
    for (double v : t.data()) n += v == 1.0;
    return n;
}

}  // namespace

TEST_CASE("frame support") {
    CHECK(ones(frame_support(224, 224, 112)) == 50176);
    CHECK(ones(frame_support(224, 224, 0)) == 0);
    CHECK(ones(frame_support(224, 224, 5)) == 4380);
    CHECK(ones(frame_support(64, 64, 32)) == 4096);
    CHECK(ones(frame_support(7, 7, 4)) == 49);
    for (std::size_t h : {5, 8, 9}) {
        for (std::size_t w : {6, 8, 11}) {
            for (std::size_t f = 0; f <= 6; ++f) {
                const Tensor s = frame_support(h, w, f);
                CHECK(s.shape() == Shape{1, h, w});
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j) {
                        const std::size_t edge = std::min({i, j, h - 1 - i, w - 1 - j});
                        CHECK(s.at({0, i, j}) == (edge < f ? 1.0 : 0.0));
                    }
                const std::size_t expected = 2 * f <= std::min(h, w) ? h * w - (h - 2 * f) * (w - 2 * f) : h * w;
                CHECK(ones(s) == expected);
                CHECK(count_prompt_params(h, w, f) == 3 * expected);
            }
        }
    }
}

TEST_CASE("prompt parameter counts") {
    CHECK(count_prompt_params(224, 224, 30) == 69840);
    CHECK(count_prompt_params(224, 224, 0) == 0);
    CHECK(count_prompt_params(224, 224, 112) == 150528);
}

TEST_CASE("prompt template initialization") {
    const PromptTemplate p = make_prompt_template(32, 32, 4, 3);
    CHECK(p.values.shape() == Shape{3, 32, 32});
    CHECK(p.values.requires_grad());
    CHECK(p.width == 4);
    double mean = 0.0, sq = 0.0;
    for (double v : p.values.value().data()) {
        mean += v;
        sq += v * v;
    }
    const double n = 3 * 32 * 32;
    mean /= n;
    CHECK(std::abs(mean) < 0.003);
    CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.03).epsilon(0.05));
    CHECK(bitwise_equal(p.values.value(), make_prompt_template(32, 32, 4, 3).values.value()));
    CHECK_FALSE(bitwise_equal(p.values.value(), make_prompt_template(32, 32, 4, 4).values.value()));
}

TEST_CASE("apply prompt worked examples") {
    const PromptTemplate p = make_prompt_template(4, 4, 1, 5);
    const Tensor x = oracle::random_tensor({3, 4, 4}, 6, 0.0, 1.0);
    SUBCASE("zero mask is the identity") {
        CHECK(bitwise_equal(apply_prompt(x, p, Tensor({1, 4, 4}, 0.0)), x));
    }
    SUBCASE("full cover with full mask adds the template everywhere") {
        const PromptTemplate full = make_prompt_template(4, 4, 2, 5);
        const Tensor y = apply_prompt(x, full, Tensor({1, 4, 4}, 1.0));
        for (std::size_t i = 0; i < 48; ++i) CHECK(y[i] == x[i] + full.values.value()[i]);
    }
    SUBCASE("soft mask matches the elementwise oracle") {
        const Tensor m = oracle::random_tensor({1, 4, 4}, 7, 0.0, 1.0);
        const Tensor y = apply_prompt(x, p, m);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t j = 0; j < 4; ++j) {
                    const double expected = x.at({c, i, j}) + p.values.value().at({c, i, j}) *
                                                                  p.support.at({0, i, j}) * m.at({0, i, j});
                    CHECK(std::abs(y.at({c, i, j}) - expected) < 1e-12);
                }
    }
    CHECK_THROWS_AS(apply_prompt(Tensor({3, 5, 4}), p, Tensor({1, 4, 4})), ContractError);
    CHECK_THROWS_AS(apply_prompt(x, p, Tensor({1, 4, 5})), ContractError);
}

TEST_CASE("discard identity holds for batches") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const PromptTemplate p = make_prompt_template(8, 8, seed % 5, seed);
        const Tensor x = oracle::random_tensor({2, 3, 8, 8}, 100 + seed, 0.0, 1.0);
        const Var y = apply_prompt(constant(x), p, constant(Tensor({2, 1, 8, 8}, 0.0)));
        CHECK(bitwise_equal(y.value(), x));
    }
}

TEST_CASE("values inside the frame never matter") {
    PromptTemplate p = make_prompt_template(8, 8, 2, 1);
    const Tensor x = oracle::random_tensor({1, 3, 8, 8}, 2, 0.0, 1.0);
    const Tensor mask = oracle::random_tensor({1, 1, 8, 8}, 3, 0.0, 1.0);
    const Tensor before = apply_prompt(constant(x), p, constant(mask)).value();
    Tensor perturbed = p.values.value();
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 2; i < 6; ++i)
            for (std::size_t j = 2; j < 6; ++j) perturbed.at({c, i, j}) += 10.0;
    p.values.mutable_value() = perturbed;
    const Var y = apply_prompt(constant(x), p, constant(mask));
    CHECK(bitwise_equal(y.value(), before));
    backward(sum(mul(y, y)));
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                const bool inside = i >= 2 && i < 6 && j >= 2 && j < 6;
                if (inside) CHECK(p.values.grad().at({c, i, j}) == 0.0);
            }
}

TEST_CASE("flipping one region changes only its block inside the support") {
    const std::size_t r = 4, h = 12;
    const PromptTemplate p = make_prompt_template(h, h, 3, 9);
    const Tensor x = oracle::random_tensor({3, h, h}, 10, 0.0, 1.0);
    CounterRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor regions({3, 3});
        for (double& v : regions.data()) v = static_cast<double>(rng.below(2));
        const std::size_t gy = rng.below(3), gx = rng.below(3);
        Tensor flipped = regions;
        flipped.at({gy, gx}) = 1.0 - flipped.at({gy, gx});
        const Tensor a = apply_prompt(x, p, dilate(regions, r));
        const Tensor b = apply_prompt(x, p, dilate(flipped, r));
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < h; ++j) {
                    const bool in_block = i / r == gy && j / r == gx;
                    const bool in_support = p.support.at({0, i, j}) == 1.0;
                    if (!(in_block && in_support)) CHECK(a.at({c, i, j}) == b.at({c, i, j}));
                    else CHECK(a.at({c, i, j}) != b.at({c, i, j}));
                }
    }
}

TEST_CASE("apply prompt gradients") {
    const PromptTemplate p0 = make_prompt_template(6, 6, 2, 1);
    const auto build = [&](std::span<const Var> v) {
        const PromptTemplate p{v[1], p0.support, p0.width};
        return sum(mul(apply_prompt(v[0], p, v[2]), v[3]));
    };
    const std::vector<Shape> shapes{{2, 3, 6, 6}, {3, 6, 6}, {2, 1, 6, 6}, {2, 3, 6, 6}};
    CHECK(grad_check(build, shapes, 23).max_rel_error < 1e-6);
}
