#include "avp/edge.hpp"
#include "avp/errors.hpp"
#include "avp/grad_check.hpp"
#include "avp/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace avp;

TEST_CASE("grayscale worked examples") {
    const Tensor white = to_grayscale(Tensor({3, 4, 4}, 1.0));
    CHECK(white.shape() == Shape{1, 4, 4});
    for (double v : white.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

    Tensor red({3, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) red[i] = 1.0;
    const Tensor red_gray = to_grayscale(red);
    for (double v : red_gray.data()) CHECK(v == 0.299);

    const Tensor img = oracle::random_tensor({3, 2, 2}, 4, 0.0, 1.0);
    const Tensor g = to_grayscale(img);
    for (std::size_t p = 0; p < 4; ++p) CHECK(g[p] == 0.299 * img[p] + 0.587 * img[4 + p] + 0.114 * img[8 + p]);

    CHECK_THROWS_AS(to_grayscale(Tensor({2, 4, 4})), ContractError);
    CHECK_THROWS_AS(to_grayscale(Tensor({1, 4, 4, 4})), ContractError);
}

TEST_CASE("laplacian kernel is fixed and zero-sum") {
    const Tensor& k = laplacian_kernel();
    CHECK(k.shape() == Shape{1, 1, 3, 3});
    double total = 0.0;
    for (double v : k.data()) total += v;
    CHECK(total == 0.0);
    CHECK(k.at({0, 0, 1, 1}) == -4.0);
    CHECK(k.at({0, 0, 0, 1}) == 1.0);
    CHECK(k.at({0, 0, 0, 0}) == 0.0);
}

TEST_CASE("laplacian worked examples") {
    SUBCASE("constant image has zero interior") {
        const EdgeMap e = laplacian_edge_map(Tensor({1, 6, 7}, 0.37));
        CHECK(e.height == 6);
        CHECK(e.width == 7);
        for (std::size_t i = 1; i + 1 < 6; ++i)
            for (std::size_t j = 1; j + 1 < 7; ++j) CHECK(e.values.at({0, i, j}) == 0.0);
        CHECK(e.values.at({0, 0, 0}) == doctest::Approx(-2.0 * 0.37 / 8.0));
    }
    SUBCASE("impulse response is the stencil") {
        Tensor g({1, 5, 5});
        g.at({0, 2, 2}) = 1.0;
        const Tensor raw = laplacian_response(g);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                const std::size_t d = (i > 2 ? i - 2 : 2 - i) + (j > 2 ? j - 2 : 2 - j);
                const double expected = d == 0 ? -4.0 : (d == 1 ? 1.0 : 0.0);
                CHECK(raw.at({0, i, j}) == expected);
            }
    }
    SUBCASE("random image matches direct second differences") {
        const Tensor g = oracle::random_tensor({1, 6, 6}, 7, 0.0, 1.0);
        const auto ref = oracle::laplacian({g.data().begin(), g.data().end()}, 6, 6);
        const Tensor raw = laplacian_response(g);
        const EdgeMap e = laplacian_edge_map(g);
        for (std::size_t i = 0; i < 36; ++i) {
            CHECK(std::abs(raw[i] - ref[i]) < 1e-12);
            CHECK(std::abs(e.values[i] - ref[i] / 8.0) < 1e-12);
        }
    }
}

TEST_CASE("edge maps stay in [-1, 1] and ignore constant shifts in the interior") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t h = 3 + seed % 5, w = 4 + seed % 3;
        const Tensor g = oracle::random_tensor({1, h, w}, 50 + seed, 0.0, 1.0);
        Tensor shifted = g;
        const double c = 0.1 * static_cast<double>(seed % 7) - 0.3;
        for (double& v : shifted.data()) v += c;
        const EdgeMap a = laplacian_edge_map(g);
        const EdgeMap b = laplacian_edge_map(shifted);
        for (double v : a.values.data()) CHECK((v >= -1.0 && v <= 1.0));
        for (std::size_t i = 1; i + 1 < h; ++i)
            for (std::size_t j = 1; j + 1 < w; ++j)
                CHECK(std::abs(a.values.at({0, i, j}) - b.values.at({0, i, j})) < 1e-12);
    }
    Tensor extreme({1, 3, 3});
    extreme.at({0, 1, 1}) = 1.0;
    CHECK(laplacian_edge_map(extreme).values.at({0, 1, 1}) == -0.5);
}

TEST_CASE("batched and differentiable edge paths agree with the single-image path") {
    const Tensor imgs = oracle::random_tensor({3, 3, 8, 8}, 9, 0.0, 1.0);
    const Tensor batch = laplacian_edge_maps(to_grayscale(imgs));
    const Tensor diff = laplacian_edges(grayscale(constant(imgs))).value();
    for (std::size_t n = 0; n < 3; ++n) {
        Tensor one({3, 8, 8});
        std::copy_n(imgs.data().begin() + n * 192, 192, one.data().begin());
        const EdgeMap e = laplacian_edge_map(to_grayscale(one));
        for (std::size_t i = 0; i < 64; ++i) {
            CHECK(std::abs(batch[n * 64 + i] - e.values[i]) < 1e-15);
            CHECK(std::abs(diff[n * 64 + i] - e.values[i]) < 1e-12);
        }
    }
    const auto build = [](std::span<const Var> v) { return sum(mul(laplacian_edges(grayscale(v[0])), v[1])); };
    const std::vector<Shape> shapes{{2, 3, 5, 5}, {2, 1, 5, 5}};
    CHECK(grad_check(build, shapes, 3).max_rel_error < 1e-4);
}
