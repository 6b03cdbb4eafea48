#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numeric kernels.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avp/random.hpp"
#include "avp/tensor.hpp"

namespace oracle {

inline avp::Tensor random_tensor(const avp::Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    avp::Tensor t(shape);
    avp::CounterRng rng({seed, 0xfeedULL});
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline double max_abs_diff(const avp::Tensor& a, const avp::Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Direct summation with out-of-range taps read as zero.
inline avp::Tensor conv2d(const avp::Tensor& x, const avp::Tensor& k, const avp::Tensor& b, std::size_t stride,
                          std::size_t pad) {
    const long n = static_cast<long>(x.dim(0)), c = static_cast<long>(x.dim(1)), h = static_cast<long>(x.dim(2)),
               w = static_cast<long>(x.dim(3));
    const long o = static_cast<long>(k.dim(0)), ks = static_cast<long>(k.dim(2));
    const long s = static_cast<long>(stride), p = static_cast<long>(pad);
    const long ho = (h + 2 * p - ks) / s + 1, wo = (w + 2 * p - ks) / s + 1;
    avp::Tensor out({static_cast<std::size_t>(n), static_cast<std::size_t>(o), static_cast<std::size_t>(ho),
                     static_cast<std::size_t>(wo)});
    for (long in = 0; in < n; ++in)
        for (long oc = 0; oc < o; ++oc)
            for (long y = 0; y < ho; ++y)
                for (long xx = 0; xx < wo; ++xx) {
                    double acc = b[static_cast<std::size_t>(oc)];
                    for (long ic = 0; ic < c; ++ic)
                        for (long dy = 0; dy < ks; ++dy)
                            for (long dx = 0; dx < ks; ++dx) {
                                const long iy = y * s + dy - p, ix = xx * s + dx - p;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += x[static_cast<std::size_t>(((in * c + ic) * h + iy) * w + ix)] *
                                       k[static_cast<std::size_t>(((oc * c + ic) * ks + dy) * ks + dx)];
                            }
                    out[static_cast<std::size_t>(((in * o + oc) * ho + y) * wo + xx)] = acc;
                }
    return out;
}

// Raw 4-neighbour second difference of an H×W plane with zero outside.
inline std::vector<double> laplacian(const std::vector<double>& g, std::size_t h, std::size_t w) {
    auto at = [&](long i, long j) {
        if (i < 0 || j < 0 || i >= static_cast<long>(h) || j >= static_cast<long>(w)) return 0.0;
        return g[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)];
    };
    std::vector<double> out(h * w);
    for (long i = 0; i < static_cast<long>(h); ++i)
        for (long j = 0; j < static_cast<long>(w); ++j)
            out[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)] =
                at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) - 4.0 * at(i, j);
    return out;
}

inline double softmax_first(double a, double b) { return 1.0 / (1.0 + std::exp(b - a)); }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("avp_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle
