#include "im2col.hpp"

#include <algorithm>

namespace avp::detail {

void im2col(const ConvGeometry& g, const double* x, double* cols) {
    const std::size_t pixels = g.out_pixels();
    for (std::size_t c = 0; c < g.cin; ++c) {
        const double* plane = x + c * g.h * g.w;
        for (std::size_t dy = 0; dy < g.k; ++dy) {
            const auto [ylo, yhi] = g.valid(dy, g.h, g.ho);
            for (std::size_t dx = 0; dx < g.k; ++dx) {
                const auto [xlo, xhi] = g.valid(dx, g.w, g.wo);
                double* row = cols + ((c * g.k + dy) * g.k + dx) * pixels;
                std::fill(row, row + pixels, 0.0);
                for (std::size_t oy = ylo; oy < yhi; ++oy) {
                    const double* src = plane + (oy * g.stride + dy - g.pad) * g.w;
                    double* dst = row + oy * g.wo;
                    for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox] = src[ox * g.stride + dx - g.pad];
                }
            }
        }
    }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* x) {
    const std::size_t pixels = g.out_pixels();
    for (std::size_t c = 0; c < g.cin; ++c) {
        double* plane = x + c * g.h * g.w;
        for (std::size_t dy = 0; dy < g.k; ++dy) {
            const auto [ylo, yhi] = g.valid(dy, g.h, g.ho);
            for (std::size_t dx = 0; dx < g.k; ++dx) {
                const auto [xlo, xhi] = g.valid(dx, g.w, g.wo);
                const double* row = cols + ((c * g.k + dy) * g.k + dx) * pixels;
                for (std::size_t oy = ylo; oy < yhi; ++oy) {
                    double* dst = plane + (oy * g.stride + dy - g.pad) * g.w;
                    const double* src = row + oy * g.wo;
                    for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox * g.stride + dx - g.pad] += src[ox];
                }
            }
        }
    }
}

const double* columns(const ConvGeometry& g, const double* x, std::size_t n, std::vector<double>& scratch) {
    const double* sample = x + n * g.cin * g.h * g.w;
    if (g.pointwise()) return sample;
    scratch.resize(g.taps() * g.out_pixels());
    im2col(g, sample, scratch.data());
    return scratch.data();
}

}  // namespace avp::detail
