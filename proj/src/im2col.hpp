#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <utility>
#include <vector>

#include "avp/ops.hpp"
#include "avp/tensor.hpp"

namespace avp::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
    std::size_t n, cin, h, w, cout, k, stride, pad, ho, wo;

    ConvGeometry(const Shape& in, const Shape& ker, Conv2dOptions opts)
        : n(in[0]), cin(in[1]), h(in[2]), w(in[3]), cout(ker[0]), k(ker[2]), stride(opts.stride),
          pad(opts.padding), ho((in[2] + 2 * opts.padding - ker[2]) / opts.stride + 1),
          wo((in[3] + 2 * opts.padding - ker[2]) / opts.stride + 1) {}

    std::size_t taps() const { return cin * k * k; }
    std::size_t out_pixels() const { return ho * wo; }
    // 1×1 stride-1 unpadded convolutions read the input plane directly as columns.
    bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }

    // Output range [lo, hi) whose tap at offset d lands inside [0, extent).
    std::pair<std::size_t, std::size_t> valid(std::size_t d, std::size_t extent, std::size_t out) const {
        const long s = static_cast<long>(stride);
        const long shift = static_cast<long>(d) - static_cast<long>(pad);
        long lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
        long hi = static_cast<long>(extent) - 1 - shift;
        hi = hi < 0 ? 0 : hi / s + 1;
        hi = std::min<long>(hi, static_cast<long>(out));
        if (lo > hi) lo = hi;
        return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
    }
};

// cols[(c·k + dy)·k + dx][oy·Wo + ox] = x[c][oy·s + dy − p][ox·s + dx − p], zero outside.
void im2col(const ConvGeometry& g, const double* x, double* cols);

// Transpose of im2col: scatter-adds column entries back onto the input plane.
void col2im_add(const ConvGeometry& g, const double* cols, double* x);

// Column matrix of sample n, either borrowed from the input or expanded into scratch.
const double* columns(const ConvGeometry& g, const double* x, std::size_t n, std::vector<double>& scratch);

}  // namespace avp::detail
