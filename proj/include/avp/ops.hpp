#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "avp/autograd.hpp"

namespace avp {

// Elementwise, identical shapes only.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var relu(const Var& a);
Var exp(const Var& a);
// Throws NumericError on non-positive input.
Var log(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, Shape shape);

// Stabilized softmax of values/temperature along `axis`.
Var softmax(const Var& a, std::size_t axis, double temperature = 1.0);

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

// input N×Cin×H×W, kernel Cout×Cin×k×k, bias Cout; zero padding.
Var conv2d(const Var& input, const Var& kernel, const Var& bias, Conv2dOptions opts = {});

// N×C×H×W -> N×C
Var global_avg_pool(const Var& input);

// x N×I, weight O×I, bias O -> N×O
Var linear(const Var& x, const Var& weight, const Var& bias);

// Mean cross-entropy of softmax(scores) over rows of an N×K score matrix.
Var cross_entropy(const Var& scores, std::span<const std::size_t> labels);

namespace detail {

// Raw kernels shared by the differentiable op and by callers that need no graph.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias, Conv2dOptions opts);
void check_conv2d_shapes(const Shape& input, const Shape& kernel, const Shape& bias, Conv2dOptions opts);

}  // namespace detail

}  // namespace avp
