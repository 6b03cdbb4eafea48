#include "avp/ops.hpp"

#include "im2col.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "avp/errors.hpp"

namespace avp {


Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    auto o = out.data();
    auto y = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
    return make_result(std::move(out), {a, b}, "add", [](Node& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad) continue;
            auto g = in->grad_buffer().data();
            auto s = self.grad.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    auto o = out.data();
    auto y = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
    return make_result(std::move(out), {a, b}, "sub", [](Node& self) {
        const double sign[2] = {1.0, -1.0};
        for (std::size_t k = 0; k < 2; ++k) {
            auto& in = self.inputs[k];
            if (!in->requires_grad) continue;
            auto g = in->grad_buffer().data();
            auto s = self.grad.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * s[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    auto o = out.data();
    auto y = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= y[i];
    return make_result(std::move(out), {a, b}, "mul", [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            auto& in = self.inputs[k];
            if (!in->requires_grad) continue;
            auto other = self.inputs[1 - k]->value.data();
            auto g = in->grad_buffer().data();
            auto s = self.grad.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i] * other[i];
        }
    });
}

Var scale(const Var& a, double factor) {
    Tensor out = a.value();
    for (double& v : out.data()) v *= factor;
    return make_result(std::move(out), {a}, "scale", [factor](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        auto s = self.grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * s[i];
    });
}

Var relu(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return make_result(std::move(out), {a}, "relu", [](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        auto x = self.inputs[0]->value.data();
        auto s = self.grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > 0.0) g[i] += s[i];
        }
    });
}

Var exp(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data()) v = std::exp(v);
    return make_result(std::move(out), {a}, "exp", [](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        auto y = self.value.data();
        auto s = self.grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i] * y[i];
    });
}

Var log(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data()) {
        if (!(v > 0.0)) throw NumericError("log of non-positive value " + std::to_string(v));
        v = std::log(v);
    }
    return make_result(std::move(out), {a}, "log", [](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        auto x = self.inputs[0]->value.data();
        auto s = self.grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i] / x[i];
    });
}

Var sum(const Var& a) {
    double total = 0.0;
    for (double v : a.value().data()) total += v;
    return make_result(Tensor::scalar(total), {a}, "sum", [](Node& self) {
        const double s = self.grad[0];
        for (double& g : self.inputs[0]->grad_buffer().data()) g += s;
    });
}

Var mean(const Var& a) {
    const double n = static_cast<double>(a.value().numel());
    double total = 0.0;
    for (double v : a.value().data()) total += v;
    return make_result(Tensor::scalar(total / n), {a}, "mean", [n](Node& self) {
        const double s = self.grad[0] / n;
        for (double& g : self.inputs[0]->grad_buffer().data()) g += s;
    });
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return make_result(std::move(out), {a}, "reshape", [](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        auto s = self.grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
    });
}

Var softmax(const Var& a, std::size_t axis, double temperature) {
    if (!(temperature > 0.0)) {
        throw ContractError("softmax temperature must be > 0, got " + std::to_string(temperature));
    }
    const Shape& shape = a.shape();
    if (axis >= shape.size()) {
        throw ContractError("softmax axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::size_t len = shape[axis];

    Tensor out(shape);
    auto x = a.value().data();
    auto y = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double m = x[base] / temperature;
            for (std::size_t j = 1; j < len; ++j) m = std::max(m, x[base + j * inner] / temperature);
            double z = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double e = std::exp(x[base + j * inner] / temperature - m);
                y[base + j * inner] = e;
                z += e;
            }
            for (std::size_t j = 0; j < len; ++j) y[base + j * inner] /= z;
        }
    }
    return make_result(std::move(out), {a}, "softmax", [outer, inner, len, temperature](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        auto y = self.value.data();
        auto s = self.grad.data();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                double dot = 0.0;
                for (std::size_t j = 0; j < len; ++j) dot += s[base + j * inner] * y[base + j * inner];
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t i = base + j * inner;
                    g[i] += y[i] * (s[i] - dot) / temperature;
                }
            }
        }
    });
}

namespace detail {

void check_conv2d_shapes(const Shape& input, const Shape& kernel, const Shape& bias, Conv2dOptions opts) {
    if (input.size() != 4 || kernel.size() != 4 || bias.size() != 1) {
        throw ContractError("conv2d expects input N×C×H×W, kernel O×C×k×k and bias O; got input " +
                            shape_str(input) + ", kernel " + shape_str(kernel) + ", bias " + shape_str(bias));
    }
    if (input[1] != kernel[1]) {
        throw ContractError("conv2d channel mismatch: input " + shape_str(input) + " vs kernel " +
                            shape_str(kernel));
    }
    if (bias[0] != kernel[0]) {
        throw ContractError("conv2d bias length mismatch: bias " + shape_str(bias) + " vs kernel " +
                            shape_str(kernel));
    }
    if (kernel[2] != kernel[3]) throw ContractError("conv2d kernel must be square, got " + shape_str(kernel));
    if (opts.stride == 0) throw ContractError("conv2d stride must be positive");
    const std::size_t k = kernel[2];
    if (input[2] + 2 * opts.padding < k || input[3] + 2 * opts.padding < k) {
        throw ContractError("conv2d kernel " + shape_str(kernel) + " larger than padded input " +
                            shape_str(input));
    }
}


Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias, Conv2dOptions opts) {
    check_conv2d_shapes(input.shape(), kernel.shape(), bias.shape(), opts);
    const ConvGeometry g(input.shape(), kernel.shape(), opts);
    Tensor out({g.n, g.cout, g.ho, g.wo});
    const std::size_t pixels = g.out_pixels();
    const ConstMatrixMap weights(kernel.data().data(), g.cout, g.taps());
    std::vector<double> scratch;
    for (std::size_t n = 0; n < g.n; ++n) {
        const double* cols = columns(g, input.data().data(), n, scratch);
        MatrixMap y(out.data().data() + n * g.cout * pixels, g.cout, pixels);
        y.noalias() = weights * ConstMatrixMap(cols, g.taps(), pixels);
        for (std::size_t o = 0; o < g.cout; ++o) y.row(o).array() += bias[o];
    }
    return out;
}

}  // namespace detail

Var conv2d(const Var& input, const Var& kernel, const Var& bias, Conv2dOptions opts) {
    using namespace detail;
    Tensor out = detail::conv2d_forward(input.value(), kernel.value(), bias.value(), opts);
    const ConvGeometry geom(input.shape(), kernel.shape(), opts);
    return make_result(std::move(out), {input, kernel, bias}, "conv2d", [geom](Node& self) {
        const ConvGeometry& g = geom;
        Node& in = *self.inputs[0];
        Node& ker = *self.inputs[1];
        Node& b = *self.inputs[2];
        const std::size_t pixels = g.out_pixels();
        const double* gy = self.grad.data().data();

        if (b.requires_grad) {
            auto gb = b.grad_buffer().data();
            for (std::size_t n = 0; n < g.n; ++n) {
                const ConstMatrixMap gout(gy + n * g.cout * pixels, g.cout, pixels);
                for (std::size_t o = 0; o < g.cout; ++o) gb[o] += gout.row(o).sum();
            }
        }
        if (ker.requires_grad) {
            MatrixMap gk(ker.grad_buffer().data().data(), g.cout, g.taps());
            std::vector<double> scratch;
            for (std::size_t n = 0; n < g.n; ++n) {
                const double* cols = columns(g, in.value.data().data(), n, scratch);
                const ConstMatrixMap gout(gy + n * g.cout * pixels, g.cout, pixels);
                gk.noalias() += gout * ConstMatrixMap(cols, g.taps(), pixels).transpose();
            }
        }
        if (in.requires_grad) {
            double* gx = in.grad_buffer().data().data();
            const ConstMatrixMap weights(ker.value.data().data(), g.cout, g.taps());
            RowMatrix gcols(g.taps(), pixels);
            for (std::size_t n = 0; n < g.n; ++n) {
                const ConstMatrixMap gout(gy + n * g.cout * pixels, g.cout, pixels);
                double* gxn = gx + n * g.cin * g.h * g.w;
                if (g.pointwise()) {
                    MatrixMap(gxn, g.taps(), pixels).noalias() += weights.transpose() * gout;
                } else {
                    gcols.noalias() = weights.transpose() * gout;
                    col2im_add(g, gcols.data(), gxn);
                }
            }
        }
    });
}

Var global_avg_pool(const Var& input) {
    const Shape& sh = input.shape();
    if (sh.size() != 4) throw ContractError("global_avg_pool expects N×C×H×W, got " + shape_str(sh));
    const std::size_t plane = sh[2] * sh[3];
    Tensor out({sh[0], sh[1]});
    auto x = input.value().data();
    for (std::size_t i = 0; i < sh[0] * sh[1]; ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) acc += x[i * plane + p];
        out[i] = acc / static_cast<double>(plane);
    }
    return make_result(std::move(out), {input}, "global_avg_pool", [plane](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        const double inv = 1.0 / static_cast<double>(plane);
        for (std::size_t i = 0; i < self.value.numel(); ++i) {
            const double s = self.grad[i] * inv;
            for (std::size_t p = 0; p < plane; ++p) g[i * plane + p] += s;
        }
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (xs.size() != 2 || ws.size() != 2 || bias.shape().size() != 1 || xs[1] != ws[1] ||
        bias.shape()[0] != ws[0]) {
        throw ContractError("linear shape mismatch: x " + shape_str(xs) + ", weight " + shape_str(ws) +
                            ", bias " + shape_str(bias.shape()));
    }
    const std::size_t n = xs[0], in = xs[1], out_dim = ws[0];
    Tensor out({n, out_dim});
    auto xv = x.value().data();
    auto wv = weight.value().data();
    auto bv = bias.value().data();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t o = 0; o < out_dim; ++o) {
            double acc = bv[o];
            for (std::size_t i = 0; i < in; ++i) acc += wv[o * in + i] * xv[r * in + i];
            out[r * out_dim + o] = acc;
        }
    }
    return make_result(std::move(out), {x, weight, bias}, "linear", [n, in, out_dim](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        Node& bn = *self.inputs[2];
        auto s = self.grad.data();
        if (xn.requires_grad) {
            auto g = xn.grad_buffer().data();
            auto w = wn.value.data();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t o = 0; o < out_dim; ++o)
                    for (std::size_t i = 0; i < in; ++i) g[r * in + i] += s[r * out_dim + o] * w[o * in + i];
        }
        if (wn.requires_grad) {
            auto g = wn.grad_buffer().data();
            auto xv = xn.value.data();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t o = 0; o < out_dim; ++o)
                    for (std::size_t i = 0; i < in; ++i) g[o * in + i] += s[r * out_dim + o] * xv[r * in + i];
        }
        if (bn.requires_grad) {
            auto g = bn.grad_buffer().data();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t o = 0; o < out_dim; ++o) g[o] += s[r * out_dim + o];
        }
    });
}

Var cross_entropy(const Var& scores, std::span<const std::size_t> labels) {
    const Shape& sh = scores.shape();
    if (sh.size() != 2 || sh[0] != labels.size()) {
        throw ContractError("cross_entropy expects N×K scores with N labels; got " + shape_str(sh) + " and " +
                            std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = sh[0], k = sh[1];
    for (std::size_t label : labels) {
        if (label >= k) {
            throw ContractError("label " + std::to_string(label) + " out of range for " + std::to_string(k) +
                                " classes");
        }
    }
    Tensor probs({n, k});
    auto x = scores.value().data();
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = x.data() + r * k;
        const double m = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
        const double log_z = m + std::log(z);
        for (std::size_t j = 0; j < k; ++j) probs[r * k + j] = std::exp(row[j] - log_z);
        total += log_z - row[labels[r]];
    }
    std::vector<std::size_t> owned(labels.begin(), labels.end());
    return make_result(Tensor::scalar(total / static_cast<double>(n)), {scores}, "cross_entropy",
                       [probs = std::move(probs), owned = std::move(owned), n, k](Node& self) {
                           auto g = self.inputs[0]->grad_buffer().data();
                           const double s = self.grad[0] / static_cast<double>(n);
                           for (std::size_t r = 0; r < n; ++r) {
                               for (std::size_t j = 0; j < k; ++j) {
                                   const double target = j == owned[r] ? 1.0 : 0.0;
                                   g[r * k + j] += s * (probs[r * k + j] - target);
                               }
                           }
                       });
}

}  // namespace avp
