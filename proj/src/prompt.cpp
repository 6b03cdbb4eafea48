#include "avp/prompt.hpp"

#include <algorithm>

#include "avp/errors.hpp"
#include "avp/random.hpp"

namespace avp {

Tensor frame_support(std::size_t height, std::size_t width, std::size_t frame) {
    Tensor s({1, height, width});
    for (std::size_t i = 0; i < height; ++i)
        for (std::size_t j = 0; j < width; ++j)
            s[i * width + j] = std::min({i, j, height - 1 - i, width - 1 - j}) < frame ? 1.0 : 0.0;
    return s;
}

PromptTemplate make_prompt_template(std::size_t height, std::size_t width, std::size_t frame, std::uint64_t seed) {
    CounterRng rng({seed, 0x70726f6d7074ULL});
    Tensor values({3, height, width});
    for (double& v : values.data()) v = rng.normal(0.0, kPromptInitStd);
    return {parameter(std::move(values)), frame_support(height, width, frame), frame};
}

Var apply_prompt(const Var& images, const PromptTemplate& prompt, const Var& mask) {
    const Shape& xs = images.shape();
    const Shape& ps = prompt.values.shape();
    if (xs.size() != 4 || xs[1] != 3 || ps.size() != 3 || xs[2] != ps[1] || xs[3] != ps[2]) {
        throw ContractError("apply_prompt: images " + shape_str(xs) + " do not match prompt " + shape_str(ps));
    }
    if (mask.shape() != Shape{xs[0], 1, xs[2], xs[3]}) {
        throw ContractError("apply_prompt: mask " + shape_str(mask.shape()) + " does not match images " +
                            shape_str(xs));
    }
    const std::size_t n = xs[0], plane = xs[2] * xs[3];
    Tensor out = images.value();
    auto o = out.data();
    auto p = prompt.values.value().data();
    auto sup = prompt.support.data();
    auto m = mask.value().data();
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < 3; ++c) {
            double* row = o.data() + (b * 3 + c) * plane;
            const double* pc = p.data() + c * plane;
            const double* mb = m.data() + b * plane;
            for (std::size_t i = 0; i < plane; ++i) row[i] += pc[i] * sup[i] * mb[i];
        }
    Tensor support = prompt.support;
    return make_result(std::move(out), {images, prompt.values, mask}, "apply_prompt",
                       [n, plane, support = std::move(support)](Node& self) {
                           Node& xn = *self.inputs[0];
                           Node& pn = *self.inputs[1];
                           Node& mn = *self.inputs[2];
                           auto g = self.grad.data();
                           auto sup = support.data();
                           if (xn.requires_grad) {
                               auto gx = xn.grad_buffer().data();
                               for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                           }
                           if (pn.requires_grad) {
                               auto gp = pn.grad_buffer().data();
                               auto m = mn.value.data();
                               for (std::size_t b = 0; b < n; ++b)
                                   for (std::size_t c = 0; c < 3; ++c) {
                                       const double* gr = g.data() + (b * 3 + c) * plane;
                                       const double* mb = m.data() + b * plane;
                                       double* gpc = gp.data() + c * plane;
                                       for (std::size_t i = 0; i < plane; ++i) gpc[i] += gr[i] * sup[i] * mb[i];
                                   }
                           }
                           if (mn.requires_grad) {
                               auto gm = mn.grad_buffer().data();
                               auto p = pn.value.data();
                               for (std::size_t b = 0; b < n; ++b)
                                   for (std::size_t c = 0; c < 3; ++c) {
                                       const double* gr = g.data() + (b * 3 + c) * plane;
                                       const double* pc = p.data() + c * plane;
                                       double* gmb = gm.data() + b * plane;
                                       for (std::size_t i = 0; i < plane; ++i) gmb[i] += gr[i] * pc[i] * sup[i];
                                   }
                           }
                       });
}

Tensor apply_prompt(const Tensor& image, const PromptTemplate& prompt, const Tensor& mask) {
    if (image.rank() != 3 || mask.rank() != 3) {
        throw ContractError("apply_prompt expects image 3×H×W and mask 1×H×W, got " + shape_str(image.shape()) +
                            " and " + shape_str(mask.shape()));
    }
    const Var x = constant(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}));
    const Var m = constant(mask.reshaped({1, mask.dim(0), mask.dim(1), mask.dim(2)}));
    return apply_prompt(x, prompt, m).value().reshaped(image.shape());
}

std::size_t count_prompt_params(std::size_t height, std::size_t width, std::size_t frame) {
    if (2 * frame >= std::min(height, width)) return 3 * height * width;
    return 3 * (height * width - (height - 2 * frame) * (width - 2 * frame));
}

}  // namespace avp
