#pragma once

#include <cstddef>
#include <cstdint>

#include "avp/autograd.hpp"

namespace avp {

// Image-sized learnable prompt restricted to a border frame of single-side width w.
struct PromptTemplate {
    Var values;      // 3×H×W, trainable
    Tensor support;  // 1×H×W, 1 on the frame
    std::size_t width = 0;
};

// support[i,j] = 1 iff min(i, j, H−1−i, W−1−j) < w.
Tensor frame_support(std::size_t height, std::size_t width, std::size_t frame);

// Values drawn i.i.d. normal(0, 0.03).
PromptTemplate make_prompt_template(std::size_t height, std::size_t width, std::size_t frame, std::uint64_t seed);

inline constexpr double kPromptInitStd = 0.03;

// x̂ = x + values ⊙ support ⊙ mask, no clamping.
// Batched: x N×3×H×W, mask N×1×H×W.
Var apply_prompt(const Var& images, const PromptTemplate& prompt, const Var& mask);
// Single image: x 3×H×W, mask 1×H×W.
Tensor apply_prompt(const Tensor& image, const PromptTemplate& prompt, const Tensor& mask);

// 3 · |support|
std::size_t count_prompt_params(std::size_t height, std::size_t width, std::size_t frame);

}  // namespace avp
