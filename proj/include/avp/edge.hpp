#pragma once

#include <cstddef>

#include "avp/autograd.hpp"
#include "avp/tensor.hpp"

namespace avp {

// Normalized Laplacian response of one image, values in [-1, 1].
struct EdgeMap {
    Tensor values;  // 1×H×W
    std::size_t height = 0;
    std::size_t width = 0;
};

// Fixed 4-neighbourhood stencil [[0,1,0],[1,-4,1],[0,1,0]] as a 1×1×3×3 kernel.
const Tensor& laplacian_kernel();

// Divisor mapping raw responses into [-1, 1] (L1 norm of the stencil).
inline constexpr double kLaplacianScale = 8.0;

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// 3×H×W -> 1×H×W, or N×3×H×W -> N×1×H×W.
Tensor to_grayscale(const Tensor& image);

// Unnormalized stencil response through the frozen conv (padding 1).
// Accepts 1×H×W or N×1×H×W.
Tensor laplacian_response(const Tensor& gray);

EdgeMap laplacian_edge_map(const Tensor& gray);

// Batched form: N×1×H×W gray -> N×1×H×W normalized edge maps.
Tensor laplacian_edge_maps(const Tensor& gray_batch);

// Differentiable counterparts over N×3×H×W / N×1×H×W variables, used when
// gradients must reach the image itself.
Var grayscale(const Var& images);
Var laplacian_edges(const Var& gray);

}  // namespace avp
