#include "avp/edge.hpp"

#include "avp/errors.hpp"
#include "avp/ops.hpp"

namespace avp {

const Tensor& laplacian_kernel() {
    static const Tensor kernel({1, 1, 3, 3}, {0, 1, 0, 1, -4, 1, 0, 1, 0});
    return kernel;
}

Tensor to_grayscale(const Tensor& image) {
    const Shape& s = image.shape();
    const bool single = s.size() == 3;
    if (!(single || s.size() == 4) || s[single ? 0 : 1] != 3) {
        throw ContractError("to_grayscale expects 3×H×W or N×3×H×W, got " + shape_str(s));
    }
    const std::size_t n = single ? 1 : s[0];
    const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
    const std::size_t plane = h * w;
    Tensor out(single ? Shape{1, h, w} : Shape{n, 1, h, w});
    auto x = image.data();
    for (std::size_t b = 0; b < n; ++b) {
        const double* r = x.data() + b * 3 * plane;
        const double* g = r + plane;
        const double* bl = g + plane;
        double* o = out.data().data() + b * plane;
        for (std::size_t i = 0; i < plane; ++i) o[i] = kLumaR * r[i] + kLumaG * g[i] + kLumaB * bl[i];
    }
    return out;
}

Tensor laplacian_response(const Tensor& gray) {
    const Shape& s = gray.shape();
    const bool single = s.size() == 3;
    if (!(single || s.size() == 4) || s[single ? 0 : 1] != 1) {
        throw ContractError("laplacian edge map expects 1×H×W or N×1×H×W, got " + shape_str(s));
    }
    const Tensor batch = single ? gray.reshaped({1, 1, s[1], s[2]}) : gray;
    Tensor out = detail::conv2d_forward(batch, laplacian_kernel(), Tensor({1}, 0.0), {1, 1});
    return single ? out.reshaped(s) : out;
}

EdgeMap laplacian_edge_map(const Tensor& gray) {
    if (gray.rank() != 3) throw ContractError("laplacian_edge_map expects 1×H×W, got " + shape_str(gray.shape()));
    EdgeMap edge{laplacian_response(gray), gray.dim(1), gray.dim(2)};
    for (double& v : edge.values.data()) v /= kLaplacianScale;
    return edge;
}

Tensor laplacian_edge_maps(const Tensor& gray_batch) {
    if (gray_batch.rank() != 4) {
        throw ContractError("laplacian_edge_maps expects N×1×H×W, got " + shape_str(gray_batch.shape()));
    }
    Tensor out = laplacian_response(gray_batch);
    for (double& v : out.data()) v /= kLaplacianScale;
    return out;
}

Var grayscale(const Var& images) {
    static const Tensor luma({1, 3, 1, 1}, {kLumaR, kLumaG, kLumaB});
    return conv2d(images, constant(luma), constant(Tensor({1}, 0.0)));
}

Var laplacian_edges(const Var& gray) {
    const Var raw = conv2d(gray, constant(laplacian_kernel()), constant(Tensor({1}, 0.0)), {1, 1});
    return scale(raw, 1.0 / kLaplacianScale);
}

}  // namespace avp
