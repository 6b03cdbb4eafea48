#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avp/tensor.hpp"

namespace avp {

struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

// Binary P5 with maxval 255.
void write_pgm(const std::string& path, const GrayImage& image);
GrayImage read_pgm(const std::string& path);

// Maps [lo, hi] affinely onto [0, 255], clamping outside values. plane is H×W or 1×H×W.
GrayImage to_gray_image(const Tensor& plane, double lo, double hi);

}  // namespace avp
