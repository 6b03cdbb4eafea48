#include "avp/pgm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "avp/errors.hpp"

namespace avp {

void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (!in || magic != "P5" || maxval != 255 || w == 0 || h == 0) {
        throw FormatError("not an 8-bit binary PGM: '" + path + "'", 0);
    }
    in.get();
    const auto header = static_cast<std::uint64_t>(in.tellg());
    GrayImage img{h, w, std::vector<std::uint8_t>(w * h)};
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
        throw FormatError("truncated PGM payload in '" + path + "'", header + static_cast<std::uint64_t>(in.gcount()));
    }
    return img;
}

GrayImage to_gray_image(const Tensor& plane, double lo, double hi) {
    const Shape& s = plane.shape();
    const bool leading_one = s.size() == 3 && s[0] == 1;
    if (!(s.size() == 2 || leading_one)) throw ContractError("to_gray_image expects H×W or 1×H×W, got " + shape_str(s));
    const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
    GrayImage img{h, w, std::vector<std::uint8_t>(h * w)};
    for (std::size_t i = 0; i < h * w; ++i) {
        double v = (plane[i] - lo) / (hi - lo);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return img;
}

}  // namespace avp
