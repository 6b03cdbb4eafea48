#include "avp/tensor_io.hpp"

#include "avp/errors.hpp"
#include "byte_io.hpp"

namespace avp {

std::vector<unsigned char> encode_tensor(const Tensor& t) {
    detail::ByteWriter w;
    w.text("ATSR");
    w.u32(kTensorFileVersion);
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u64(e);
    w.f64s(t.data().data(), t.numel());
    return w.buffer();
}

Tensor decode_tensor(std::vector<unsigned char> bytes) {
    detail::ByteReader r(std::move(bytes));
    if (r.text(4, "magic") != "ATSR") throw FormatError("bad tensor file magic", 0);
    const std::uint32_t version = r.u32("version");
    if (version != kTensorFileVersion) {
        throw FormatError("unsupported tensor file version " + std::to_string(version), 4);
    }
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype != 0) throw FormatError("unsupported dtype tag " + std::to_string(dtype), 8);
    const std::uint32_t rank = r.u32("rank");
    Shape shape(rank);
    for (auto& e : shape) {
        e = r.u64("extent");
        if (e == 0) throw FormatError("zero extent", r.offset() - 8);
    }
    const std::size_t n = shape_numel(shape);
    const std::size_t payload_start = r.offset();
    if (r.remaining() != n * sizeof(double)) {
        throw FormatError("payload of " + std::to_string(r.remaining()) + " bytes does not match extents " +
                              shape_str(shape),
                          payload_start);
    }
    std::vector<double> data(n);
    r.read(data.data(), n * sizeof(double), "payload");
    return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const Tensor& t, const std::string& path) { detail::write_file(path, encode_tensor(t)); }

Tensor read_tensor(const std::string& path) { return decode_tensor(detail::read_file(path)); }

}  // namespace avp
