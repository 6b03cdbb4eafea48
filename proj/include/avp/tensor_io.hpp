#pragma once

#include <string>
#include <vector>

#include "avp/tensor.hpp"

namespace avp {

// "ATSR", u32 version 1, u8 dtype (0 = f64), u32 rank, rank × u64 extents,
// row-major f64 payload; little-endian throughout.
inline constexpr std::uint32_t kTensorFileVersion = 1;

std::vector<unsigned char> encode_tensor(const Tensor& t);
// Throws FormatError (with byte offset) on bad magic, version, dtype,
// truncation or trailing bytes. Never returns a partial tensor.
Tensor decode_tensor(std::vector<unsigned char> bytes);

void write_tensor(const Tensor& t, const std::string& path);
Tensor read_tensor(const std::string& path);

}  // namespace avp
