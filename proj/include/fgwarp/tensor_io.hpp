// T4v1 tensor container: ASCII magic "T4v1", four little-endian u32 dims
// (n, c, h, w), then n*c*h*w IEEE-754 doubles, little-endian, row-major with
// w fastest. Round-trips are bit-exact.
#pragma once

#include <filesystem>

#include "fgwarp/tensor.hpp"

namespace fgwarp {

std::vector<std::uint8_t> serialize_t4(const Tensor4& t);
Tensor4 deserialize_t4(const std::uint8_t* bytes, std::size_t size);

void write_t4(const std::filesystem::path& path, const Tensor4& t);
Tensor4 read_t4(const std::filesystem::path& path);

}  // namespace fgwarp
