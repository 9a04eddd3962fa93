// 8-bit binary PNM image I/O: P6 (RGB) and P5 (grayscale). Tensors carry
// values in [0, 1]; writing rounds to the nearest of the 256 levels and
// reading maps byte k to k/maxval, so write -> read -> write round-trips
// byte-identically.
#pragma once

#include <filesystem>

#include "fgwarp/tensor.hpp"

namespace fgwarp {

// dispatches on the magic: P6 -> (1,3,h,w), P5 -> (1,1,h,w)
Tensor4 read_image(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const Tensor4& rgb);   // (1,3,h,w)
void write_pgm(const std::filesystem::path& path, const Tensor4& gray);  // (1,1,h,w)

}  // namespace fgwarp
