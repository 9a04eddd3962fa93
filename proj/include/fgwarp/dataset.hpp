// On-disk dataset layout shared by the generator, trainer, and evaluator:
//
//   <root>/<video>/frames/0000.ppm   8-bit RGB frames
//   <root>/<video>/masks/0000.pgm    8-bit binary shadow masks
//   <root>/<video>/flow/0000.flo     flow for the pair (t, t+1), optional
//   <root>/manifest.txt              audit record, written last
//
// The reader scans directories (the manifest is not required), so any real
// dataset arranged the same way mounts without code changes. flow/NNNN.flo
// holds the field on frame t+1's grid; when the directory is absent the
// consumers fall back to block matching.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fgwarp/flowwarp.hpp"
#include "fgwarp/synthdata.hpp"
#include "fgwarp/tensor.hpp"

namespace fgwarp {

struct VideoData {
    std::string name;
    std::vector<Tensor4> frames;   // (1,3,h,w)
    std::vector<Tensor4> masks;    // (1,1,h,w)
    std::vector<FlowField> flows;  // size frames-1, or empty when not stored
};

struct Dataset {
    std::vector<VideoData> videos;
};

// writes the layout above plus a manifest recording frame counts, dimensions,
// and the first frame's shadow coverage; returns the manifest path
std::filesystem::path write_dataset(const std::vector<std::string>& names,
                                    const std::vector<RenderedVideo>& videos,
                                    const std::filesystem::path& root);

// eager-loads every video under root (desk-scale datasets fit in memory)
Dataset load_dataset(const std::filesystem::path& root);

}  // namespace fgwarp
