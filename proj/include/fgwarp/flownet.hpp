// Raw optical flow (block matching or .flo files) and the 4-layer FlowCNN
// that refines it. Flow convention throughout the library: a field anchored
// at frame A warps frame B's content toward A, i.e. warp(features_B, flow)
// lines up with A. Functions taking two frames use (anchor, source) order.
#pragma once

#include <string>

#include "fgwarp/flowwarp.hpp"
#include "fgwarp/ops.hpp"
#include "fgwarp/rng.hpp"
#include "fgwarp/tensor.hpp"

namespace fgwarp {

// Exhaustive SAD block matching on grayscale (RGB mean). Blocks are anchored
// in `anchor`; each block scans displacements in [-search, search]^2 against
// `source` (out-of-bounds source pixels read as zero) and the winning integer
// displacement is written to every pixel of the block. Ties break toward the
// smaller SAD, then smaller |d|^2, then lexicographic (u, v).
FlowField estimate_flow_blockmatch(const Tensor4& anchor, const Tensor4& source, int block = 8,
                                   int search = 8);

// L1: 9->16 conv3x3 + BN + ReLU, L2: 16->16 conv3x3 + BN + ReLU,
// L3: 16->16 conv3x3, then concat(L3 out, raw flow) -> L4: 18->2 conv3x3.
// All stride 1, padding 1, so the refined flow keeps the input resolution.
struct FlowCnnParams {
    ConvParams l1, l2, l3, l4;
    ops::BatchNormParams bn1, bn2;
    FlowCnnParams();  // correct shapes, zero weights
};

// He-normal init for L1..L3; L4 starts as the identity on its two raw-flow
// skip channels (center taps 1, everything else 0) so the refined flow
// initially equals the raw flow. Draw order: L1, L2, L3 weights.
FlowCnnParams init_flowcnn_params(Rng& rng);

// gradients mirror the parameter layout (running stats unused)
struct FlowCnnGrads {
    FlowCnnParams params;
    FlowField raw_flow;
};

// intermediates retained by the training-mode forward for the backward pass
struct FlowCnnCache {
    Tensor4 input;    // 9-channel concat fed to L1
    Tensor4 b1, r1;   // bn1 output, relu1 output
    Tensor4 b2, r2;   // bn2 output, relu2 output
    Tensor4 cat;      // concat(L3 output, raw flow) fed to L4
    ops::BatchNormStats s1, s2;
};

// Input stacking: [raw u, raw v, anchor RGB, source RGB, mean |anchor-source|].
// Training-mode batch-norm statistics; pass a cache to enable backward.
// Running statistics are NOT updated here — callers do that explicitly via
// ops::update_running_stats so the forward stays pure.
FlowField flowcnn_forward(const FlowField& raw_flow, const Tensor4& frame_anchor,
                          const Tensor4& frame_source, const FlowCnnParams& p,
                          FlowCnnCache* cache = nullptr);

// inference-mode variant normalizing with the stored running statistics
FlowField flowcnn_infer(const FlowField& raw_flow, const Tensor4& frame_anchor,
                        const Tensor4& frame_source, const FlowCnnParams& p);

FlowCnnGrads flowcnn_backward(const FlowCnnCache& cache, const FlowCnnParams& p,
                              const FlowField& grad_refined);

// Middlebury .flo: f32 magic 202021.25, i32 width, i32 height, then
// row-major interleaved (u, v) f32 pairs; everything little-endian.
FlowField read_flo(const std::string& path);
void write_flo(const std::string& path, const FlowField& flow);  // batch size 1 only

}  // namespace fgwarp
