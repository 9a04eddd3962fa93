// Two-branch shadow detector: a three-stage shared-weight conv backbone per
// frame, flow-guided feature exchange after every stage in both directions,
// and a multi-scale decoder emitting a per-pixel shadow probability map.
//
// Fresh initialization (combine weights w1=1, w2=0, FlowCNN passthrough)
// makes the exchange a no-op: each branch of forward_pair is then
// bit-identical to forward_single on its frame.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "fgwarp/flownet.hpp"
#include "fgwarp/flowwarp.hpp"
#include "fgwarp/ops.hpp"
#include "fgwarp/rng.hpp"
#include "fgwarp/tensor.hpp"

namespace fgwarp {

struct BackboneConfig {
    int width_low = 8;    // stage 1 channels, input resolution / stride
    int width_mid = 16;   // stage 2 channels, / stride^2
    int width_high = 32;  // stage 3 channels, / stride^3
    int stage_stride = 2;

    void validate() const {
        require(width_low >= 1 && width_mid >= 1 && width_high >= 1,
                "BackboneConfig: widths must be >= 1");
        require(stage_stride >= 2, "BackboneConfig: each stage must downsample");
    }
    std::array<int, 3> widths() const { return {width_low, width_mid, width_high}; }
};

// one backbone stage: conv (stride s) + BN + ReLU, conv (stride 1) + BN + ReLU
struct StageParams {
    ConvParams conv_a, conv_b;
    ops::BatchNormParams bn_a, bn_b;
};

// upsample high to mid, concat, 3x3 conv + ReLU; upsample to low, concat,
// 3x3 conv + ReLU; upsample to frame resolution, 1x1 conv, sigmoid
struct DecoderParams {
    ConvParams fuse_mid;  // (high + mid) -> mid
    ConvParams fuse_low;  // (mid + low) -> low
    ConvParams head;      // low -> 1, 1x1
};

struct DetectorParams {
    BackboneConfig config;
    std::array<StageParams, 3> stages;         // shared by both branches
    std::array<CombineWeights, 3> comb_t;      // mixing warped t+k features into branch t
    std::array<CombineWeights, 3> comb_tk;     // mixing warped t features into branch t+k
    FlowCnnParams flowcnn;
    DecoderParams decoder;

    DetectorParams() : DetectorParams(BackboneConfig{}) {}
    explicit DetectorParams(const BackboneConfig& cfg);  // correct shapes, zero weights
};

// He-normal conv weights, zero biases, fresh BN, w1=1/w2=0 combine weights,
// FlowCNN passthrough. Draw order: stages 1-3 (conv_a then conv_b), decoder
// (fuse_mid, fuse_low, head), then the FlowCNN.
DetectorParams init_detector_params(const BackboneConfig& cfg, Rng& rng);

// flat named slices over every learnable array; `decay` marks the tensors
// weight decay applies to (conv weights and combine weights only)
struct ParamView {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
    bool decay = false;
};
std::vector<ParamView> param_views(DetectorParams& p);
// param_views plus BatchNorm running statistics (the full checkpoint state)
std::vector<ParamView> state_views(DetectorParams& p);

// same-layout container with every array zeroed, for gradient accumulation
DetectorParams zeros_like(const DetectorParams& p);

// gradients use the parameter layout (running stats stay zero and are unused)
using DetectorGrads = DetectorParams;

// ---- forward/backward caches ----------------------------------------------

struct StageCache {
    Tensor4 input;               // stage input (conv_a backward)
    ops::BatchNormStats sa, sb;  // batch statistics of bn_a / bn_b
    Tensor4 ba, ra, bb, tap;     // bn_a out, relu_a out, bn_b out, stage output
};

struct ExchangeCache {
    FlowField rflow;   // refined flow resized to the tap grid
    Tensor4 warped;    // warp(source tap, rflow); zeros when exchange is off
    Tensor4 combined;  // combine output = next stage / decoder input
};

struct DecoderCache {
    int high_h = 0, high_w = 0;  // resolution of the high-level input
    Tensor4 up_high, cat_mid, fm_pre, fm;
    Tensor4 up_mid, cat_low, fl_pre, fl;
    Tensor4 up_low, mask;
};

struct PairCache {
    bool valid = false;
    bool exchange = true;
    Shape4 frame_shape;
    FlowCnnCache fc_fwd, fc_bwd;
    FlowField refined_fwd, refined_bwd;
    std::array<StageCache, 3> stage_t, stage_tk;
    std::array<ExchangeCache, 3> ex_t, ex_tk;
    DecoderCache dec_t, dec_tk;
};

struct PairMasks {
    Tensor4 mask_t, mask_tk;
};

// ---- forward/backward -------------------------------------------------------

// Training-mode forward (batch-statistics BatchNorm). raw_flow_fwd is
// anchored at frame t+k (it warps frame t's content toward t+k) and
// raw_flow_bwd the reverse. With exchange=false the FlowCNN is skipped and
// zero tensors stand in for the warped features — the no-FGwarp baseline.
// BatchNorm running statistics are not touched; training code applies
// update_running_stats_from_cache explicitly after the forward.
PairMasks forward_pair(const Tensor4& frame_t, const Tensor4& frame_tk,
                       const FlowField& raw_flow_fwd, const FlowField& raw_flow_bwd,
                       const DetectorParams& params, PairCache* cache = nullptr,
                       bool exchange = true);

// inference-mode forward (running-statistics BatchNorm)
PairMasks forward_pair_infer(const Tensor4& frame_t, const Tensor4& frame_tk,
                             const FlowField& raw_flow_fwd, const FlowField& raw_flow_bwd,
                             const DetectorParams& params);

// single branch, no exchange, decoder on the branch's own taps
Tensor4 forward_single(const Tensor4& frame, const DetectorParams& params);
Tensor4 forward_single_infer(const Tensor4& frame, const DetectorParams& params);

// exact gradients for every parameter; both branches accumulate into the
// shared backbone, decoder, combine and FlowCNN parameters
DetectorGrads backward_pair(const PairCache& cache, const DetectorParams& params,
                            const Tensor4& grad_mask_t, const Tensor4& grad_mask_tk);

// fold the cached batch statistics into the running statistics, in a fixed
// documented order: FlowCNN fwd, FlowCNN bwd, stages 1-3 branch t (bn_a then
// bn_b), stages 1-3 branch t+k
void update_running_stats_from_cache(DetectorParams& params, const PairCache& cache);

// ---- checkpoints ------------------------------------------------------------

// Directory of T4v1 tensors, one per state view (vectors stored 1x1x1xN),
// plus manifest.txt recording the backbone config and the tensor names.
// Round trips are bit-exact.
void save_checkpoint(const std::string& dir, const DetectorParams& params);
DetectorParams load_checkpoint(const std::string& dir);

}  // namespace fgwarp
