// Flow-guided feature warping: differentiable bilinear warp, flow-field
// resizing with magnitude rescaling, and the learned per-channel combination
// of self and warped features. warp() uses gather semantics: output(p) =
// bilinear sample of the source at p + flow(p), with out-of-bounds corners
// contributing zero.
#pragma once

#include "fgwarp/ops.hpp"
#include "fgwarp/tensor.hpp"

namespace fgwarp {

// (n, 2, h, w); channel 0 = u (horizontal offset), channel 1 = v (vertical)
struct FlowField {
    Tensor4 t;

    FlowField() = default;
    FlowField(int n, int h, int w) : t(n, 2, h, w) {}
    explicit FlowField(Tensor4 raw) : t(std::move(raw)) {
        require(t.c() == 2, "FlowField: expected 2 channels, got " + t.shape().str());
    }

    int n() const { return t.n(); }
    int h() const { return t.h(); }
    int w() const { return t.w(); }
    double& u(int n, int y, int x) { return t.at(n, 0, y, x); }
    double u(int n, int y, int x) const { return t.at(n, 0, y, x); }
    double& v(int n, int y, int x) { return t.at(n, 1, y, x); }
    double v(int n, int y, int x) const { return t.at(n, 1, y, x); }
};

// per-channel mixing weights; fresh state keeps the self features untouched
// (w1 all ones) and mutes the warped branch (w2 all zeros)
struct CombineWeights {
    std::vector<double> w1, w2;
    explicit CombineWeights(int channels = 0)
        : w1(std::size_t(channels), 1.0), w2(std::size_t(channels), 0.0) {}
    int channels() const { return int(w1.size()); }
};

struct WarpGrads {
    Tensor4 features;
    FlowField flow;
};

struct CombineGrads {
    Tensor4 self, warped;
    std::vector<double> w1, w2;
};

Tensor4 warp(const Tensor4& features, const FlowField& flow);
WarpGrads warp_backward(const Tensor4& features, const FlowField& flow, const Tensor4& grad_out);

// bilinear resize of both channels plus rescaling of the offsets themselves:
// u by out_w/in_w, v by out_h/in_h
FlowField resize_flow(const FlowField& flow, int out_h, int out_w);
FlowField resize_flow_backward(const FlowField& grad_out, int in_h, int in_w);

Tensor4 combine(const Tensor4& f_self, const Tensor4& f_warped, const CombineWeights& w);
CombineGrads combine_backward(const Tensor4& f_self, const Tensor4& f_warped,
                              const CombineWeights& w, const Tensor4& grad_out);

// composite used at each exchange site: resize the flow to the feature grid,
// warp the source branch's features onto it, mix with the self features
Tensor4 fgwarp_forward(const Tensor4& f_self, const Tensor4& f_source, const FlowField& flow,
                       const CombineWeights& w);

namespace serial {

Tensor4 warp(const Tensor4& features, const FlowField& flow);
WarpGrads warp_backward(const Tensor4& features, const FlowField& flow, const Tensor4& grad_out);
Tensor4 combine(const Tensor4& f_self, const Tensor4& f_warped, const CombineWeights& w);
CombineGrads combine_backward(const Tensor4& f_self, const Tensor4& f_warped,
                              const CombineWeights& w, const Tensor4& grad_out);

}  // namespace serial

}  // namespace fgwarp
