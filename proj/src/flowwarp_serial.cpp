#include <cmath>

#include "fgwarp/flowwarp.hpp"

// Nested-loop reference for the warp and combine kernels; arithmetic and
// per-element accumulation order match src/flowwarp.cpp exactly.

namespace fgwarp::serial {

Tensor4 warp(const Tensor4& features, const FlowField& flow) {
    require(flow.n() == features.n() && flow.h() == features.h() && flow.w() == features.w(),
            "warp: flow grid does not match features");
    const int N = features.n(), C = features.c(), H = features.h(), W = features.w();
    Tensor4 out(features.shape());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int py = 0; py < H; ++py)
                for (int px = 0; px < W; ++px) {
                    const double x = px + flow.u(n, py, px);
                    const double y = py + flow.v(n, py, px);
                    const double xf = std::floor(x), yf = std::floor(y);
                    const int x0 = int(xf), y0 = int(yf);
                    const double fx = x - xf, fy = y - yf;
                    double val;
                    if (fx == 0.0 && fy == 0.0) {
                        val = (x0 >= 0 && x0 < W && y0 >= 0 && y0 < H) ? features.at(n, c, y0, x0)
                                                                       : 0.0;
                    } else {
                        const int x1 = x0 + 1, y1 = y0 + 1;
                        double acc = 0.0;
                        if (y0 >= 0 && y0 < H && x0 >= 0 && x0 < W)
                            acc += (1.0 - fx) * (1.0 - fy) * features.at(n, c, y0, x0);
                        if (y0 >= 0 && y0 < H && x1 >= 0 && x1 < W)
                            acc += fx * (1.0 - fy) * features.at(n, c, y0, x1);
                        if (y1 >= 0 && y1 < H && x0 >= 0 && x0 < W)
                            acc += (1.0 - fx) * fy * features.at(n, c, y1, x0);
                        if (y1 >= 0 && y1 < H && x1 >= 0 && x1 < W)
                            acc += fx * fy * features.at(n, c, y1, x1);
                        val = acc;
                    }
                    out.at(n, c, py, px) = val;
                }
    return out;
}

WarpGrads warp_backward(const Tensor4& features, const FlowField& flow, const Tensor4& grad_out) {
    require(grad_out.same_shape(features), "warp_backward: grad shape mismatch");
    const int N = features.n(), C = features.c(), H = features.h(), W = features.w();
    WarpGrads g;
    g.features = Tensor4(features.shape());
    g.flow = FlowField(N, H, W);

    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int py = 0; py < H; ++py)
                for (int px = 0; px < W; ++px) {
                    const double x = px + flow.u(n, py, px);
                    const double y = py + flow.v(n, py, px);
                    const double xf = std::floor(x), yf = std::floor(y);
                    const int x0 = int(xf), y0 = int(yf), x1 = x0 + 1, y1 = y0 + 1;
                    const double fx = x - xf, fy = y - yf;
                    const double gv = grad_out.at(n, c, py, px);
                    if (y0 >= 0 && y0 < H && x0 >= 0 && x0 < W)
                        g.features.at(n, c, y0, x0) += (1.0 - fx) * (1.0 - fy) * gv;
                    if (y0 >= 0 && y0 < H && x1 >= 0 && x1 < W)
                        g.features.at(n, c, y0, x1) += fx * (1.0 - fy) * gv;
                    if (y1 >= 0 && y1 < H && x0 >= 0 && x0 < W)
                        g.features.at(n, c, y1, x0) += (1.0 - fx) * fy * gv;
                    if (y1 >= 0 && y1 < H && x1 >= 0 && x1 < W)
                        g.features.at(n, c, y1, x1) += fx * fy * gv;
                }

    for (int n = 0; n < N; ++n)
        for (int py = 0; py < H; ++py)
            for (int px = 0; px < W; ++px) {
                const double x = px + flow.u(n, py, px);
                const double y = py + flow.v(n, py, px);
                const double xf = std::floor(x), yf = std::floor(y);
                const int x0 = int(xf), y0 = int(yf), x1 = x0 + 1, y1 = y0 + 1;
                const double fx = x - xf, fy = y - yf;
                const bool ax = x0 >= 0 && x0 < W, bx = x1 >= 0 && x1 < W;
                const bool ay = y0 >= 0 && y0 < H, by = y1 >= 0 && y1 < H;
                double du = 0.0, dv = 0.0;
                for (int c = 0; c < C; ++c) {
                    const double f00 = (ay && ax) ? features.at(n, c, y0, x0) : 0.0;
                    const double f01 = (ay && bx) ? features.at(n, c, y0, x1) : 0.0;
                    const double f10 = (by && ax) ? features.at(n, c, y1, x0) : 0.0;
                    const double f11 = (by && bx) ? features.at(n, c, y1, x1) : 0.0;
                    const double gv = grad_out.at(n, c, py, px);
                    du += gv * ((1.0 - fy) * (f01 - f00) + fy * (f11 - f10));
                    dv += gv * ((1.0 - fx) * (f10 - f00) + fx * (f11 - f01));
                }
                g.flow.u(n, py, px) = du;
                g.flow.v(n, py, px) = dv;
            }
    return g;
}

Tensor4 combine(const Tensor4& f_self, const Tensor4& f_warped, const CombineWeights& w) {
    require(f_self.same_shape(f_warped), "combine: feature shapes differ");
    require(w.channels() == f_self.c(), "combine: weight length != channels");
    Tensor4 out(f_self.shape());
    for (int n = 0; n < f_self.n(); ++n)
        for (int c = 0; c < f_self.c(); ++c)
            for (int y = 0; y < f_self.h(); ++y)
                for (int x = 0; x < f_self.w(); ++x)
                    out.at(n, c, y, x) = w.w1[std::size_t(c)] * f_self.at(n, c, y, x) +
                                         w.w2[std::size_t(c)] * f_warped.at(n, c, y, x);
    return out;
}

CombineGrads combine_backward(const Tensor4& f_self, const Tensor4& f_warped,
                              const CombineWeights& w, const Tensor4& grad_out) {
    require(f_self.same_shape(f_warped) && grad_out.same_shape(f_self),
            "combine_backward: shape mismatch");
    require(w.channels() == f_self.c(), "combine_backward: weight length != channels");
    CombineGrads g;
    g.self = Tensor4(f_self.shape());
    g.warped = Tensor4(f_self.shape());
    g.w1.assign(std::size_t(f_self.c()), 0.0);
    g.w2.assign(std::size_t(f_self.c()), 0.0);
    for (int c = 0; c < f_self.c(); ++c) {
        double s1 = 0.0, s2 = 0.0;
        for (int n = 0; n < f_self.n(); ++n)
            for (int y = 0; y < f_self.h(); ++y)
                for (int x = 0; x < f_self.w(); ++x) {
                    const double gv = grad_out.at(n, c, y, x);
                    g.self.at(n, c, y, x) = w.w1[std::size_t(c)] * gv;
                    g.warped.at(n, c, y, x) = w.w2[std::size_t(c)] * gv;
                    s1 += f_self.at(n, c, y, x) * gv;
                    s2 += f_warped.at(n, c, y, x) * gv;
                }
        g.w1[std::size_t(c)] = s1;
        g.w2[std::size_t(c)] = s2;
    }
    return g;
}

}  // namespace fgwarp::serial
