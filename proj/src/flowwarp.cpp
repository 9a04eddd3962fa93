#include "fgwarp/flowwarp.hpp"

#include <cmath>

namespace fgwarp {

static void check_warp_args(const Tensor4& f, const FlowField& flow) {
    require(flow.n() == f.n() && flow.h() == f.h() && flow.w() == f.w(),
            "warp: flow grid " + flow.t.shape().str() + " does not match features " +
                f.shape().str());
}

// sample geometry for one output pixel
struct Corner {
    int x0, y0;
    double fx, fy;
};
static inline Corner sample_at(int px, int py, double u, double v) {
    const double x = px + u;
    const double y = py + v;
    const double xf = std::floor(x);
    const double yf = std::floor(y);
    return Corner{int(xf), int(yf), x - xf, y - yf};
}

Tensor4 warp(const Tensor4& features, const FlowField& flow) {
    check_warp_args(features, flow);
    const int N = features.n(), C = features.c(), H = features.h(), W = features.w();
    Tensor4 out(features.shape());
    const std::int64_t planes = std::int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (std::int64_t nc = 0; nc < planes; ++nc) {
        const int n = int(nc / C);
        const double* fp = features.data() + std::size_t(nc) * (std::size_t(H) * W);
        double* op = out.data() + std::size_t(nc) * (std::size_t(H) * W);
        for (int py = 0; py < H; ++py) {
            for (int px = 0; px < W; ++px) {
                const Corner s = sample_at(px, py, flow.u(n, py, px), flow.v(n, py, px));
                double val;
                if (s.fx == 0.0 && s.fy == 0.0) {
                    // integer sample position: exact copy (or zero outside)
                    val = (s.x0 >= 0 && s.x0 < W && s.y0 >= 0 && s.y0 < H)
                              ? fp[std::size_t(s.y0) * W + s.x0]
                              : 0.0;
                } else {
                    const int x1 = s.x0 + 1, y1 = s.y0 + 1;
                    const bool ax = s.x0 >= 0 && s.x0 < W, bx = x1 >= 0 && x1 < W;
                    const bool ay = s.y0 >= 0 && s.y0 < H, by = y1 >= 0 && y1 < H;
                    double acc = 0.0;
                    if (ay && ax) acc += (1.0 - s.fx) * (1.0 - s.fy) * fp[std::size_t(s.y0) * W + s.x0];
                    if (ay && bx) acc += s.fx * (1.0 - s.fy) * fp[std::size_t(s.y0) * W + x1];
                    if (by && ax) acc += (1.0 - s.fx) * s.fy * fp[std::size_t(y1) * W + s.x0];
                    if (by && bx) acc += s.fx * s.fy * fp[std::size_t(y1) * W + x1];
                    val = acc;
                }
                op[std::size_t(py) * W + px] = val;
            }
        }
    }
    return out;
}

WarpGrads warp_backward(const Tensor4& features, const FlowField& flow, const Tensor4& grad_out) {
    check_warp_args(features, flow);
    require(grad_out.same_shape(features), "warp_backward: grad shape " +
                                               grad_out.shape().str() + " != features " +
                                               features.shape().str());
    const int N = features.n(), C = features.c(), H = features.h(), W = features.w();
    WarpGrads g;
    g.features = Tensor4(features.shape());
    g.flow = FlowField(N, H, W);

    // scatter into the feature gradient; each (n, c) slice is owned by one
    // iteration so the parallel scatter stays deterministic
    const std::int64_t planes = std::int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (std::int64_t nc = 0; nc < planes; ++nc) {
        const int n = int(nc / C);
        double* gf = g.features.data() + std::size_t(nc) * (std::size_t(H) * W);
        const double* gp = grad_out.data() + std::size_t(nc) * (std::size_t(H) * W);
        for (int py = 0; py < H; ++py) {
            for (int px = 0; px < W; ++px) {
                const Corner s = sample_at(px, py, flow.u(n, py, px), flow.v(n, py, px));
                const double gv = gp[std::size_t(py) * W + px];
                const int x1 = s.x0 + 1, y1 = s.y0 + 1;
                const bool ax = s.x0 >= 0 && s.x0 < W, bx = x1 >= 0 && x1 < W;
                const bool ay = s.y0 >= 0 && s.y0 < H, by = y1 >= 0 && y1 < H;
                if (ay && ax) gf[std::size_t(s.y0) * W + s.x0] += (1.0 - s.fx) * (1.0 - s.fy) * gv;
                if (ay && bx) gf[std::size_t(s.y0) * W + x1] += s.fx * (1.0 - s.fy) * gv;
                if (by && ax) gf[std::size_t(y1) * W + s.x0] += (1.0 - s.fx) * s.fy * gv;
                if (by && bx) gf[std::size_t(y1) * W + x1] += s.fx * s.fy * gv;
            }
        }
    }

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n) {
        for (int py = 0; py < H; ++py) {
            for (int px = 0; px < W; ++px) {
                const Corner s = sample_at(px, py, flow.u(n, py, px), flow.v(n, py, px));
                const int x1 = s.x0 + 1, y1 = s.y0 + 1;
                const bool ax = s.x0 >= 0 && s.x0 < W, bx = x1 >= 0 && x1 < W;
                const bool ay = s.y0 >= 0 && s.y0 < H, by = y1 >= 0 && y1 < H;
                double du = 0.0, dv = 0.0;
                for (int c = 0; c < C; ++c) {
                    const double* fp = features.data() + features.plane(n, c);
                    const double f00 = (ay && ax) ? fp[std::size_t(s.y0) * W + s.x0] : 0.0;
                    const double f01 = (ay && bx) ? fp[std::size_t(s.y0) * W + x1] : 0.0;
                    const double f10 = (by && ax) ? fp[std::size_t(y1) * W + s.x0] : 0.0;
                    const double f11 = (by && bx) ? fp[std::size_t(y1) * W + x1] : 0.0;
                    const double gv = grad_out.at(n, c, py, px);
                    du += gv * ((1.0 - s.fy) * (f01 - f00) + s.fy * (f11 - f10));
                    dv += gv * ((1.0 - s.fx) * (f10 - f00) + s.fx * (f11 - f01));
                }
                g.flow.u(n, py, px) = du;
                g.flow.v(n, py, px) = dv;
            }
        }
    }
    return g;
}

FlowField resize_flow(const FlowField& flow, int out_h, int out_w) {
    FlowField out(ops::resize_bilinear(flow.t, out_h, out_w));
    const double su = double(out_w) / double(flow.w());
    const double sv = double(out_h) / double(flow.h());
    const std::size_t plane = std::size_t(out_h) * out_w;
    for (int n = 0; n < out.n(); ++n) {
        double* up = out.t.data() + out.t.plane(n, 0);
        double* vp = out.t.data() + out.t.plane(n, 1);
        for (std::size_t i = 0; i < plane; ++i) up[i] *= su;
        for (std::size_t i = 0; i < plane; ++i) vp[i] *= sv;
    }
    return out;
}

FlowField resize_flow_backward(const FlowField& grad_out, int in_h, int in_w) {
    // forward was out = scale * resize(in); the scale commutes with resize
    Tensor4 scaled = grad_out.t;
    const double su = double(grad_out.w()) / double(in_w);
    const double sv = double(grad_out.h()) / double(in_h);
    const std::size_t plane = std::size_t(grad_out.h()) * grad_out.w();
    for (int n = 0; n < scaled.n(); ++n) {
        double* up = scaled.data() + scaled.plane(n, 0);
        double* vp = scaled.data() + scaled.plane(n, 1);
        for (std::size_t i = 0; i < plane; ++i) up[i] *= su;
        for (std::size_t i = 0; i < plane; ++i) vp[i] *= sv;
    }
    return FlowField(ops::resize_bilinear_backward(scaled, in_h, in_w));
}

static void check_combine_args(const Tensor4& a, const Tensor4& b, const CombineWeights& w) {
    require(a.same_shape(b), "combine: feature shapes differ, " + a.shape().str() + " vs " +
                                 b.shape().str());
    require(w.channels() == a.c(), "combine: weight length " + std::to_string(w.channels()) +
                                       " != channels " + std::to_string(a.c()));
}

Tensor4 combine(const Tensor4& f_self, const Tensor4& f_warped, const CombineWeights& w) {
    check_combine_args(f_self, f_warped, w);
    const int N = f_self.n(), C = f_self.c();
    const std::size_t plane = std::size_t(f_self.h()) * f_self.w();
    Tensor4 out(f_self.shape());
    const std::int64_t planes = std::int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (std::int64_t nc = 0; nc < planes; ++nc) {
        const int c = int(nc % C);
        const double a = w.w1[std::size_t(c)], b = w.w2[std::size_t(c)];
        const double* sp = f_self.data() + std::size_t(nc) * plane;
        const double* wp = f_warped.data() + std::size_t(nc) * plane;
        double* op = out.data() + std::size_t(nc) * plane;
        for (std::size_t i = 0; i < plane; ++i) op[i] = a * sp[i] + b * wp[i];
    }
    return out;
}

CombineGrads combine_backward(const Tensor4& f_self, const Tensor4& f_warped,
                              const CombineWeights& w, const Tensor4& grad_out) {
    check_combine_args(f_self, f_warped, w);
    require(grad_out.same_shape(f_self), "combine_backward: grad shape mismatch");
    const int N = f_self.n(), C = f_self.c();
    const std::size_t plane = std::size_t(f_self.h()) * f_self.w();

    CombineGrads g;
    g.self = Tensor4(f_self.shape());
    g.warped = Tensor4(f_self.shape());
    g.w1.assign(std::size_t(C), 0.0);
    g.w2.assign(std::size_t(C), 0.0);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const double a = w.w1[std::size_t(c)], b = w.w2[std::size_t(c)];
        double s1 = 0.0, s2 = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* sp = f_self.data() + f_self.plane(n, c);
            const double* wp = f_warped.data() + f_warped.plane(n, c);
            const double* gp = grad_out.data() + grad_out.plane(n, c);
            double* gs = g.self.data() + g.self.plane(n, c);
            double* gw = g.warped.data() + g.warped.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                gs[i] = a * gp[i];
                gw[i] = b * gp[i];
                s1 += sp[i] * gp[i];
                s2 += wp[i] * gp[i];
            }
        }
        g.w1[std::size_t(c)] = s1;
        g.w2[std::size_t(c)] = s2;
    }
    return g;
}

Tensor4 fgwarp_forward(const Tensor4& f_self, const Tensor4& f_source, const FlowField& flow,
                       const CombineWeights& w) {
    require(f_self.same_shape(f_source), "fgwarp: self/source feature shapes differ");
    FlowField local = resize_flow(flow, f_self.h(), f_self.w());
    return combine(f_self, warp(f_source, local), w);
}

}  // namespace fgwarp
