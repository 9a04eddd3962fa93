#include "fgwarp/ops.hpp"

#include <cmath>

// Production kernels. Parallel loops run over independent output elements and
// every per-element accumulation keeps a fixed order, so outputs match the
// serial reference bit-for-bit at any thread count.

namespace fgwarp::ops {

Shape4 conv2d_out_shape(const Shape4& in, const ConvParams& p) {
    p.validate();
    require(in.c == p.in_channels(), "conv2d: input channels " + std::to_string(in.c) +
                                         " != kernel in channels " +
                                         std::to_string(p.in_channels()));
    int kh = p.weight.h(), kw = p.weight.w();
    require(in.h + 2 * p.pad >= kh && in.w + 2 * p.pad >= kw,
            "conv2d: kernel " + p.weight.shape().str() + " larger than padded input " + in.str());
    int oh = (in.h + 2 * p.pad - kh) / p.stride + 1;
    int ow = (in.w + 2 * p.pad - kw) / p.stride + 1;
    return Shape4{in.n, p.out_channels(), oh, ow};
}

Tensor4 conv2d_forward(const Tensor4& input, const ConvParams& p) {
    const Shape4 os = conv2d_out_shape(input.shape(), p);
    Tensor4 out(os);
    const int N = os.n, OC = os.c, OH = os.h, OW = os.w;
    const int IC = input.c(), IH = input.h(), IW = input.w();
    const int KH = p.weight.h(), KW = p.weight.w(), S = p.stride, P = p.pad;

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n) {
        for (int oc = 0; oc < OC; ++oc) {
            double* outp = out.data() + out.plane(n, oc);
            const double bias = p.bias[std::size_t(oc)];
            for (int i = 0; i < OH * OW; ++i) outp[i] = bias;
            for (int ic = 0; ic < IC; ++ic) {
                const double* inp = input.data() + input.plane(n, ic);
                const double* wt = p.weight.data() + p.weight.plane(oc, ic);
                for (int kh = 0; kh < KH; ++kh) {
                    for (int kw = 0; kw < KW; ++kw) {
                        const double w = wt[kh * KW + kw];
                        int lo = P - kw > 0 ? (P - kw + S - 1) / S : 0;
                        int hi = IW + P - kw;
                        hi = hi > 0 ? (hi + S - 1) / S : 0;
                        if (hi > OW) hi = OW;
                        for (int oh = 0; oh < OH; ++oh) {
                            const int ih = oh * S - P + kh;
                            if (ih < 0 || ih >= IH) continue;
                            const double* irow = inp + std::size_t(ih) * IW;
                            double* orow = outp + std::size_t(oh) * OW;
                            if (S == 1) {
                                const double* ir = irow + (kw - P) + lo;
                                double* orw = orow + lo;
                                const int len = hi - lo;
                                for (int i = 0; i < len; ++i) orw[i] += w * ir[i];
                            } else {
                                for (int ow = lo; ow < hi; ++ow)
                                    orow[ow] += w * irow[ow * S + kw - P];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor4& input, const ConvParams& p, const Tensor4& grad_out,
                          bool want_input_grad) {
    const Shape4 os = conv2d_out_shape(input.shape(), p);
    require(grad_out.shape() == os, "conv2d_backward: grad shape " + grad_out.shape().str() +
                                        " != output shape " + os.str());
    const int N = os.n, OC = os.c, OH = os.h, OW = os.w;
    const int IC = input.c(), IH = input.h(), IW = input.w();
    const int KH = p.weight.h(), KW = p.weight.w(), S = p.stride, P = p.pad;

    ConvGrads g;
    g.weight = Tensor4(p.weight.shape());
    g.bias.assign(std::size_t(OC), 0.0);

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* gp = grad_out.data() + grad_out.plane(n, oc);
            for (int i = 0; i < OH * OW; ++i) acc += gp[i];
        }
        g.bias[std::size_t(oc)] = acc;
    }

#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        for (int ic = 0; ic < IC; ++ic) {
            double* wt = g.weight.data() + g.weight.plane(oc, ic);
            for (int kh = 0; kh < KH; ++kh) {
                for (int kw = 0; kw < KW; ++kw) {
                    int lo = P - kw > 0 ? (P - kw + S - 1) / S : 0;
                    int hi = IW + P - kw;
                    hi = hi > 0 ? (hi + S - 1) / S : 0;
                    if (hi > OW) hi = OW;
                    double acc = 0.0;
                    for (int n = 0; n < N; ++n) {
                        const double* gp = grad_out.data() + grad_out.plane(n, oc);
                        const double* inp = input.data() + input.plane(n, ic);
                        for (int oh = 0; oh < OH; ++oh) {
                            const int ih = oh * S - P + kh;
                            if (ih < 0 || ih >= IH) continue;
                            const double* grow = gp + std::size_t(oh) * OW;
                            const double* irow = inp + std::size_t(ih) * IW;
                            if (S == 1) {
                                const double* ir = irow + (kw - P) + lo;
                                const double* gr = grow + lo;
                                const int len = hi - lo;
                                for (int i = 0; i < len; ++i) acc += gr[i] * ir[i];
                            } else {
                                for (int ow = lo; ow < hi; ++ow)
                                    acc += grow[ow] * irow[ow * S + kw - P];
                            }
                        }
                    }
                    wt[kh * KW + kw] = acc;
                }
            }
        }
    }

    if (want_input_grad) {
        g.input = Tensor4(input.shape());
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < N; ++n) {
            for (int ic = 0; ic < IC; ++ic) {
                double* gin = g.input.data() + g.input.plane(n, ic);
                if (S == 1) {
                    // row-shifted accumulation; per-element term order (oc, kh, kw)
                    for (int oc = 0; oc < OC; ++oc) {
                        const double* gp = grad_out.data() + grad_out.plane(n, oc);
                        const double* wt = p.weight.data() + p.weight.plane(oc, ic);
                        for (int kh = 0; kh < KH; ++kh) {
                            for (int kw = 0; kw < KW; ++kw) {
                                const double w = wt[kh * KW + kw];
                                for (int ih = 0; ih < IH; ++ih) {
                                    const int oh = ih + P - kh;
                                    if (oh < 0 || oh >= OH) continue;
                                    // ow = iw + P - kw must land in [0, OW)
                                    int lo = kw - P > 0 ? kw - P : 0;
                                    int hi = OW + kw - P;
                                    if (hi > IW) hi = IW;
                                    const double* grow =
                                        gp + std::size_t(oh) * OW + (P - kw) + lo;
                                    double* grin = gin + std::size_t(ih) * IW + lo;
                                    const int len = hi - lo;
                                    for (int i = 0; i < len; ++i) grin[i] += w * grow[i];
                                }
                            }
                        }
                    }
                } else {
                    for (int ih = 0; ih < IH; ++ih) {
                        for (int iw = 0; iw < IW; ++iw) {
                            double acc = 0.0;
                            for (int oc = 0; oc < OC; ++oc) {
                                const double* gp = grad_out.data() + grad_out.plane(n, oc);
                                const double* wt = p.weight.data() + p.weight.plane(oc, ic);
                                for (int kh = 0; kh < KH; ++kh) {
                                    const int ty = ih + P - kh;
                                    if (ty < 0 || ty % S != 0) continue;
                                    const int oh = ty / S;
                                    if (oh >= OH) continue;
                                    for (int kw = 0; kw < KW; ++kw) {
                                        const int tx = iw + P - kw;
                                        if (tx < 0 || tx % S != 0) continue;
                                        const int ow = tx / S;
                                        if (ow >= OW) continue;
                                        acc += gp[std::size_t(oh) * OW + ow] * wt[kh * KW + kw];
                                    }
                                }
                            }
                            gin[std::size_t(ih) * IW + iw] = acc;
                        }
                    }
                }
            }
        }
    }
    return g;
}

Tensor4 relu_forward(const Tensor4& x) {
    Tensor4 y(x.shape());
    const std::int64_t total = std::int64_t(x.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i) y.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    return y;
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out) {
    require(x.same_shape(grad_out), "relu_backward: shape mismatch " + x.shape().str() + " vs " +
                                        grad_out.shape().str());
    Tensor4 g(x.shape());
    const std::int64_t total = std::int64_t(x.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i)
        g.data()[i] = x.data()[i] > 0.0 ? grad_out.data()[i] : 0.0;
    return g;
}

static inline double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor4 sigmoid_forward(const Tensor4& x) {
    Tensor4 y(x.shape());
    const std::int64_t total = std::int64_t(x.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i) y.data()[i] = sigmoid_scalar(x.data()[i]);
    return y;
}

Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out) {
    require(y.same_shape(grad_out), "sigmoid_backward: shape mismatch");
    Tensor4 g(y.shape());
    const std::int64_t total = std::int64_t(y.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i)
        g.data()[i] = grad_out.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
    return g;
}

static void check_bn_args(const Tensor4& x, std::size_t gamma_n, std::size_t beta_n) {
    require(gamma_n == std::size_t(x.c()) && beta_n == std::size_t(x.c()),
            "batchnorm: gamma/beta length != channels " + std::to_string(x.c()));
}

Tensor4 batchnorm_forward(const Tensor4& x, const std::vector<double>& gamma,
                          const std::vector<double>& beta, double eps, BatchNormStats* saved) {
    check_bn_args(x, gamma.size(), beta.size());
    const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
    const std::size_t plane = std::size_t(H) * W;
    const double cnt = double(N) * plane;

    Tensor4 y(x.shape());
    std::vector<double> mean(C), var(C), inv_std(C);
    Tensor4 xhat(x.shape());

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        double sum = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* xp = x.data() + x.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) sum += xp[i];
        }
        const double mu = sum / cnt;
        double sq = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* xp = x.data() + x.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = xp[i] - mu;
                sq += d * d;
            }
        }
        const double v = sq / cnt;
        const double istd = 1.0 / std::sqrt(v + eps);
        mean[c] = mu;
        var[c] = v;
        inv_std[c] = istd;
        const double gc = gamma[std::size_t(c)], bc = beta[std::size_t(c)];
        for (int n = 0; n < N; ++n) {
            const double* xp = x.data() + x.plane(n, c);
            double* xh = xhat.data() + xhat.plane(n, c);
            double* yp = y.data() + y.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                const double h = (xp[i] - mu) * istd;
                xh[i] = h;
                yp[i] = gc * h + bc;
            }
        }
    }
    if (saved) {
        saved->mean = std::move(mean);
        saved->var = std::move(var);
        saved->inv_std = std::move(inv_std);
        saved->xhat = std::move(xhat);
    }
    return y;
}

Tensor4 batchnorm_infer(const Tensor4& x, const BatchNormParams& p, double eps) {
    check_bn_args(x, p.gamma.size(), p.beta.size());
    const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
    const std::size_t plane = std::size_t(H) * W;
    Tensor4 y(x.shape());
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const double istd = 1.0 / std::sqrt(p.running_var[std::size_t(c)] + eps);
        const double mu = p.running_mean[std::size_t(c)];
        const double gc = p.gamma[std::size_t(c)], bc = p.beta[std::size_t(c)];
        for (int n = 0; n < N; ++n) {
            const double* xp = x.data() + x.plane(n, c);
            double* yp = y.data() + y.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) yp[i] = gc * (xp[i] - mu) * istd + bc;
        }
    }
    return y;
}

BatchNormGrads batchnorm_backward(const Tensor4& grad_out, const BatchNormStats& saved,
                                  const std::vector<double>& gamma) {
    require(grad_out.same_shape(saved.xhat), "batchnorm_backward: stale or mismatched stats (" +
                                                 grad_out.shape().str() + " vs " +
                                                 saved.xhat.shape().str() + ")");
    check_bn_args(grad_out, gamma.size(), gamma.size());
    const int N = grad_out.n(), C = grad_out.c();
    const std::size_t plane = std::size_t(grad_out.h()) * grad_out.w();
    const double cnt = double(N) * plane;

    BatchNormGrads g;
    g.input = Tensor4(grad_out.shape());
    g.gamma.assign(std::size_t(C), 0.0);
    g.beta.assign(std::size_t(C), 0.0);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* gp = grad_out.data() + grad_out.plane(n, c);
            const double* xh = saved.xhat.data() + saved.xhat.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                sum_g += gp[i];
                sum_gx += gp[i] * xh[i];
            }
        }
        g.beta[std::size_t(c)] = sum_g;
        g.gamma[std::size_t(c)] = sum_gx;
        const double k = gamma[std::size_t(c)] * saved.inv_std[std::size_t(c)];
        const double mg = sum_g / cnt, mgx = sum_gx / cnt;
        for (int n = 0; n < N; ++n) {
            const double* gp = grad_out.data() + grad_out.plane(n, c);
            const double* xh = saved.xhat.data() + saved.xhat.plane(n, c);
            double* gi = g.input.data() + g.input.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) gi[i] = k * (gp[i] - mg - xh[i] * mgx);
        }
    }
    return g;
}

void update_running_stats(BatchNormParams& p, const BatchNormStats& saved, double momentum) {
    require(p.running_mean.size() == saved.mean.size(), "update_running_stats: channel mismatch");
    for (std::size_t c = 0; c < saved.mean.size(); ++c) {
        p.running_mean[c] = (1.0 - momentum) * p.running_mean[c] + momentum * saved.mean[c];
        p.running_var[c] = (1.0 - momentum) * p.running_var[c] + momentum * saved.var[c];
    }
}

static inline double lerp1(double a, double b, double t) { return a + t * (b - a); }

// precomputed per-axis sample positions for align_corners=false with edge clamp
static void resize_axis(int out_n, int in_n, std::vector<int>& i0, std::vector<int>& i1,
                        std::vector<double>& frac) {
    i0.resize(std::size_t(out_n));
    i1.resize(std::size_t(out_n));
    frac.resize(std::size_t(out_n));
    const double scale = double(in_n) / double(out_n);
    for (int o = 0; o < out_n; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        double f = std::floor(src);
        int lo = int(f);
        double fr = src - f;
        int a = lo < 0 ? 0 : (lo >= in_n ? in_n - 1 : lo);
        int b = lo + 1 < 0 ? 0 : (lo + 1 >= in_n ? in_n - 1 : lo + 1);
        i0[std::size_t(o)] = a;
        i1[std::size_t(o)] = b;
        frac[std::size_t(o)] = fr;
    }
}

Tensor4 resize_bilinear(const Tensor4& x, int out_h, int out_w) {
    require(out_h >= 1 && out_w >= 1, "resize_bilinear: output dims must be >= 1");
    const int N = x.n(), C = x.c(), IH = x.h(), IW = x.w();
    std::vector<int> y0, y1, x0, x1;
    std::vector<double> fy, fx;
    resize_axis(out_h, IH, y0, y1, fy);
    resize_axis(out_w, IW, x0, x1, fx);

    Tensor4 out(N, C, out_h, out_w);
    const std::int64_t planes = std::int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (std::int64_t nc = 0; nc < planes; ++nc) {
        const double* xp = x.data() + std::size_t(nc) * (std::size_t(IH) * IW);
        double* op = out.data() + std::size_t(nc) * (std::size_t(out_h) * out_w);
        for (int oy = 0; oy < out_h; ++oy) {
            const double* r0 = xp + std::size_t(y0[std::size_t(oy)]) * IW;
            const double* r1 = xp + std::size_t(y1[std::size_t(oy)]) * IW;
            const double ty = fy[std::size_t(oy)];
            double* orow = op + std::size_t(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
                const int a = x0[std::size_t(ox)], b = x1[std::size_t(ox)];
                const double tx = fx[std::size_t(ox)];
                const double top = lerp1(r0[a], r0[b], tx);
                const double bot = lerp1(r1[a], r1[b], tx);
                orow[ox] = lerp1(top, bot, ty);
            }
        }
    }
    return out;
}

Tensor4 resize_bilinear_backward(const Tensor4& grad_out, int in_h, int in_w) {
    require(in_h >= 1 && in_w >= 1, "resize_bilinear_backward: input dims must be >= 1");
    const int N = grad_out.n(), C = grad_out.c(), OH = grad_out.h(), OW = grad_out.w();
    std::vector<int> y0, y1, x0, x1;
    std::vector<double> fy, fx;
    resize_axis(OH, in_h, y0, y1, fy);
    resize_axis(OW, in_w, x0, x1, fx);

    Tensor4 gin(N, C, in_h, in_w);
    const std::int64_t planes = std::int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (std::int64_t nc = 0; nc < planes; ++nc) {
        const double* gp = grad_out.data() + std::size_t(nc) * (std::size_t(OH) * OW);
        double* gi = gin.data() + std::size_t(nc) * (std::size_t(in_h) * in_w);
        for (int oy = 0; oy < OH; ++oy) {
            const double ty = fy[std::size_t(oy)];
            double* r0 = gi + std::size_t(y0[std::size_t(oy)]) * in_w;
            double* r1 = gi + std::size_t(y1[std::size_t(oy)]) * in_w;
            const double* grow = gp + std::size_t(oy) * OW;
            for (int ox = 0; ox < OW; ++ox) {
                const int a = x0[std::size_t(ox)], b = x1[std::size_t(ox)];
                const double tx = fx[std::size_t(ox)];
                const double g = grow[ox];
                r0[a] += g * (1.0 - ty) * (1.0 - tx);
                r0[b] += g * (1.0 - ty) * tx;
                r1[a] += g * ty * (1.0 - tx);
                r1[b] += g * ty * tx;
            }
        }
    }
    return gin;
}

std::pair<double, Tensor4> mse_loss(const Tensor4& pred, const Tensor4& target) {
    require(pred.same_shape(target), "mse_loss: shape mismatch " + pred.shape().str() + " vs " +
                                         target.shape().str());
    const std::int64_t total = std::int64_t(pred.size());
    // reduction stays serial so the sum order never depends on thread count
    double sq = 0.0;
    for (std::int64_t i = 0; i < total; ++i) {
        const double d = pred.data()[i] - target.data()[i];
        sq += d * d;
    }
    const double inv_n = 1.0 / double(total);
    Tensor4 grad(pred.shape());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i)
        grad.data()[i] = 2.0 * (pred.data()[i] - target.data()[i]) * inv_n;
    return {sq * inv_n, std::move(grad)};
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    require(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
            "concat_channels: mismatched dims " + a.shape().str() + " vs " + b.shape().str());
    Tensor4 out(a.n(), a.c() + b.c(), a.h(), a.w());
    const std::size_t plane = std::size_t(a.h()) * a.w();
    for (int n = 0; n < a.n(); ++n) {
        for (int c = 0; c < a.c(); ++c)
            std::copy_n(a.data() + a.plane(n, c), plane, out.data() + out.plane(n, c));
        for (int c = 0; c < b.c(); ++c)
            std::copy_n(b.data() + b.plane(n, c), plane, out.data() + out.plane(n, a.c() + c));
    }
    return out;
}

Tensor4 slice_channels(const Tensor4& x, int c0, int c1) {
    require(0 <= c0 && c0 < c1 && c1 <= x.c(),
            "slice_channels: bad range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                ") for " + std::to_string(x.c()) + " channels");
    Tensor4 out(x.n(), c1 - c0, x.h(), x.w());
    const std::size_t plane = std::size_t(x.h()) * x.w();
    for (int n = 0; n < x.n(); ++n)
        for (int c = c0; c < c1; ++c)
            std::copy_n(x.data() + x.plane(n, c), plane, out.data() + out.plane(n, c - c0));
    return out;
}

}  // namespace fgwarp::ops
