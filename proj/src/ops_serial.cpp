#include <cmath>

#include "fgwarp/ops.hpp"

// Straight-line reference implementations. Same accumulation order per output
// element as the OpenMP path, so the two must agree bit-for-bit; the tests
// enforce that.

namespace fgwarp::ops::serial {

Tensor4 conv2d_forward(const Tensor4& input, const ConvParams& p) {
    const Shape4 os = conv2d_out_shape(input.shape(), p);
    Tensor4 out(os);
    const int KH = p.weight.h(), KW = p.weight.w(), S = p.stride, P = p.pad;
    for (int n = 0; n < os.n; ++n)
        for (int oc = 0; oc < os.c; ++oc)
            for (int oh = 0; oh < os.h; ++oh)
                for (int ow = 0; ow < os.w; ++ow) {
                    double acc = p.bias[std::size_t(oc)];
                    for (int ic = 0; ic < input.c(); ++ic)
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw) {
                                const int ih = oh * S - P + kh;
                                const int iw = ow * S - P + kw;
                                if (ih < 0 || ih >= input.h() || iw < 0 || iw >= input.w())
                                    continue;
                                acc += p.weight.at(oc, ic, kh, kw) * input.at(n, ic, ih, iw);
                            }
                    out.at(n, oc, oh, ow) = acc;
                }
    return out;
}

ConvGrads conv2d_backward(const Tensor4& input, const ConvParams& p, const Tensor4& grad_out,
                          bool want_input_grad) {
    const Shape4 os = conv2d_out_shape(input.shape(), p);
    require(grad_out.shape() == os, "conv2d_backward: grad shape " + grad_out.shape().str() +
                                        " != output shape " + os.str());
    const int KH = p.weight.h(), KW = p.weight.w(), S = p.stride, P = p.pad;

    ConvGrads g;
    g.weight = Tensor4(p.weight.shape());
    g.bias.assign(std::size_t(os.c), 0.0);

    for (int oc = 0; oc < os.c; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < os.n; ++n)
            for (int oh = 0; oh < os.h; ++oh)
                for (int ow = 0; ow < os.w; ++ow) acc += grad_out.at(n, oc, oh, ow);
        g.bias[std::size_t(oc)] = acc;
    }

    for (int oc = 0; oc < os.c; ++oc)
        for (int ic = 0; ic < input.c(); ++ic)
            for (int kh = 0; kh < KH; ++kh)
                for (int kw = 0; kw < KW; ++kw) {
                    double acc = 0.0;
                    for (int n = 0; n < os.n; ++n)
                        for (int oh = 0; oh < os.h; ++oh)
                            for (int ow = 0; ow < os.w; ++ow) {
                                const int ih = oh * S - P + kh;
                                const int iw = ow * S - P + kw;
                                if (ih < 0 || ih >= input.h() || iw < 0 || iw >= input.w())
                                    continue;
                                acc += grad_out.at(n, oc, oh, ow) * input.at(n, ic, ih, iw);
                            }
                    g.weight.at(oc, ic, kh, kw) = acc;
                }

    if (want_input_grad) {
        g.input = Tensor4(input.shape());
        for (int n = 0; n < os.n; ++n)
            for (int ic = 0; ic < input.c(); ++ic)
                for (int ih = 0; ih < input.h(); ++ih)
                    for (int iw = 0; iw < input.w(); ++iw) {
                        double acc = 0.0;
                        for (int oc = 0; oc < os.c; ++oc)
                            for (int kh = 0; kh < KH; ++kh) {
                                const int ty = ih + P - kh;
                                if (ty < 0 || ty % S != 0) continue;
                                const int oh = ty / S;
                                if (oh >= os.h) continue;
                                for (int kw = 0; kw < KW; ++kw) {
                                    const int tx = iw + P - kw;
                                    if (tx < 0 || tx % S != 0) continue;
                                    const int ow = tx / S;
                                    if (ow >= os.w) continue;
                                    acc += grad_out.at(n, oc, oh, ow) * p.weight.at(oc, ic, kh, kw);
                                }
                            }
                        g.input.at(n, ic, ih, iw) = acc;
                    }
    }
    return g;
}

Tensor4 relu_forward(const Tensor4& x) {
    Tensor4 y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    return y;
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out) {
    require(x.same_shape(grad_out), "relu_backward: shape mismatch");
    Tensor4 g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
        g.data()[i] = x.data()[i] > 0.0 ? grad_out.data()[i] : 0.0;
    return g;
}

Tensor4 sigmoid_forward(const Tensor4& x) {
    Tensor4 y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        if (v >= 0.0) {
            y.data()[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            y.data()[i] = e / (1.0 + e);
        }
    }
    return y;
}

Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out) {
    require(y.same_shape(grad_out), "sigmoid_backward: shape mismatch");
    Tensor4 g(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i)
        g.data()[i] = grad_out.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
    return g;
}

Tensor4 batchnorm_forward(const Tensor4& x, const std::vector<double>& gamma,
                          const std::vector<double>& beta, double eps, BatchNormStats* saved) {
    require(gamma.size() == std::size_t(x.c()) && beta.size() == std::size_t(x.c()),
            "batchnorm: gamma/beta length != channels");
    const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
    const double cnt = double(N) * H * W;

    Tensor4 y(x.shape()), xhat(x.shape());
    std::vector<double> mean(C), var(C), inv_std(C);
    for (int c = 0; c < C; ++c) {
        double sum = 0.0;
        for (int n = 0; n < N; ++n)
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < W; ++xx) sum += x.at(n, c, yy, xx);
        const double mu = sum / cnt;
        double sq = 0.0;
        for (int n = 0; n < N; ++n)
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < W; ++xx) {
                    const double d = x.at(n, c, yy, xx) - mu;
                    sq += d * d;
                }
        const double v = sq / cnt;
        const double istd = 1.0 / std::sqrt(v + eps);
        mean[c] = mu;
        var[c] = v;
        inv_std[c] = istd;
        for (int n = 0; n < N; ++n)
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < W; ++xx) {
                    const double h = (x.at(n, c, yy, xx) - mu) * istd;
                    xhat.at(n, c, yy, xx) = h;
                    y.at(n, c, yy, xx) = gamma[std::size_t(c)] * h + beta[std::size_t(c)];
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
    require(p.gamma.size() == std::size_t(x.c()), "batchnorm_infer: channel mismatch");
    Tensor4 y(x.shape());
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            const double istd = 1.0 / std::sqrt(p.running_var[std::size_t(c)] + eps);
            for (int yy = 0; yy < x.h(); ++yy)
                for (int xx = 0; xx < x.w(); ++xx)
                    y.at(n, c, yy, xx) = p.gamma[std::size_t(c)] *
                                             (x.at(n, c, yy, xx) - p.running_mean[std::size_t(c)]) *
                                             istd +
                                         p.beta[std::size_t(c)];
        }
    return y;
}

BatchNormGrads batchnorm_backward(const Tensor4& grad_out, const BatchNormStats& saved,
                                  const std::vector<double>& gamma) {
    require(grad_out.same_shape(saved.xhat), "batchnorm_backward: stale or mismatched stats");
    const int N = grad_out.n(), C = grad_out.c(), H = grad_out.h(), W = grad_out.w();
    const double cnt = double(N) * H * W;

    BatchNormGrads g;
    g.input = Tensor4(grad_out.shape());
    g.gamma.assign(std::size_t(C), 0.0);
    g.beta.assign(std::size_t(C), 0.0);

    for (int c = 0; c < C; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < N; ++n)
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < W; ++xx) {
                    sum_g += grad_out.at(n, c, yy, xx);
                    sum_gx += grad_out.at(n, c, yy, xx) * saved.xhat.at(n, c, yy, xx);
                }
        g.beta[std::size_t(c)] = sum_g;
        g.gamma[std::size_t(c)] = sum_gx;
        const double k = gamma[std::size_t(c)] * saved.inv_std[std::size_t(c)];
        const double mg = sum_g / cnt, mgx = sum_gx / cnt;
        for (int n = 0; n < N; ++n)
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < W; ++xx)
                    g.input.at(n, c, yy, xx) =
                        k * (grad_out.at(n, c, yy, xx) - mg - saved.xhat.at(n, c, yy, xx) * mgx);
    }
    return g;
}

static inline double lerp1(double a, double b, double t) { return a + t * (b - a); }

static void sample_axis(int o, int out_n, int in_n, int& i0, int& i1, double& frac) {
    const double scale = double(in_n) / double(out_n);
    const double src = (o + 0.5) * scale - 0.5;
    const double f = std::floor(src);
    const int lo = int(f);
    frac = src - f;
    i0 = lo < 0 ? 0 : (lo >= in_n ? in_n - 1 : lo);
    i1 = lo + 1 < 0 ? 0 : (lo + 1 >= in_n ? in_n - 1 : lo + 1);
}

Tensor4 resize_bilinear(const Tensor4& x, int out_h, int out_w) {
    require(out_h >= 1 && out_w >= 1, "resize_bilinear: output dims must be >= 1");
    Tensor4 out(x.n(), x.c(), out_h, out_w);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int oy = 0; oy < out_h; ++oy) {
                int y0, y1;
                double ty;
                sample_axis(oy, out_h, x.h(), y0, y1, ty);
                for (int ox = 0; ox < out_w; ++ox) {
                    int x0, x1;
                    double tx;
                    sample_axis(ox, out_w, x.w(), x0, x1, tx);
                    const double top = lerp1(x.at(n, c, y0, x0), x.at(n, c, y0, x1), tx);
                    const double bot = lerp1(x.at(n, c, y1, x0), x.at(n, c, y1, x1), tx);
                    out.at(n, c, oy, ox) = lerp1(top, bot, ty);
                }
            }
    return out;
}

Tensor4 resize_bilinear_backward(const Tensor4& grad_out, int in_h, int in_w) {
    require(in_h >= 1 && in_w >= 1, "resize_bilinear_backward: input dims must be >= 1");
    Tensor4 gin(grad_out.n(), grad_out.c(), in_h, in_w);
    for (int n = 0; n < grad_out.n(); ++n)
        for (int c = 0; c < grad_out.c(); ++c)
            for (int oy = 0; oy < grad_out.h(); ++oy) {
                int y0, y1;
                double ty;
                sample_axis(oy, grad_out.h(), in_h, y0, y1, ty);
                for (int ox = 0; ox < grad_out.w(); ++ox) {
                    int x0, x1;
                    double tx;
                    sample_axis(ox, grad_out.w(), in_w, x0, x1, tx);
                    const double g = grad_out.at(n, c, oy, ox);
                    gin.at(n, c, y0, x0) += g * (1.0 - ty) * (1.0 - tx);
                    gin.at(n, c, y0, x1) += g * (1.0 - ty) * tx;
                    gin.at(n, c, y1, x0) += g * ty * (1.0 - tx);
                    gin.at(n, c, y1, x1) += g * ty * tx;
                }
            }
    return gin;
}

std::pair<double, Tensor4> mse_loss(const Tensor4& pred, const Tensor4& target) {
    require(pred.same_shape(target), "mse_loss: shape mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        sq += d * d;
    }
    const double inv_n = 1.0 / double(pred.size());
    Tensor4 grad(pred.shape());
    for (std::size_t i = 0; i < pred.size(); ++i)
        grad.data()[i] = 2.0 * (pred.data()[i] - target.data()[i]) * inv_n;
    return {sq * inv_n, std::move(grad)};
}

}  // namespace fgwarp::ops::serial
