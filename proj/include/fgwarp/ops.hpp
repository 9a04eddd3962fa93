// Numeric kernels on Tensor4: convolution, batch norm, ReLU, sigmoid,
// bilinear resize, MSE, channel concat/slice. Every forward has a matching
// analytic backward (hand-derived, finite-difference checked in the tests).
//
// The functions in fgwarp::ops are the production path and parallelize with
// OpenMP over independent output elements, so results are bit-identical for
// any thread count. fgwarp::ops::serial holds a plain nested-loop reference
// with the same accumulation order; the test suite asserts bit-equality
// between the two and tools/bench compares their throughput.
#pragma once

#include <utility>

#include "fgwarp/tensor.hpp"

namespace fgwarp::ops {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// ---- shared shape logic -------------------------------------------------

Shape4 conv2d_out_shape(const Shape4& in, const ConvParams& p);

struct ConvGrads {
    Tensor4 input;  // empty when input grads were not requested
    Tensor4 weight;
    std::vector<double> bias;
};

struct BatchNormParams {
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;
    explicit BatchNormParams(int channels = 0)
        : gamma(channels, 1.0),
          beta(channels, 0.0),
          running_mean(channels, 0.0),
          running_var(channels, 1.0) {}
    int channels() const { return int(gamma.size()); }
};

// training-mode batch statistics saved for the backward pass
struct BatchNormStats {
    std::vector<double> mean, var, inv_std;
    Tensor4 xhat;
};

struct BatchNormGrads {
    Tensor4 input;
    std::vector<double> gamma, beta;
};

// ---- production (OpenMP) kernels ----------------------------------------

Tensor4 conv2d_forward(const Tensor4& input, const ConvParams& p);
ConvGrads conv2d_backward(const Tensor4& input, const ConvParams& p, const Tensor4& grad_out,
                          bool want_input_grad = true);

Tensor4 relu_forward(const Tensor4& x);
Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out);

Tensor4 sigmoid_forward(const Tensor4& x);
// y is the forward output
Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out);

// training mode: normalize with biased batch statistics over (n, h, w)
Tensor4 batchnorm_forward(const Tensor4& x, const std::vector<double>& gamma,
                          const std::vector<double>& beta, double eps, BatchNormStats* saved);
// inference mode: normalize with the stored running statistics
Tensor4 batchnorm_infer(const Tensor4& x, const BatchNormParams& p, double eps);
BatchNormGrads batchnorm_backward(const Tensor4& grad_out, const BatchNormStats& saved,
                                  const std::vector<double>& gamma);
void update_running_stats(BatchNormParams& p, const BatchNormStats& saved, double momentum);

// align_corners=false sampling with edge clamping; constants are preserved
// exactly and out_h==h, out_w==w is the bit-exact identity
Tensor4 resize_bilinear(const Tensor4& x, int out_h, int out_w);
Tensor4 resize_bilinear_backward(const Tensor4& grad_out, int in_h, int in_w);

// returns (mean squared error, gradient w.r.t. pred)
std::pair<double, Tensor4> mse_loss(const Tensor4& pred, const Tensor4& target);

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
Tensor4 slice_channels(const Tensor4& x, int c0, int c1);  // [c0, c1)

// ---- serial reference ----------------------------------------------------

namespace serial {

Tensor4 conv2d_forward(const Tensor4& input, const ConvParams& p);
ConvGrads conv2d_backward(const Tensor4& input, const ConvParams& p, const Tensor4& grad_out,
                          bool want_input_grad = true);
Tensor4 relu_forward(const Tensor4& x);
Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out);
Tensor4 sigmoid_forward(const Tensor4& x);
Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out);
Tensor4 batchnorm_forward(const Tensor4& x, const std::vector<double>& gamma,
                          const std::vector<double>& beta, double eps, BatchNormStats* saved);
Tensor4 batchnorm_infer(const Tensor4& x, const BatchNormParams& p, double eps);
BatchNormGrads batchnorm_backward(const Tensor4& grad_out, const BatchNormStats& saved,
                                  const std::vector<double>& gamma);
Tensor4 resize_bilinear(const Tensor4& x, int out_h, int out_w);
Tensor4 resize_bilinear_backward(const Tensor4& grad_out, int in_h, int in_w);
std::pair<double, Tensor4> mse_loss(const Tensor4& pred, const Tensor4& target);

}  // namespace serial

}  // namespace fgwarp::ops
