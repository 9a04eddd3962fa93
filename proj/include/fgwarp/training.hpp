// Training recipe: single-pair SGD with momentum, weight decay on conv and
// combine weights, and a poly learning-rate schedule. Each iteration samples
// a random adjacent frame pair, runs the two-branch detector forward, sums
// the per-branch MSE losses, and applies one optimizer step. Deterministic
// given the config seed.
#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgwarp/dataset.hpp"
#include "fgwarp/detector.hpp"
#include "fgwarp/rng.hpp"

namespace fgwarp {

// thrown when the optimization itself fails (non-finite loss)
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double base_lr = 0.005;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int max_iters = 2000;  // desk-scale default; the full-scale recipe uses 20000
    double poly_power = 0.9;
    int k = 1;             // frame gap between the two branch inputs
    int input_size = 64;   // desk-scale default; the full-scale recipe uses 512
    std::uint64_t seed = 1;

    void validate() const;
};

// flat key-value config file: `key = value` lines, # starts a comment.
// Accepts every TrainConfig field by name plus the backbone widths
// (width_low / width_mid / width_high). Unknown keys are errors.
struct TrainFileConfig {
    TrainConfig train;
    BackboneConfig backbone;
};
TrainFileConfig parse_train_config(const std::string& text);
TrainFileConfig read_train_config(const std::filesystem::path& path);

// base_lr * (1 - iter/max_iters)^poly_power on 0 <= iter <= max_iters
double poly_lr(int iter, const TrainConfig& cfg);

struct OptimState {
    DetectorParams velocity;  // zeroed copy of the parameter layout
    std::uint64_t iter = 0;

    OptimState() = default;
    explicit OptimState(const DetectorParams& p) : velocity(zeros_like(p)) {}
};

// one momentum-SGD update over a flat array:
//   g' = grad + decay * param;  v = momentum * v + g';  param -= lr * v
void sgd_update(double* param, const double* grad, double* velocity, std::size_t size, double lr,
                double momentum, double decay);

// applies sgd_update to every registered parameter view; weight decay only on
// views flagged for it (conv weights, combine weights). skip_flowcnn freezes
// the refinement net for the no-exchange ablation, where its gradients vanish
// but decay would still drift it.
void sgd_step(DetectorParams& params, const DetectorGrads& grads, OptimState& state, double lr,
              const TrainConfig& cfg, bool skip_flowcnn = false);

struct FramePair {
    int video = 0, t = 0;
    Tensor4 frame_t, frame_tk;  // resized to input_size
    Tensor4 gt_t, gt_tk;
    FlowField flow_fwd;  // on frame t+k's grid, warps t's content toward t+k
    FlowField flow_bwd;  // on frame t's grid
};

// uniformly random video, uniformly random (t, t+k) pair within it; stored
// flow is rescaled to input_size (k == 1), otherwise block matching runs on
// the resized frames
FramePair sample_pair(const Dataset& ds, const TrainConfig& cfg, Rng& rng);

struct TrainResult {
    DetectorParams params;
    std::vector<double> loss_trace;  // one entry per iteration
};

TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                  const BackboneConfig& backbone = BackboneConfig{}, bool exchange = true,
                  std::ostream* log = nullptr);

// one full-precision loss per line, so identical runs produce identical files
std::string format_loss_trace(const std::vector<double>& trace);

}  // namespace fgwarp
