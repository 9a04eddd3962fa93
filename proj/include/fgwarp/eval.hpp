// Balanced-error-rate evaluation and the two-pass inference protocol: every
// adjacent pair is run through the detector, so each interior frame collects
// two predictions whose elementwise mean is its final mask. Dataset scores
// pool pixel counts across all frames and videos.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fgwarp/dataset.hpp"
#include "fgwarp/detector.hpp"

namespace fgwarp {

struct ConfusionCounts {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    std::uint64_t total() const { return tp + tn + fp + fn; }
};

struct MetricReport {
    double ber = 0.0;
    double shadow_err = 0.0;     // 100 * fn / (tp + fn)
    double nonshadow_err = 0.0;  // 100 * fp / (tn + fp)
    ConfusionCounts counts;
    // a class absent from the ground truth: its term is excluded from the
    // mean (its error reads 0) and the report flags it
    bool shadow_absent = false, nonshadow_absent = false;
};

// value >= threshold maps to 1.0, below to 0.0
Tensor4 binarize(const Tensor4& mask, double threshold = 0.5);

// pred/gt must be binary (exactly 0 or 1) and same-shape
void accumulate_confusion(const Tensor4& pred, const Tensor4& gt, ConfusionCounts& counts);

// BER = 100 * (1 - (TP/(TP+FN) + TN/(TN+FP)) / 2), absent classes excluded
MetricReport compute_ber(const ConfusionCounts& counts);

// captured per-pair raw predictions, for auditing the averaging protocol
struct InferDebug {
    std::vector<PairMasks> pairs;      // prediction pair for (t, t+1), t = 0..
    bool single_frame_fallback = false;
};

// masks at native frame resolution, one per input frame. Frames are resized
// to input_size for the network and predictions resized back. Stored flow is
// used when present, block matching otherwise. Single-frame videos fall back
// to the one-branch forward (flagged in debug).
std::vector<Tensor4> infer_video(const VideoData& video, const DetectorParams& params,
                                 int input_size, InferDebug* debug = nullptr);

struct EvalResult {
    MetricReport report;                // pooled over the whole dataset
    std::vector<MetricReport> per_video;
    int frames = 0;
};

EvalResult evaluate_dataset(const Dataset& ds, const DetectorParams& params, int input_size,
                            double threshold = 0.5);

// flat `key = value` report, parse-compatible with the config reader
std::string format_report(const EvalResult& r);

}  // namespace fgwarp
