#include "fgwarp/eval.hpp"

#include <cmath>
#include <cstdio>

#include "fgwarp/flownet.hpp"
#include "fgwarp/ops.hpp"

namespace fgwarp {

Tensor4 binarize(const Tensor4& mask, double threshold) {
    Tensor4 out(mask.shape());
    for (std::size_t i = 0; i < mask.size(); ++i)
        out.data()[i] = mask.data()[i] >= threshold ? 1.0 : 0.0;
    return out;
}

void accumulate_confusion(const Tensor4& pred, const Tensor4& gt, ConfusionCounts& counts) {
    require(pred.same_shape(gt), "accumulate_confusion: shape mismatch " + pred.shape().str() +
                                     " vs " + gt.shape().str());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred.data()[i], g = gt.data()[i];
        require((p == 0.0 || p == 1.0) && (g == 0.0 || g == 1.0),
                "accumulate_confusion: inputs must be binarized");
        if (g == 1.0)
            p == 1.0 ? ++counts.tp : ++counts.fn;
        else
            p == 1.0 ? ++counts.fp : ++counts.tn;
    }
}

MetricReport compute_ber(const ConfusionCounts& c) {
    MetricReport r;
    r.counts = c;
    r.shadow_absent = c.tp + c.fn == 0;
    r.nonshadow_absent = c.tn + c.fp == 0;

    double recall_sum = 0.0;
    int present = 0;
    if (!r.shadow_absent) {
        const double recall = double(c.tp) / double(c.tp + c.fn);
        r.shadow_err = 100.0 * (1.0 - recall);
        recall_sum += recall;
        ++present;
    }
    if (!r.nonshadow_absent) {
        const double recall = double(c.tn) / double(c.tn + c.fp);
        r.nonshadow_err = 100.0 * (1.0 - recall);
        recall_sum += recall;
        ++present;
    }
    r.ber = present == 0 ? 0.0 : 100.0 * (1.0 - recall_sum / present);
    return r;
}

namespace {

FlowField negated(const FlowField& f) {
    FlowField out(f.n(), f.h(), f.w());
    for (std::size_t i = 0; i < f.t.size(); ++i) out.t.data()[i] = -f.t.data()[i];
    return out;
}

void add_into(Tensor4& acc, const Tensor4& x) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += x.data()[i];
}

}  // namespace

std::vector<Tensor4> infer_video(const VideoData& video, const DetectorParams& params,
                                 int input_size, InferDebug* debug) {
    require(!video.frames.empty(), "infer_video: video '" + video.name + "' has no frames");
    require(input_size >= 8, "infer_video: input_size must be >= 8");
    const int native_h = video.frames[0].h(), native_w = video.frames[0].w();
    const int s = input_size;
    const int count = int(video.frames.size());

    if (count < 2) {
        if (debug) debug->single_frame_fallback = true;
        const Tensor4 frame = ops::resize_bilinear(video.frames[0], s, s);
        return {ops::resize_bilinear(forward_single_infer(frame, params), native_h, native_w)};
    }

    std::vector<Tensor4> resized;
    resized.reserve(std::size_t(count));
    for (const Tensor4& f : video.frames) resized.push_back(ops::resize_bilinear(f, s, s));

    std::vector<Tensor4> sum(std::size_t(count), Tensor4(1, 1, s, s));
    std::vector<int> hits(std::size_t(count), 0);
    for (int t = 0; t + 1 < count; ++t) {
        FlowField fwd, bwd;
        if (!video.flows.empty()) {
            fwd = resize_flow(video.flows[std::size_t(t)], s, s);
            bwd = negated(fwd);
        } else {
            fwd = estimate_flow_blockmatch(resized[std::size_t(t) + 1], resized[std::size_t(t)]);
            bwd = estimate_flow_blockmatch(resized[std::size_t(t)], resized[std::size_t(t) + 1]);
        }
        const PairMasks m = forward_pair_infer(resized[std::size_t(t)], resized[std::size_t(t) + 1],
                                               fwd, bwd, params);
        add_into(sum[std::size_t(t)], m.mask_t);
        add_into(sum[std::size_t(t) + 1], m.mask_tk);
        ++hits[std::size_t(t)];
        ++hits[std::size_t(t) + 1];
        if (debug) debug->pairs.push_back(m);
    }

    std::vector<Tensor4> out;
    out.reserve(std::size_t(count));
    for (int t = 0; t < count; ++t) {
        Tensor4& m = sum[std::size_t(t)];
        const double inv = 1.0 / hits[std::size_t(t)];
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] *= inv;
        out.push_back(ops::resize_bilinear(m, native_h, native_w));
    }
    return out;
}

EvalResult evaluate_dataset(const Dataset& ds, const DetectorParams& params, int input_size,
                            double threshold) {
    require(!ds.videos.empty(), "evaluate_dataset: empty dataset");
    EvalResult result;
    ConfusionCounts pooled;
    for (const VideoData& vid : ds.videos) {
        const std::vector<Tensor4> masks = infer_video(vid, params, input_size);
        ConfusionCounts vc;
        for (std::size_t t = 0; t < masks.size(); ++t)
            accumulate_confusion(binarize(masks[t], threshold), binarize(vid.masks[t], threshold),
                                 vc);
        result.per_video.push_back(compute_ber(vc));
        pooled += vc;
        result.frames += int(masks.size());
    }
    result.report = compute_ber(pooled);
    return result;
}

std::string format_report(const EvalResult& r) {
    char buf[160];
    std::string out;
    auto line = [&](const char* fmt, auto... args) {
        std::snprintf(buf, sizeof buf, fmt, args...);
        out += buf;
    };
    line("ber = %.6f\n", r.report.ber);
    line("shadow_err = %.6f\n", r.report.shadow_err);
    line("nonshadow_err = %.6f\n", r.report.nonshadow_err);
    line("tp = %llu\n", (unsigned long long)r.report.counts.tp);
    line("tn = %llu\n", (unsigned long long)r.report.counts.tn);
    line("fp = %llu\n", (unsigned long long)r.report.counts.fp);
    line("fn = %llu\n", (unsigned long long)r.report.counts.fn);
    line("shadow_absent = %d\n", int(r.report.shadow_absent));
    line("nonshadow_absent = %d\n", int(r.report.nonshadow_absent));
    line("videos = %zu\n", r.per_video.size());
    line("frames = %d\n", r.frames);
    for (std::size_t v = 0; v < r.per_video.size(); ++v)
        line("video_%zu_ber = %.6f\n", v, r.per_video[v].ber);
    return out;
}

}  // namespace fgwarp
