#include "fgwarp/detector.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fgwarp/io_util.hpp"
#include "fgwarp/tensor_io.hpp"

namespace fgwarp {

namespace {

void add_into(Tensor4& dst, const Tensor4& src) {
    require(dst.same_shape(src), "gradient accumulation: shape mismatch, " + dst.shape().str() +
                                     " vs " + src.shape().str());
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    require(dst.size() == src.size(), "gradient accumulation: vector length mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

DetectorParams::DetectorParams(const BackboneConfig& cfg) : config(cfg) {
    cfg.validate();
    const auto w = cfg.widths();
    int in_c = 3;
    for (int s = 0; s < 3; ++s) {
        stages[s].conv_a = ConvParams(w[s], in_c, 3, 3, cfg.stage_stride, 1);
        stages[s].conv_b = ConvParams(w[s], w[s], 3, 3, 1, 1);
        stages[s].bn_a = ops::BatchNormParams(w[s]);
        stages[s].bn_b = ops::BatchNormParams(w[s]);
        comb_t[s] = CombineWeights(w[s]);
        comb_tk[s] = CombineWeights(w[s]);
        in_c = w[s];
    }
    decoder.fuse_mid = ConvParams(w[1], w[2] + w[1], 3, 3, 1, 1);
    decoder.fuse_low = ConvParams(w[0], w[1] + w[0], 3, 3, 1, 1);
    decoder.head = ConvParams(1, w[0], 1, 1, 1, 0);
}

namespace {

void he_init(Tensor4& w, Rng& rng) {
    const double stddev = std::sqrt(2.0 / (double(w.c()) * w.h() * w.w()));
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.normal(0.0, stddev);
}

}  // namespace

DetectorParams init_detector_params(const BackboneConfig& cfg, Rng& rng) {
    DetectorParams p(cfg);
    for (int s = 0; s < 3; ++s) {
        he_init(p.stages[s].conv_a.weight, rng);
        he_init(p.stages[s].conv_b.weight, rng);
    }
    he_init(p.decoder.fuse_mid.weight, rng);
    he_init(p.decoder.fuse_low.weight, rng);
    he_init(p.decoder.head.weight, rng);
    p.flowcnn = init_flowcnn_params(rng);
    return p;
}

// ---- parameter registry -----------------------------------------------------

namespace {

struct ViewBuilder {
    std::vector<ParamView> views;

    void tensor(const std::string& name, Tensor4& t, bool decay) {
        views.push_back({name, t.data(), t.size(), decay});
    }
    void vec(const std::string& name, std::vector<double>& v, bool decay = false) {
        views.push_back({name, v.data(), v.size(), decay});
    }
    void conv(const std::string& name, ConvParams& c) {
        tensor(name + ".weight", c.weight, true);
        vec(name + ".bias", c.bias);
    }
    void bn(const std::string& name, ops::BatchNormParams& b, bool running) {
        vec(name + ".gamma", b.gamma);
        vec(name + ".beta", b.beta);
        if (running) {
            vec(name + ".running_mean", b.running_mean);
            vec(name + ".running_var", b.running_var);
        }
    }
};

std::vector<ParamView> build_views(DetectorParams& p, bool running) {
    ViewBuilder b;
    for (int s = 0; s < 3; ++s) {
        const std::string stage = "backbone.s" + std::to_string(s + 1);
        b.conv(stage + ".conv_a", p.stages[s].conv_a);
        b.bn(stage + ".bn_a", p.stages[s].bn_a, running);
        b.conv(stage + ".conv_b", p.stages[s].conv_b);
        b.bn(stage + ".bn_b", p.stages[s].bn_b, running);
        const std::string comb = "combine.s" + std::to_string(s + 1);
        b.vec(comb + ".t.w1", p.comb_t[s].w1, true);
        b.vec(comb + ".t.w2", p.comb_t[s].w2, true);
        b.vec(comb + ".tk.w1", p.comb_tk[s].w1, true);
        b.vec(comb + ".tk.w2", p.comb_tk[s].w2, true);
    }
    b.conv("decoder.fuse_mid", p.decoder.fuse_mid);
    b.conv("decoder.fuse_low", p.decoder.fuse_low);
    b.conv("decoder.head", p.decoder.head);
    b.conv("flowcnn.l1", p.flowcnn.l1);
    b.bn("flowcnn.bn1", p.flowcnn.bn1, running);
    b.conv("flowcnn.l2", p.flowcnn.l2);
    b.bn("flowcnn.bn2", p.flowcnn.bn2, running);
    b.conv("flowcnn.l3", p.flowcnn.l3);
    b.conv("flowcnn.l4", p.flowcnn.l4);
    return std::move(b.views);
}

}  // namespace

std::vector<ParamView> param_views(DetectorParams& p) { return build_views(p, false); }
std::vector<ParamView> state_views(DetectorParams& p) { return build_views(p, true); }

DetectorParams zeros_like(const DetectorParams& p) {
    DetectorParams g = p;
    for (ParamView& v : state_views(g)) std::fill_n(v.data, v.size, 0.0);
    return g;
}

// ---- stage and decoder helpers ----------------------------------------------

namespace {

Tensor4 run_stage(const StageParams& sp, const Tensor4& in, bool batch_stats, StageCache* c) {
    Tensor4 ha = ops::conv2d_forward(in, sp.conv_a);
    ops::BatchNormStats sa, sb;
    Tensor4 ba = batch_stats
                     ? ops::batchnorm_forward(ha, sp.bn_a.gamma, sp.bn_a.beta, ops::kBnEps, &sa)
                     : ops::batchnorm_infer(ha, sp.bn_a, ops::kBnEps);
    Tensor4 ra = ops::relu_forward(ba);
    Tensor4 hb = ops::conv2d_forward(ra, sp.conv_b);
    Tensor4 bb = batch_stats
                     ? ops::batchnorm_forward(hb, sp.bn_b.gamma, sp.bn_b.beta, ops::kBnEps, &sb)
                     : ops::batchnorm_infer(hb, sp.bn_b, ops::kBnEps);
    Tensor4 tap = ops::relu_forward(bb);
    if (c) {
        c->input = in;
        c->sa = std::move(sa);
        c->sb = std::move(sb);
        c->ba = std::move(ba);
        c->ra = std::move(ra);
        c->bb = std::move(bb);
        c->tap = tap;
    }
    return tap;
}

// grads into (low, mid, high) combined features
struct DecoderInputGrads {
    Tensor4 low, mid, high;
};

Tensor4 run_decoder(const DecoderParams& dp, const Tensor4& low, const Tensor4& mid,
                    const Tensor4& high, int out_h, int out_w, DecoderCache* c) {
    Tensor4 up_high = ops::resize_bilinear(high, mid.h(), mid.w());
    Tensor4 cat_mid = ops::concat_channels(up_high, mid);
    Tensor4 fm_pre = ops::conv2d_forward(cat_mid, dp.fuse_mid);
    Tensor4 fm = ops::relu_forward(fm_pre);
    Tensor4 up_mid = ops::resize_bilinear(fm, low.h(), low.w());
    Tensor4 cat_low = ops::concat_channels(up_mid, low);
    Tensor4 fl_pre = ops::conv2d_forward(cat_low, dp.fuse_low);
    Tensor4 fl = ops::relu_forward(fl_pre);
    Tensor4 up_low = ops::resize_bilinear(fl, out_h, out_w);
    Tensor4 mask = ops::sigmoid_forward(ops::conv2d_forward(up_low, dp.head));
    if (c) {
        c->high_h = high.h();
        c->high_w = high.w();
        c->up_high = std::move(up_high);
        c->cat_mid = std::move(cat_mid);
        c->fm_pre = std::move(fm_pre);
        c->fm = std::move(fm);
        c->up_mid = std::move(up_mid);
        c->cat_low = std::move(cat_low);
        c->fl_pre = std::move(fl_pre);
        c->fl = std::move(fl);
        c->up_low = std::move(up_low);
        c->mask = mask;
    }
    return mask;
}

Tensor4 backward_stage(const StageCache& c, const StageParams& sp, StageParams& gsp,
                       const Tensor4& gtap, bool want_input) {
    Tensor4 gbb = ops::relu_backward(c.bb, gtap);
    ops::BatchNormGrads nb = ops::batchnorm_backward(gbb, c.sb, sp.bn_b.gamma);
    add_into(gsp.bn_b.gamma, nb.gamma);
    add_into(gsp.bn_b.beta, nb.beta);
    ops::ConvGrads cb = ops::conv2d_backward(c.ra, sp.conv_b, nb.input);
    add_into(gsp.conv_b.weight, cb.weight);
    add_into(gsp.conv_b.bias, cb.bias);
    Tensor4 gba = ops::relu_backward(c.ba, cb.input);
    ops::BatchNormGrads na = ops::batchnorm_backward(gba, c.sa, sp.bn_a.gamma);
    add_into(gsp.bn_a.gamma, na.gamma);
    add_into(gsp.bn_a.beta, na.beta);
    ops::ConvGrads ca = ops::conv2d_backward(c.input, sp.conv_a, na.input, want_input);
    add_into(gsp.conv_a.weight, ca.weight);
    add_into(gsp.conv_a.bias, ca.bias);
    return std::move(ca.input);
}

DecoderInputGrads backward_decoder(const DecoderCache& c, const DecoderParams& dp,
                                   DecoderParams& gd, const Tensor4& grad_mask) {
    const int high_c = c.up_high.c();
    const int mid_c = c.fm.c();
    DecoderInputGrads out;

    Tensor4 glogits = ops::sigmoid_backward(c.mask, grad_mask);
    ops::ConvGrads ch = ops::conv2d_backward(c.up_low, dp.head, glogits);
    add_into(gd.head.weight, ch.weight);
    add_into(gd.head.bias, ch.bias);
    Tensor4 gfl = ops::relu_backward(c.fl_pre, ops::resize_bilinear_backward(ch.input, c.fl.h(), c.fl.w()));
    ops::ConvGrads cl = ops::conv2d_backward(c.cat_low, dp.fuse_low, gfl);
    add_into(gd.fuse_low.weight, cl.weight);
    add_into(gd.fuse_low.bias, cl.bias);
    out.low = ops::slice_channels(cl.input, mid_c, cl.input.c());
    Tensor4 gfm = ops::relu_backward(
        c.fm_pre, ops::resize_bilinear_backward(ops::slice_channels(cl.input, 0, mid_c),
                                                c.fm.h(), c.fm.w()));
    ops::ConvGrads cm = ops::conv2d_backward(c.cat_mid, dp.fuse_mid, gfm);
    add_into(gd.fuse_mid.weight, cm.weight);
    add_into(gd.fuse_mid.bias, cm.bias);
    out.mid = ops::slice_channels(cm.input, high_c, cm.input.c());
    out.high = ops::resize_bilinear_backward(ops::slice_channels(cm.input, 0, high_c),
                                             c.high_h, c.high_w);
    return out;
}

void validate_pair_inputs(const Tensor4& frame_t, const Tensor4& frame_tk,
                          const FlowField& raw_fwd, const FlowField& raw_bwd) {
    require(frame_t.same_shape(frame_tk), "forward_pair: frame shapes differ, " +
                                              frame_t.shape().str() + " vs " +
                                              frame_tk.shape().str());
    require(frame_t.c() == 3,
            "forward_pair: frames must have 3 channels, got " + frame_t.shape().str());
    for (const FlowField* f : {&raw_fwd, &raw_bwd})
        require(f->n() == frame_t.n() && f->h() == frame_t.h() && f->w() == frame_t.w(),
                "forward_pair: flow grid " + f->t.shape().str() + " does not match frames " +
                    frame_t.shape().str());
}

PairMasks pair_impl(const Tensor4& frame_t, const Tensor4& frame_tk, const FlowField& raw_fwd,
                    const FlowField& raw_bwd, const DetectorParams& p, bool batch_stats,
                    PairCache* cache, bool exchange) {
    validate_pair_inputs(frame_t, frame_tk, raw_fwd, raw_bwd);

    FlowField refined_fwd, refined_bwd;
    if (exchange) {
        // raw_fwd is anchored at frame t+k and warps t's content toward t+k
        if (batch_stats) {
            refined_fwd = flowcnn_forward(raw_fwd, frame_tk, frame_t, p.flowcnn,
                                          cache ? &cache->fc_fwd : nullptr);
            refined_bwd = flowcnn_forward(raw_bwd, frame_t, frame_tk, p.flowcnn,
                                          cache ? &cache->fc_bwd : nullptr);
        } else {
            refined_fwd = flowcnn_infer(raw_fwd, frame_tk, frame_t, p.flowcnn);
            refined_bwd = flowcnn_infer(raw_bwd, frame_t, frame_tk, p.flowcnn);
        }
    }

    PairMasks out;
    Tensor4 in_t = frame_t, in_tk = frame_tk;
    std::array<Tensor4, 3> comb_t_out, comb_tk_out;
    for (int s = 0; s < 3; ++s) {
        Tensor4 tap_t = run_stage(p.stages[s], in_t, batch_stats,
                                  cache ? &cache->stage_t[s] : nullptr);
        Tensor4 tap_tk = run_stage(p.stages[s], in_tk, batch_stats,
                                   cache ? &cache->stage_tk[s] : nullptr);
        Tensor4 warped_t, warped_tk;
        FlowField rflow_bwd, rflow_fwd;
        if (exchange) {
            rflow_bwd = resize_flow(refined_bwd, tap_t.h(), tap_t.w());
            warped_t = warp(tap_tk, rflow_bwd);
            rflow_fwd = resize_flow(refined_fwd, tap_t.h(), tap_t.w());
            warped_tk = warp(tap_t, rflow_fwd);
        } else {
            warped_t = Tensor4(tap_t.shape());
            warped_tk = Tensor4(tap_tk.shape());
        }
        comb_t_out[s] = combine(tap_t, warped_t, p.comb_t[s]);
        comb_tk_out[s] = combine(tap_tk, warped_tk, p.comb_tk[s]);
        if (cache) {
            cache->ex_t[s] = {std::move(rflow_bwd), std::move(warped_t), comb_t_out[s]};
            cache->ex_tk[s] = {std::move(rflow_fwd), std::move(warped_tk), comb_tk_out[s]};
        }
        in_t = comb_t_out[s];
        in_tk = comb_tk_out[s];
    }

    out.mask_t = run_decoder(p.decoder, comb_t_out[0], comb_t_out[1], comb_t_out[2],
                             frame_t.h(), frame_t.w(), cache ? &cache->dec_t : nullptr);
    out.mask_tk = run_decoder(p.decoder, comb_tk_out[0], comb_tk_out[1], comb_tk_out[2],
                              frame_t.h(), frame_t.w(), cache ? &cache->dec_tk : nullptr);
    if (cache) {
        cache->valid = true;
        cache->exchange = exchange;
        cache->frame_shape = frame_t.shape();
        cache->refined_fwd = std::move(refined_fwd);
        cache->refined_bwd = std::move(refined_bwd);
    }
    return out;
}

Tensor4 single_impl(const Tensor4& frame, const DetectorParams& p, bool batch_stats) {
    require(frame.c() == 3,
            "forward_single: frame must have 3 channels, got " + frame.shape().str());
    Tensor4 in = frame;
    std::array<Tensor4, 3> taps;
    for (int s = 0; s < 3; ++s) {
        taps[s] = run_stage(p.stages[s], in, batch_stats, nullptr);
        in = taps[s];
    }
    return run_decoder(p.decoder, taps[0], taps[1], taps[2], frame.h(), frame.w(), nullptr);
}

}  // namespace

PairMasks forward_pair(const Tensor4& frame_t, const Tensor4& frame_tk,
                       const FlowField& raw_flow_fwd, const FlowField& raw_flow_bwd,
                       const DetectorParams& params, PairCache* cache, bool exchange) {
    return pair_impl(frame_t, frame_tk, raw_flow_fwd, raw_flow_bwd, params, true, cache,
                     exchange);
}

PairMasks forward_pair_infer(const Tensor4& frame_t, const Tensor4& frame_tk,
                             const FlowField& raw_flow_fwd, const FlowField& raw_flow_bwd,
                             const DetectorParams& params) {
    return pair_impl(frame_t, frame_tk, raw_flow_fwd, raw_flow_bwd, params, false, nullptr,
                     true);
}

Tensor4 forward_single(const Tensor4& frame, const DetectorParams& params) {
    return single_impl(frame, params, true);
}

Tensor4 forward_single_infer(const Tensor4& frame, const DetectorParams& params) {
    return single_impl(frame, params, false);
}

namespace {

void accumulate_flowcnn(FlowCnnParams& dst, const FlowCnnParams& src) {
    add_into(dst.l1.weight, src.l1.weight);
    add_into(dst.l1.bias, src.l1.bias);
    add_into(dst.l2.weight, src.l2.weight);
    add_into(dst.l2.bias, src.l2.bias);
    add_into(dst.l3.weight, src.l3.weight);
    add_into(dst.l3.bias, src.l3.bias);
    add_into(dst.l4.weight, src.l4.weight);
    add_into(dst.l4.bias, src.l4.bias);
    add_into(dst.bn1.gamma, src.bn1.gamma);
    add_into(dst.bn1.beta, src.bn1.beta);
    add_into(dst.bn2.gamma, src.bn2.gamma);
    add_into(dst.bn2.beta, src.bn2.beta);
}

}  // namespace

DetectorGrads backward_pair(const PairCache& cache, const DetectorParams& params,
                            const Tensor4& grad_mask_t, const Tensor4& grad_mask_tk) {
    require(cache.valid, "backward_pair: cache does not hold a forward pass");
    require(grad_mask_t.same_shape(cache.dec_t.mask) && grad_mask_tk.same_shape(cache.dec_tk.mask),
            "backward_pair: mask gradient shapes do not match the cached forward");

    DetectorGrads g = zeros_like(params);
    const int fh = cache.frame_shape.h, fw = cache.frame_shape.w;

    DecoderInputGrads dt = backward_decoder(cache.dec_t, params.decoder, g.decoder, grad_mask_t);
    DecoderInputGrads dk =
        backward_decoder(cache.dec_tk, params.decoder, g.decoder, grad_mask_tk);
    std::array<Tensor4, 3> gcomb_t = {std::move(dt.low), std::move(dt.mid), std::move(dt.high)};
    std::array<Tensor4, 3> gcomb_tk = {std::move(dk.low), std::move(dk.mid), std::move(dk.high)};

    FlowField grefined_fwd(cache.frame_shape.n, fh, fw);
    FlowField grefined_bwd(cache.frame_shape.n, fh, fw);

    for (int s = 2; s >= 0; --s) {
        CombineGrads cgt = combine_backward(cache.stage_t[s].tap, cache.ex_t[s].warped,
                                            params.comb_t[s], gcomb_t[s]);
        add_into(g.comb_t[s].w1, cgt.w1);
        add_into(g.comb_t[s].w2, cgt.w2);
        CombineGrads cgk = combine_backward(cache.stage_tk[s].tap, cache.ex_tk[s].warped,
                                            params.comb_tk[s], gcomb_tk[s]);
        add_into(g.comb_tk[s].w1, cgk.w1);
        add_into(g.comb_tk[s].w2, cgk.w2);

        Tensor4 gtap_t = std::move(cgt.self);
        Tensor4 gtap_tk = std::move(cgk.self);
        if (cache.exchange) {
            // warped_t came from branch t+k's tap, and vice versa
            WarpGrads wt = warp_backward(cache.stage_tk[s].tap, cache.ex_t[s].rflow, cgt.warped);
            add_into(gtap_tk, wt.features);
            add_into(grefined_bwd.t, resize_flow_backward(wt.flow, fh, fw).t);
            WarpGrads wk = warp_backward(cache.stage_t[s].tap, cache.ex_tk[s].rflow, cgk.warped);
            add_into(gtap_t, wk.features);
            add_into(grefined_fwd.t, resize_flow_backward(wk.flow, fh, fw).t);
        }

        Tensor4 gin_t = backward_stage(cache.stage_t[s], params.stages[s], g.stages[s], gtap_t,
                                       s > 0);
        Tensor4 gin_tk = backward_stage(cache.stage_tk[s], params.stages[s], g.stages[s],
                                        gtap_tk, s > 0);
        if (s > 0) {
            add_into(gcomb_t[s - 1], gin_t);
            add_into(gcomb_tk[s - 1], gin_tk);
        }
    }

    if (cache.exchange) {
        FlowCnnGrads ff = flowcnn_backward(cache.fc_fwd, params.flowcnn, grefined_fwd);
        accumulate_flowcnn(g.flowcnn, ff.params);
        FlowCnnGrads fb = flowcnn_backward(cache.fc_bwd, params.flowcnn, grefined_bwd);
        accumulate_flowcnn(g.flowcnn, fb.params);
    }
    return g;
}

void update_running_stats_from_cache(DetectorParams& params, const PairCache& cache) {
    require(cache.valid, "update_running_stats_from_cache: cache does not hold a forward pass");
    if (cache.exchange) {
        ops::update_running_stats(params.flowcnn.bn1, cache.fc_fwd.s1, ops::kBnMomentum);
        ops::update_running_stats(params.flowcnn.bn2, cache.fc_fwd.s2, ops::kBnMomentum);
        ops::update_running_stats(params.flowcnn.bn1, cache.fc_bwd.s1, ops::kBnMomentum);
        ops::update_running_stats(params.flowcnn.bn2, cache.fc_bwd.s2, ops::kBnMomentum);
    }
    for (const auto* branch : {&cache.stage_t, &cache.stage_tk})
        for (int s = 0; s < 3; ++s) {
            ops::update_running_stats(params.stages[s].bn_a, (*branch)[s].sa, ops::kBnMomentum);
            ops::update_running_stats(params.stages[s].bn_b, (*branch)[s].sb, ops::kBnMomentum);
        }
}

// ---- checkpoints ------------------------------------------------------------

void save_checkpoint(const std::string& dir, const DetectorParams& params) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir + ": cannot create checkpoint directory: " + ec.message());

    DetectorParams& p = const_cast<DetectorParams&>(params);  // views only read here
    std::ostringstream manifest;
    manifest << "fgwarp-checkpoint v1\n";
    manifest << "width_low " << params.config.width_low << "\n";
    manifest << "width_mid " << params.config.width_mid << "\n";
    manifest << "width_high " << params.config.width_high << "\n";
    manifest << "stage_stride " << params.config.stage_stride << "\n";
    for (const ParamView& v : state_views(p)) {
        Tensor4 t = Tensor4::from_data(Shape4{1, 1, 1, int(v.size)},
                                       std::vector<double>(v.data, v.data + v.size));
        write_t4(fs::path(dir) / (v.name + ".t4"), t);
        manifest << "tensor " << v.name << "\n";
    }
    // the manifest is written last: its presence marks a complete checkpoint
    atomic_write_text(fs::path(dir) / "manifest.txt", manifest.str());
}

DetectorParams load_checkpoint(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::path(dir) / "manifest.txt";
    const std::vector<std::uint8_t> raw = read_file_bytes(manifest_path);
    std::istringstream in(std::string(raw.begin(), raw.end()));

    std::string line;
    if (!std::getline(in, line) || line != "fgwarp-checkpoint v1")
        throw IoError(manifest_path.string() + ": not a checkpoint manifest");

    BackboneConfig cfg;
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "width_low")
            ls >> cfg.width_low;
        else if (key == "width_mid")
            ls >> cfg.width_mid;
        else if (key == "width_high")
            ls >> cfg.width_high;
        else if (key == "stage_stride")
            ls >> cfg.stage_stride;
        else if (key == "tensor") {
            std::string name;
            ls >> name;
            names.push_back(name);
        } else
            throw IoError(manifest_path.string() + ": unknown manifest entry '" + key + "'");
        if (!ls) throw IoError(manifest_path.string() + ": malformed line '" + line + "'");
    }

    DetectorParams params(cfg);
    std::vector<ParamView> views = state_views(params);
    if (names.size() != views.size())
        throw IoError(manifest_path.string() + ": manifest lists " +
                      std::to_string(names.size()) + " tensors, checkpoint layout has " +
                      std::to_string(views.size()));
    for (std::size_t i = 0; i < views.size(); ++i) {
        if (names[i] != views[i].name)
            throw IoError(manifest_path.string() + ": tensor " + std::to_string(i) + " is '" +
                          names[i] + "', expected '" + views[i].name + "'");
        Tensor4 t = read_t4(fs::path(dir) / (names[i] + ".t4"));
        if (t.size() != views[i].size)
            throw IoError(dir + "/" + names[i] + ".t4: has " + std::to_string(t.size()) +
                          " values, expected " + std::to_string(views[i].size));
        std::copy_n(t.data(), t.size(), views[i].data);
    }
    return params;
}

}  // namespace fgwarp
