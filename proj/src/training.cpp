#include "fgwarp/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fgwarp/flownet.hpp"
#include "fgwarp/io_util.hpp"
#include "fgwarp/ops.hpp"

namespace fgwarp {

void TrainConfig::validate() const {
    require(base_lr > 0.0, "TrainConfig: base_lr must be positive");
    require(poly_power > 0.0, "TrainConfig: poly_power must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "TrainConfig: momentum must lie in [0,1)");
    require(weight_decay >= 0.0, "TrainConfig: weight_decay must be >= 0");
    require(max_iters >= 0, "TrainConfig: max_iters must be >= 0");
    require(k >= 1, "TrainConfig: k must be >= 1");
    require(input_size >= 8, "TrainConfig: input_size must be >= 8");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size())
        throw std::invalid_argument("config: bad value '" + v + "' for " + key);
    return x;
}

long long parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size())
        throw std::invalid_argument("config: bad integer '" + v + "' for " + key);
    return x;
}

}  // namespace

TrainFileConfig parse_train_config(const std::string& text) {
    TrainFileConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");

        if (key == "base_lr")
            cfg.train.base_lr = parse_real(key, val);
        else if (key == "momentum")
            cfg.train.momentum = parse_real(key, val);
        else if (key == "weight_decay")
            cfg.train.weight_decay = parse_real(key, val);
        else if (key == "poly_power")
            cfg.train.poly_power = parse_real(key, val);
        else if (key == "max_iters")
            cfg.train.max_iters = int(parse_int(key, val));
        else if (key == "k")
            cfg.train.k = int(parse_int(key, val));
        else if (key == "input_size")
            cfg.train.input_size = int(parse_int(key, val));
        else if (key == "seed")
            cfg.train.seed = std::uint64_t(parse_int(key, val));
        else if (key == "width_low")
            cfg.backbone.width_low = int(parse_int(key, val));
        else if (key == "width_mid")
            cfg.backbone.width_mid = int(parse_int(key, val));
        else if (key == "width_high")
            cfg.backbone.width_high = int(parse_int(key, val));
        else
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": unknown key '" + key + "'");
    }
    cfg.train.validate();
    cfg.backbone.validate();
    return cfg;
}

TrainFileConfig read_train_config(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    return parse_train_config(std::string(bytes.begin(), bytes.end()));
}

double poly_lr(int iter, const TrainConfig& cfg) {
    require(cfg.max_iters >= 1, "poly_lr: max_iters must be >= 1");
    require(iter >= 0 && iter <= cfg.max_iters,
            "poly_lr: iter " + std::to_string(iter) + " outside [0, " +
                std::to_string(cfg.max_iters) + "]");
    return cfg.base_lr * std::pow(1.0 - double(iter) / cfg.max_iters, cfg.poly_power);
}

void sgd_update(double* param, const double* grad, double* velocity, std::size_t size, double lr,
                double momentum, double decay) {
    for (std::size_t i = 0; i < size; ++i) {
        const double g = grad[i] + decay * param[i];
        velocity[i] = momentum * velocity[i] + g;
        param[i] -= lr * velocity[i];
    }
}

void sgd_step(DetectorParams& params, const DetectorGrads& grads, OptimState& state, double lr,
              const TrainConfig& cfg, bool skip_flowcnn) {
    auto pv = param_views(params);
    auto gv = param_views(const_cast<DetectorGrads&>(grads));
    auto vv = param_views(state.velocity);
    require(pv.size() == gv.size() && pv.size() == vv.size(),
            "sgd_step: parameter/gradient/velocity registries differ");
    for (std::size_t s = 0; s < pv.size(); ++s) {
        require(pv[s].size == gv[s].size && pv[s].size == vv[s].size,
                "sgd_step: size mismatch on " + pv[s].name);
        if (skip_flowcnn && pv[s].name.starts_with("flowcnn.")) continue;
        sgd_update(pv[s].data, gv[s].data, vv[s].data, pv[s].size, lr, cfg.momentum,
                   pv[s].decay ? cfg.weight_decay : 0.0);
    }
    ++state.iter;
}

namespace {

FlowField negated(const FlowField& f) {
    FlowField out(f.n(), f.h(), f.w());
    for (std::size_t i = 0; i < f.t.size(); ++i) out.t.data()[i] = -f.t.data()[i];
    return out;
}

}  // namespace

FramePair sample_pair(const Dataset& ds, const TrainConfig& cfg, Rng& rng) {
    require(!ds.videos.empty(), "sample_pair: empty dataset");
    FramePair pair;
    pair.video = int(rng.uniform_int(0, std::int64_t(ds.videos.size()) - 1));
    const VideoData& vid = ds.videos[std::size_t(pair.video)];
    const int pairs = int(vid.frames.size()) - cfg.k;
    require(pairs >= 1, "sample_pair: video '" + vid.name + "' has " +
                            std::to_string(vid.frames.size()) + " frames, need > k = " +
                            std::to_string(cfg.k));
    pair.t = int(rng.uniform_int(0, pairs - 1));

    const int s = cfg.input_size;
    pair.frame_t = ops::resize_bilinear(vid.frames[std::size_t(pair.t)], s, s);
    pair.frame_tk = ops::resize_bilinear(vid.frames[std::size_t(pair.t + cfg.k)], s, s);
    pair.gt_t = ops::resize_bilinear(vid.masks[std::size_t(pair.t)], s, s);
    pair.gt_tk = ops::resize_bilinear(vid.masks[std::size_t(pair.t + cfg.k)], s, s);

    if (cfg.k == 1 && !vid.flows.empty()) {
        pair.flow_fwd = resize_flow(vid.flows[std::size_t(pair.t)], s, s);
        pair.flow_bwd = negated(pair.flow_fwd);
    } else {
        pair.flow_fwd = estimate_flow_blockmatch(pair.frame_tk, pair.frame_t);
        pair.flow_bwd = estimate_flow_blockmatch(pair.frame_t, pair.frame_tk);
    }
    return pair;
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const BackboneConfig& backbone,
                  bool exchange, std::ostream* log) {
    cfg.validate();
    backbone.validate();
    require(!ds.videos.empty(), "train: empty dataset");
    for (const VideoData& v : ds.videos)
        require(int(v.frames.size()) > cfg.k,
                "train: video '" + v.name + "' is shorter than k+1 frames");

    Rng rng(cfg.seed);
    TrainResult result;
    result.params = init_detector_params(backbone, rng);
    OptimState state(result.params);

    for (int it = 0; it < cfg.max_iters; ++it) {
        const FramePair pair = sample_pair(ds, cfg, rng);
        PairCache cache;
        const PairMasks masks = forward_pair(pair.frame_t, pair.frame_tk, pair.flow_fwd,
                                             pair.flow_bwd, result.params, &cache, exchange);
        auto [loss_t, grad_t] = ops::mse_loss(masks.mask_t, pair.gt_t);
        auto [loss_tk, grad_tk] = ops::mse_loss(masks.mask_tk, pair.gt_tk);
        const double loss = loss_t + loss_tk;
        if (!std::isfinite(loss))
            throw NumericError("train: non-finite loss at iteration " + std::to_string(it));

        const DetectorGrads grads = backward_pair(cache, result.params, grad_t, grad_tk);
        sgd_step(result.params, grads, state, poly_lr(it, cfg), cfg, !exchange);
        update_running_stats_from_cache(result.params, cache);
        result.loss_trace.push_back(loss);
        if (log) {
            char line[96];
            std::snprintf(line, sizeof line, "iter %d lr %.6g loss %.10g\n", it, poly_lr(it, cfg),
                          loss);
            *log << line;
        }
    }
    return result;
}

std::string format_loss_trace(const std::vector<double>& trace) {
    std::string out;
    char buf[40];
    for (double v : trace) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out += buf;
    }
    return out;
}

}  // namespace fgwarp
