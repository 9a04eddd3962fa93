// fgwarp command-line tool: dataset generation, training, evaluation,
// inference, and flow/warp demonstrations on top of the library.
//
// Exit codes: 0 success, 2 usage or bad configuration, 3 I/O failure,
// 4 numeric failure during optimization. Output files are staged and renamed,
// so failed runs leave no partial outputs.
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fgwarp/dataset.hpp"
#include "fgwarp/detector.hpp"
#include "fgwarp/eval.hpp"
#include "fgwarp/flownet.hpp"
#include "fgwarp/image_io.hpp"
#include "fgwarp/io_util.hpp"
#include "fgwarp/ops.hpp"
#include "fgwarp/synthdata.hpp"
#include "fgwarp/training.hpp"

namespace fs = std::filesystem;
using namespace fgwarp;

namespace {

constexpr int kExitUsage = 2, kExitIo = 3, kExitNumeric = 4;

struct GenArgs {
    std::string out, preset = "default";
    int videos = 1, frames = 4, size = 64;
};

struct TrainArgs {
    std::string data, config, out;
    bool no_fgwarp = false;
    std::optional<int> max_iters;
    std::optional<int> input_size;
};

struct EvalArgs {
    std::string data, ckpt, out, dump_masks;
    bool oracle = false, oracle_invert = false;
    int input_size = 64;
};

struct InferArgs {
    std::string data, ckpt, out;
    bool binarize_masks = false;
    int input_size = 64;
};

struct WarpDemoArgs {
    std::string frame_a, frame_b, flo, ckpt, out;
};

struct RefineArgs {
    std::string flo, frame_a, frame_b, ckpt, out;
};

int run_gen_data(const GenArgs& a, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> names;
    std::vector<RenderedVideo> videos;
    for (int v = 0; v < a.videos; ++v) {
        char name[16];
        std::snprintf(name, sizeof name, "v%03d", v);
        names.emplace_back(name);
        videos.push_back(render_video(make_scene(a.preset, a.size, a.frames, rng)));
    }
    const fs::path manifest = write_dataset(names, videos, a.out);
    std::printf("%s\n", manifest.string().c_str());
    return 0;
}

// the trace is written before the checkpoint, whose manifest arriving last
// marks the whole output directory complete
int run_train(const TrainArgs& a, std::optional<std::uint64_t> seed) {
    TrainFileConfig cfg;
    if (!a.config.empty()) cfg = read_train_config(a.config);
    if (seed) cfg.train.seed = *seed;
    if (a.max_iters) cfg.train.max_iters = *a.max_iters;
    if (a.input_size) cfg.train.input_size = *a.input_size;

    const Dataset ds = load_dataset(a.data);
    const TrainResult result =
        train(ds, cfg.train, cfg.backbone, !a.no_fgwarp, &std::cout);

    fs::create_directories(a.out);
    atomic_write_text(fs::path(a.out) / "loss_trace.txt", format_loss_trace(result.loss_trace));
    save_checkpoint(a.out, result.params);
    std::printf("checkpoint %s (%d iterations)\n", a.out.c_str(),
                int(result.loss_trace.size()));
    return 0;
}

int run_eval(const EvalArgs& a) {
    const Dataset ds = load_dataset(a.data);

    EvalResult result;
    if (a.oracle || a.oracle_invert) {
        // score the ground truth (or its inversion) as the prediction; an
        // end-to-end check of the metric path without a model
        ConfusionCounts pooled;
        for (const VideoData& vid : ds.videos) {
            ConfusionCounts vc;
            for (const Tensor4& m : vid.masks) {
                Tensor4 pred = binarize(m);
                if (a.oracle_invert)
                    for (std::size_t i = 0; i < pred.size(); ++i)
                        pred.data()[i] = 1.0 - pred.data()[i];
                accumulate_confusion(pred, binarize(m), vc);
            }
            result.per_video.push_back(compute_ber(vc));
            pooled += vc;
            result.frames += int(vid.masks.size());
        }
        result.report = compute_ber(pooled);
    } else {
        if (!fs::exists(fs::path(a.ckpt) / "manifest.txt"))
            throw std::invalid_argument("no checkpoint at " + a.ckpt);
        const DetectorParams params = load_checkpoint(a.ckpt);
        result = evaluate_dataset(ds, params, a.input_size);
        if (!a.dump_masks.empty()) {
            const DetectorParams& p = params;
            for (const VideoData& vid : ds.videos) {
                const fs::path vdir = fs::path(a.dump_masks) / vid.name;
                fs::create_directories(vdir);
                const std::vector<Tensor4> masks = infer_video(vid, p, a.input_size);
                for (std::size_t t = 0; t < masks.size(); ++t) {
                    char name[16];
                    std::snprintf(name, sizeof name, "%04d.pgm", int(t));
                    write_pgm(vdir / name, binarize(masks[t]));
                }
            }
        }
    }

    const std::string report = format_report(result);
    atomic_write_text(a.out, report);
    std::fputs(report.c_str(), stdout);
    return 0;
}

int run_infer(const InferArgs& a) {
    const Dataset ds = load_dataset(a.data);
    const DetectorParams params = load_checkpoint(a.ckpt);
    for (const VideoData& vid : ds.videos) {
        const fs::path vdir = fs::path(a.out) / vid.name;
        fs::create_directories(vdir);
        const std::vector<Tensor4> masks = infer_video(vid, params, a.input_size);
        for (std::size_t t = 0; t < masks.size(); ++t) {
            char name[16];
            std::snprintf(name, sizeof name, "%04d.pgm", int(t));
            write_pgm(vdir / name, a.binarize_masks ? binarize(masks[t]) : masks[t]);
        }
        std::printf("%s: %d masks\n", vid.name.c_str(), int(masks.size()));
    }
    return 0;
}

// shared by warp-demo and flow-refine: raw flow on frame b's grid (file or
// block matching), optionally refined by a checkpoint's FlowCNN
FlowField demo_flow(const std::string& flo, const Tensor4& frame_a, const Tensor4& frame_b,
                    const std::string& ckpt) {
    FlowField raw = flo.empty() ? estimate_flow_blockmatch(frame_b, frame_a) : read_flo(flo);
    require(raw.h() == frame_a.h() && raw.w() == frame_a.w(),
            "flow resolution " + raw.t.shape().str() + " does not match the frames");
    if (ckpt.empty()) return raw;
    const DetectorParams params = load_checkpoint(ckpt);
    return flowcnn_infer(raw, frame_b, frame_a, params.flowcnn);
}

int run_warp_demo(const WarpDemoArgs& a) {
    const Tensor4 frame_a = read_image(a.frame_a);
    const Tensor4 frame_b = read_image(a.frame_b);
    require(frame_a.same_shape(frame_b), "frames must share a resolution");
    require(frame_a.c() == 3, "warp-demo expects RGB frames");

    const FlowField flow = demo_flow(a.flo, frame_a, frame_b, a.ckpt);
    const Tensor4 warped = warp(frame_a, flow);

    // absolute difference against frame b, averaged over channels
    Tensor4 heat(1, 1, frame_a.h(), frame_a.w());
    for (int y = 0; y < frame_a.h(); ++y)
        for (int x = 0; x < frame_a.w(); ++x) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c)
                d += std::abs(warped.at(0, c, y, x) - frame_b.at(0, c, y, x));
            heat.at(0, 0, y, x) = d / 3.0;
        }

    fs::create_directories(a.out);
    write_ppm(fs::path(a.out) / "warped.ppm", warped);
    write_pgm(fs::path(a.out) / "heatmap.pgm", heat);
    std::printf("%s\n", a.out.c_str());
    return 0;
}

int run_flow_refine(const RefineArgs& a) {
    const Tensor4 frame_a = read_image(a.frame_a);
    const Tensor4 frame_b = read_image(a.frame_b);
    require(frame_a.same_shape(frame_b), "frames must share a resolution");
    const FlowField refined = demo_flow(a.flo, frame_a, frame_b, a.ckpt);
    write_flo(a.out, refined);
    std::printf("%s\n", a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flow-guided temporal feature warping for video shadow detection"};
    app.require_subcommand(1);
    std::uint64_t seed = 1;
    app.add_option("--seed", seed, "global RNG seed");

    GenArgs gen;
    auto* cgen = app.add_subcommand("gen-data", "generate a synthetic moving-shadow dataset");
    cgen->add_option("--out", gen.out, "output dataset directory")->required();
    cgen->add_option("--preset", gen.preset, "default | small-shadow | fast-motion")
        ->check(CLI::IsMember({"default", "small-shadow", "fast-motion"}));
    cgen->add_option("--videos", gen.videos, "video count")->check(CLI::PositiveNumber);
    cgen->add_option("--frames", gen.frames, "frames per video")->check(CLI::Range(2, 10000));
    cgen->add_option("--size", gen.size, "square canvas size")->check(CLI::Range(24, 4096));

    TrainArgs tr;
    auto* ctrain = app.add_subcommand("train", "train a detector");
    ctrain->add_option("--data", tr.data, "dataset directory")->required();
    ctrain->add_option("--config", tr.config, "key = value config file");
    ctrain->add_option("--out", tr.out, "checkpoint output directory")->required();
    ctrain->add_flag("--no-fgwarp", tr.no_fgwarp,
                     "ablation: disable the feature exchange and freeze the flow refiner");
    int tr_iters = 0, tr_size = 0;
    ctrain->add_option("--iters", tr_iters, "override max_iters")->check(CLI::NonNegativeNumber);
    ctrain->add_option("--input-size", tr_size, "override input_size")->check(CLI::Range(8, 4096));

    EvalArgs ev;
    auto* ceval = app.add_subcommand("eval", "evaluate a checkpoint (balanced error rate)");
    ceval->add_option("--data", ev.data, "dataset directory")->required();
    ceval->add_option("--ckpt", ev.ckpt, "checkpoint directory");
    ceval->add_option("--out", ev.out, "report file")->required();
    ceval->add_option("--dump-masks", ev.dump_masks, "directory for binarized masks");
    ceval->add_flag("--oracle", ev.oracle, "score ground truth as the prediction");
    ceval->add_flag("--oracle-invert", ev.oracle_invert, "score inverted ground truth");
    ceval->add_option("--input-size", ev.input_size, "network input size")
        ->check(CLI::Range(8, 4096));

    InferArgs inf;
    auto* cinfer = app.add_subcommand("infer", "write per-frame shadow masks");
    cinfer->add_option("--data", inf.data, "dataset directory")->required();
    cinfer->add_option("--ckpt", inf.ckpt, "checkpoint directory")->required();
    cinfer->add_option("--out", inf.out, "output directory")->required();
    cinfer->add_flag("--binarize", inf.binarize_masks, "threshold masks at 0.5");
    cinfer->add_option("--input-size", inf.input_size, "network input size")
        ->check(CLI::Range(8, 4096));

    WarpDemoArgs wd;
    auto* cwarp = app.add_subcommand("warp-demo", "warp frame A toward frame B");
    cwarp->add_option("--frame-a", wd.frame_a, "source frame (PPM)")->required();
    cwarp->add_option("--frame-b", wd.frame_b, "target frame (PPM)")->required();
    cwarp->add_option("--flo", wd.flo, "flow file for the pair (block matching when absent)");
    cwarp->add_option("--ckpt", wd.ckpt, "checkpoint whose flow refiner is applied");
    cwarp->add_option("--out", wd.out, "output directory")->required();

    RefineArgs rf;
    auto* crefine = app.add_subcommand("flow-refine", "run the flow refiner on a flow field");
    crefine->add_option("--flo", rf.flo, "input flow file")->required();
    crefine->add_option("--frame-a", rf.frame_a, "source frame (PPM)")->required();
    crefine->add_option("--frame-b", rf.frame_b, "target frame (PPM)")->required();
    crefine->add_option("--ckpt", rf.ckpt, "checkpoint directory")->required();
    crefine->add_option("--out", rf.out, "output .flo path")->required();

    // global flags (--seed) may appear after the subcommand name
    for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (cgen->parsed()) return run_gen_data(gen, seed);
        if (ctrain->parsed()) {
            if (ctrain->count("--iters")) tr.max_iters = tr_iters;
            if (ctrain->count("--input-size")) tr.input_size = tr_size;
            const bool seed_given = app.count("--seed") > 0;
            return run_train(tr, seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
        }
        if (ceval->parsed()) {
            if (ev.oracle && ev.oracle_invert)
                throw std::invalid_argument("--oracle and --oracle-invert are exclusive");
            if (!ev.oracle && !ev.oracle_invert && ev.ckpt.empty())
                throw std::invalid_argument("eval needs --ckpt (or an --oracle mode)");
            return run_eval(ev);
        }
        if (cinfer->parsed()) return run_infer(inf);
        if (cwarp->parsed()) return run_warp_demo(wd);
        if (crefine->parsed()) return run_flow_refine(rf);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return kExitUsage;
}
