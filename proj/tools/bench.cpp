// Microbenchmark comparing the OpenMP kernels against the serial reference,
// plus an end-to-end training-iteration timing at the desk-scale experiment
// shape (64x64 frames, default widths). Throughput numbers size the runtime
// budget of the training experiments.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fgwarp/detector.hpp"
#include "fgwarp/flownet.hpp"
#include "fgwarp/flowwarp.hpp"
#include "fgwarp/ops.hpp"
#include "fgwarp/rng.hpp"
#include "fgwarp/synthdata.hpp"
#include "fgwarp/training.hpp"

using namespace fgwarp;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

// runs f repeatedly for ~200 ms and returns the per-call millisecond cost
double time_ms(const std::function<void()>& f) {
    f();  // warm-up
    int reps = 1;
    for (;;) {
        const double t0 = now_ms();
        for (int i = 0; i < reps; ++i) f();
        const double dt = now_ms() - t0;
        if (dt >= 200.0 || reps >= 1 << 20) return dt / reps;
        reps = dt < 1.0 ? reps * 16 : int(reps * 220.0 / dt) + 1;
    }
}

Tensor4 rand_tensor(Shape4 s, Rng& rng) {
    Tensor4 t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
    return t;
}

struct Row {
    std::string name;
    double serial_ms, omp_ms;
    double gflops;  // computed from the serial time when a flop count is known
};

void print_rows(const std::vector<Row>& rows) {
    std::printf("%-34s %12s %12s %9s %9s\n", "kernel", "serial ms", "openmp ms", "speedup",
                "GFLOP/s");
    for (const Row& r : rows) {
        std::printf("%-34s %12.3f %12.3f %8.2fx ", r.name.c_str(), r.serial_ms, r.omp_ms,
                    r.serial_ms / r.omp_ms);
        if (r.gflops > 0.0)
            std::printf("%9.2f\n", r.gflops);
        else
            std::printf("%9s\n", "-");
    }
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled (serial build)\n\n");
#endif

    Rng rng(42);
    std::vector<Row> rows;

    // conv at the FlowCNN hot shape: 16->16 3x3 on 64x64
    {
        const Tensor4 x = rand_tensor({1, 16, 64, 64}, rng);
        ConvParams p(16, 16, 3, 3, 1, 1);
        for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = rng.normal(0, 0.1);
        const Tensor4 gout = rand_tensor({1, 16, 64, 64}, rng);
        const double fwd_flops = 2.0 * 64 * 64 * 16 * 16 * 9;

        double s = time_ms([&] { ops::serial::conv2d_forward(x, p); });
        double o = time_ms([&] { ops::conv2d_forward(x, p); });
        rows.push_back({"conv2d fwd 16->16 3x3 64x64", s, o, fwd_flops / (o * 1e6)});

        s = time_ms([&] { ops::serial::conv2d_backward(x, p, gout); });
        o = time_ms([&] { ops::conv2d_backward(x, p, gout); });
        rows.push_back({"conv2d bwd 16->16 3x3 64x64", s, o, 3.0 * fwd_flops / (o * 1e6)});
    }

    // batch norm + relu at the same shape
    {
        const Tensor4 x = rand_tensor({1, 16, 64, 64}, rng);
        std::vector<double> gamma(16, 1.0), beta(16, 0.1);
        ops::BatchNormStats st;
        ops::batchnorm_forward(x, gamma, beta, ops::kBnEps, &st);
        const Tensor4 gout = rand_tensor({1, 16, 64, 64}, rng);

        double s = time_ms([&] { ops::serial::batchnorm_forward(x, gamma, beta, ops::kBnEps, nullptr); });
        double o = time_ms([&] { ops::batchnorm_forward(x, gamma, beta, ops::kBnEps, nullptr); });
        rows.push_back({"batchnorm fwd 16ch 64x64", s, o, 0.0});

        s = time_ms([&] { ops::serial::batchnorm_backward(gout, st, gamma); });
        o = time_ms([&] { ops::batchnorm_backward(gout, st, gamma); });
        rows.push_back({"batchnorm bwd 16ch 64x64", s, o, 0.0});

        s = time_ms([&] { ops::serial::relu_forward(x); });
        o = time_ms([&] { ops::relu_forward(x); });
        rows.push_back({"relu fwd 16ch 64x64", s, o, 0.0});
    }

    // warp + resize at the exchange shapes
    {
        const Tensor4 f = rand_tensor({1, 16, 32, 32}, rng);
        FlowField flow(1, 32, 32);
        for (std::size_t i = 0; i < flow.t.size(); ++i) flow.t.data()[i] = rng.uniform(-2.0, 2.0);
        const Tensor4 gout = rand_tensor({1, 16, 32, 32}, rng);

        double s = time_ms([&] { serial::warp(f, flow); });
        double o = time_ms([&] { warp(f, flow); });
        rows.push_back({"warp fwd 16ch 32x32", s, o, 0.0});

        s = time_ms([&] { serial::warp_backward(f, flow, gout); });
        o = time_ms([&] { warp_backward(f, flow, gout); });
        rows.push_back({"warp bwd 16ch 32x32", s, o, 0.0});

        const Tensor4 img = rand_tensor({1, 16, 64, 64}, rng);
        s = time_ms([&] { ops::serial::resize_bilinear(img, 32, 32); });
        o = time_ms([&] { ops::resize_bilinear(img, 32, 32); });
        rows.push_back({"resize 64x64 -> 32x32 16ch", s, o, 0.0});
    }

    // block matching on a frame pair
    {
        const Tensor4 a = rand_tensor({1, 3, 64, 64}, rng);
        const Tensor4 b = rand_tensor({1, 3, 64, 64}, rng);
        double s = -1.0, o = time_ms([&] { estimate_flow_blockmatch(a, b); });
        rows.push_back({"blockmatch 64x64 b8 s8 (omp only)", o, o, 0.0});
        (void)s;
    }

    print_rows(rows);

    // end-to-end: one desk-scale training iteration (forward + backward +
    // update) on the default detector, with and without the feature exchange
    {
        SceneSpec spec = make_scene("fast-motion", 64, 4, rng);
        RenderedVideo video = render_video(spec);
        Dataset ds;
        ds.videos.push_back({"bench", video.frames, video.masks, video.flows});

        TrainConfig cfg;
        cfg.max_iters = 1;
        cfg.seed = 7;
        for (bool exchange : {true, false}) {
            const double ms = time_ms([&] { train(ds, cfg, BackboneConfig{}, exchange); });
            std::printf("\ntrain iteration 64x64 (%s): %.1f ms  (~%.1f s / 2000 iters)",
                        exchange ? "full model" : "no exchange", ms, ms * 2.0);
        }
        std::printf("\n");
    }
    return 0;
}
