#include "fgwarp/flownet.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "fgwarp/io_util.hpp"

namespace fgwarp {

namespace {

constexpr int kFlowCnnWidth = 16;
constexpr float kFloMagic = 202021.25f;

// grayscale plane (RGB mean) of batch entry b
std::vector<double> gray_plane(const Tensor4& frame, int b) {
    const int H = frame.h(), W = frame.w();
    std::vector<double> g(std::size_t(H) * W);
    const double* r = frame.data() + frame.plane(b, 0);
    const double* gg = frame.data() + frame.plane(b, 1);
    const double* bb = frame.data() + frame.plane(b, 2);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (r[i] + gg[i] + bb[i]) / 3.0;
    return g;
}

}  // namespace

FlowField estimate_flow_blockmatch(const Tensor4& anchor, const Tensor4& source, int block,
                                   int search) {
    require(anchor.same_shape(source), "blockmatch: frame shapes differ, " + anchor.shape().str() +
                                           " vs " + source.shape().str());
    require(anchor.c() == 3, "blockmatch: frames must have 3 channels, got " + anchor.shape().str());
    require(block >= 1, "blockmatch: block must be >= 1");
    require(search >= 0, "blockmatch: search must be >= 0");
    const int N = anchor.n(), H = anchor.h(), W = anchor.w();
    require(block <= H && block <= W, "blockmatch: block " + std::to_string(block) +
                                          " larger than frame " + std::to_string(H) + "x" +
                                          std::to_string(W));

    FlowField flow(N, H, W);
    const int by_count = (H + block - 1) / block;
    const int bx_count = (W + block - 1) / block;

    for (int b = 0; b < N; ++b) {
        const std::vector<double> ga = gray_plane(anchor, b);
        const std::vector<double> gs = gray_plane(source, b);

#pragma omp parallel for collapse(2) schedule(static)
        for (int by = 0; by < by_count; ++by)
            for (int bx = 0; bx < bx_count; ++bx) {
                const int y0 = by * block, x0 = bx * block;
                const int bh = std::min(block, H - y0), bw = std::min(block, W - x0);

                double best_sad = 0.0;
                int best_du = 0, best_dv = 0;
                bool first = true;
                for (int dv = -search; dv <= search; ++dv)
                    for (int du = -search; du <= search; ++du) {
                        double sad = 0.0;
                        for (int y = 0; y < bh; ++y) {
                            const int sy = y0 + y + dv;
                            const double* ar = ga.data() + std::size_t(y0 + y) * W;
                            const double* sr = (sy >= 0 && sy < H)
                                                   ? gs.data() + std::size_t(sy) * W
                                                   : nullptr;
                            for (int x = 0; x < bw; ++x) {
                                const int sx = x0 + x + du;
                                const double sv =
                                    (sr && sx >= 0 && sx < W) ? sr[sx] : 0.0;
                                sad += std::abs(ar[x0 + x] - sv);
                            }
                        }
                        const long mag = long(du) * du + long(dv) * dv;
                        const long best_mag = long(best_du) * best_du + long(best_dv) * best_dv;
                        const bool better =
                            first || sad < best_sad ||
                            (sad == best_sad &&
                             (mag < best_mag ||
                              (mag == best_mag &&
                               (du < best_du || (du == best_du && dv < best_dv)))));
                        if (better) {
                            best_sad = sad;
                            best_du = du;
                            best_dv = dv;
                            first = false;
                        }
                    }

                for (int y = 0; y < bh; ++y)
                    for (int x = 0; x < bw; ++x) {
                        flow.u(b, y0 + y, x0 + x) = double(best_du);
                        flow.v(b, y0 + y, x0 + x) = double(best_dv);
                    }
            }
    }
    return flow;
}

FlowCnnParams::FlowCnnParams()
    : l1(kFlowCnnWidth, 9, 3, 3, 1, 1),
      l2(kFlowCnnWidth, kFlowCnnWidth, 3, 3, 1, 1),
      l3(kFlowCnnWidth, kFlowCnnWidth, 3, 3, 1, 1),
      l4(2, kFlowCnnWidth + 2, 3, 3, 1, 1),
      bn1(kFlowCnnWidth),
      bn2(kFlowCnnWidth) {}

namespace {

void he_init(Tensor4& w, Rng& rng) {
    const double stddev = std::sqrt(2.0 / (double(w.c()) * w.h() * w.w()));
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.normal(0.0, stddev);
}

}  // namespace

FlowCnnParams init_flowcnn_params(Rng& rng) {
    FlowCnnParams p;
    he_init(p.l1.weight, rng);
    he_init(p.l2.weight, rng);
    he_init(p.l3.weight, rng);
    // L4 passthrough: output u reads skip channel 16, output v channel 17
    p.l4.weight.at(0, kFlowCnnWidth + 0, 1, 1) = 1.0;
    p.l4.weight.at(1, kFlowCnnWidth + 1, 1, 1) = 1.0;
    return p;
}

namespace {

// [raw u, raw v, anchor RGB, source RGB, mean |anchor - source|]
Tensor4 stack_flowcnn_input(const FlowField& raw, const Tensor4& a, const Tensor4& b) {
    require(a.same_shape(b), "flowcnn: frame shapes differ, " + a.shape().str() + " vs " +
                                 b.shape().str());
    require(a.c() == 3, "flowcnn: frames must have 3 channels, got " + a.shape().str());
    require(raw.n() == a.n() && raw.h() == a.h() && raw.w() == a.w(),
            "flowcnn: flow grid " + raw.t.shape().str() + " does not match frames " +
                a.shape().str());
    const int N = a.n(), H = a.h(), W = a.w();
    const std::size_t hw = std::size_t(H) * W;
    Tensor4 in(N, 9, H, W);
    for (int n = 0; n < N; ++n) {
        double* dst = in.data() + in.plane(n, 0);
        std::memcpy(dst, raw.t.data() + raw.t.plane(n, 0), 2 * hw * sizeof(double));
        std::memcpy(dst + 2 * hw, a.data() + a.plane(n, 0), 3 * hw * sizeof(double));
        std::memcpy(dst + 5 * hw, b.data() + b.plane(n, 0), 3 * hw * sizeof(double));
        double* diff = dst + 8 * hw;
        const double* ap = a.data() + a.plane(n, 0);
        const double* bp = b.data() + b.plane(n, 0);
        for (std::size_t i = 0; i < hw; ++i)
            diff[i] = (std::abs(ap[i] - bp[i]) + std::abs(ap[i + hw] - bp[i + hw]) +
                       std::abs(ap[i + 2 * hw] - bp[i + 2 * hw])) /
                      3.0;
    }
    return in;
}

}  // namespace

FlowField flowcnn_forward(const FlowField& raw_flow, const Tensor4& frame_anchor,
                          const Tensor4& frame_source, const FlowCnnParams& p,
                          FlowCnnCache* cache) {
    Tensor4 input = stack_flowcnn_input(raw_flow, frame_anchor, frame_source);
    Tensor4 h1 = ops::conv2d_forward(input, p.l1);
    ops::BatchNormStats s1;
    Tensor4 b1 = ops::batchnorm_forward(h1, p.bn1.gamma, p.bn1.beta, ops::kBnEps, &s1);
    Tensor4 r1 = ops::relu_forward(b1);
    Tensor4 h2 = ops::conv2d_forward(r1, p.l2);
    ops::BatchNormStats s2;
    Tensor4 b2 = ops::batchnorm_forward(h2, p.bn2.gamma, p.bn2.beta, ops::kBnEps, &s2);
    Tensor4 r2 = ops::relu_forward(b2);
    Tensor4 h3 = ops::conv2d_forward(r2, p.l3);
    Tensor4 cat = ops::concat_channels(h3, raw_flow.t);
    Tensor4 refined = ops::conv2d_forward(cat, p.l4);
    if (cache) {
        cache->input = std::move(input);
        cache->b1 = std::move(b1);
        cache->r1 = std::move(r1);
        cache->b2 = std::move(b2);
        cache->r2 = std::move(r2);
        cache->cat = std::move(cat);
        cache->s1 = std::move(s1);
        cache->s2 = std::move(s2);
    }
    return FlowField(std::move(refined));
}

FlowField flowcnn_infer(const FlowField& raw_flow, const Tensor4& frame_anchor,
                        const Tensor4& frame_source, const FlowCnnParams& p) {
    Tensor4 input = stack_flowcnn_input(raw_flow, frame_anchor, frame_source);
    Tensor4 r1 = ops::relu_forward(
        ops::batchnorm_infer(ops::conv2d_forward(input, p.l1), p.bn1, ops::kBnEps));
    Tensor4 r2 = ops::relu_forward(
        ops::batchnorm_infer(ops::conv2d_forward(r1, p.l2), p.bn2, ops::kBnEps));
    Tensor4 cat = ops::concat_channels(ops::conv2d_forward(r2, p.l3), raw_flow.t);
    return FlowField(ops::conv2d_forward(cat, p.l4));
}

FlowCnnGrads flowcnn_backward(const FlowCnnCache& cache, const FlowCnnParams& p,
                              const FlowField& grad_refined) {
    require(cache.cat.n() == grad_refined.n() && cache.cat.h() == grad_refined.h() &&
                cache.cat.w() == grad_refined.w(),
            "flowcnn_backward: gradient grid " + grad_refined.t.shape().str() +
                " does not match cache " + cache.cat.shape().str());

    FlowCnnGrads g;
    ops::ConvGrads c4 = ops::conv2d_backward(cache.cat, p.l4, grad_refined.t);
    g.params.l4.weight = std::move(c4.weight);
    g.params.l4.bias = std::move(c4.bias);
    Tensor4 grad_h3 = ops::slice_channels(c4.input, 0, kFlowCnnWidth);
    Tensor4 grad_raw_skip = ops::slice_channels(c4.input, kFlowCnnWidth, kFlowCnnWidth + 2);

    ops::ConvGrads c3 = ops::conv2d_backward(cache.r2, p.l3, grad_h3);
    g.params.l3.weight = std::move(c3.weight);
    g.params.l3.bias = std::move(c3.bias);

    Tensor4 grad_b2 = ops::relu_backward(cache.b2, c3.input);
    ops::BatchNormGrads n2 = ops::batchnorm_backward(grad_b2, cache.s2, p.bn2.gamma);
    g.params.bn2.gamma = std::move(n2.gamma);
    g.params.bn2.beta = std::move(n2.beta);

    ops::ConvGrads c2 = ops::conv2d_backward(cache.r1, p.l2, n2.input);
    g.params.l2.weight = std::move(c2.weight);
    g.params.l2.bias = std::move(c2.bias);

    Tensor4 grad_b1 = ops::relu_backward(cache.b1, c2.input);
    ops::BatchNormGrads n1 = ops::batchnorm_backward(grad_b1, cache.s1, p.bn1.gamma);
    g.params.bn1.gamma = std::move(n1.gamma);
    g.params.bn1.beta = std::move(n1.beta);

    ops::ConvGrads c1 = ops::conv2d_backward(cache.input, p.l1, n1.input);
    g.params.l1.weight = std::move(c1.weight);
    g.params.l1.bias = std::move(c1.bias);

    // raw flow feeds the net twice: input channels 0-1 and the L4 skip concat
    Tensor4 grad_raw_in = ops::slice_channels(c1.input, 0, 2);
    for (std::size_t i = 0; i < grad_raw_in.size(); ++i)
        grad_raw_in.data()[i] += grad_raw_skip.data()[i];
    g.raw_flow = FlowField(std::move(grad_raw_in));
    return g;
}

// ---- .flo I/O --------------------------------------------------------------

FlowField read_flo(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 12) throw IoError(path + ": truncated .flo header");
    const float magic = std::bit_cast<float>(get_u32(bytes.data()));
    if (magic != kFloMagic)
        throw IoError(path + ": bad .flo magic " + std::to_string(magic));
    const std::int32_t w = std::int32_t(get_u32(bytes.data() + 4));
    const std::int32_t h = std::int32_t(get_u32(bytes.data() + 8));
    if (w <= 0 || h <= 0 || w > 1 << 20 || h > 1 << 20)
        throw IoError(path + ": bad .flo dimensions " + std::to_string(w) + "x" +
                      std::to_string(h));
    const std::size_t want = 12 + std::size_t(w) * std::size_t(h) * 8;
    if (bytes.size() != want)
        throw IoError(path + ": .flo size " + std::to_string(bytes.size()) + ", expected " +
                      std::to_string(want));

    FlowField flow(1, h, w);
    const std::uint8_t* p = bytes.data() + 12;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            flow.u(0, y, x) = double(std::bit_cast<float>(get_u32(p)));
            flow.v(0, y, x) = double(std::bit_cast<float>(get_u32(p + 4)));
            p += 8;
        }
    return flow;
}

void write_flo(const std::string& path, const FlowField& flow) {
    require(flow.n() == 1, "write_flo: batch size must be 1, got " + flow.t.shape().str());
    std::vector<std::uint8_t> bytes;
    bytes.reserve(12 + std::size_t(flow.h()) * flow.w() * 8);
    put_u32(bytes, std::bit_cast<std::uint32_t>(kFloMagic));
    put_u32(bytes, std::uint32_t(flow.w()));
    put_u32(bytes, std::uint32_t(flow.h()));
    for (int y = 0; y < flow.h(); ++y)
        for (int x = 0; x < flow.w(); ++x) {
            put_u32(bytes, std::bit_cast<std::uint32_t>(float(flow.u(0, y, x))));
            put_u32(bytes, std::bit_cast<std::uint32_t>(float(flow.v(0, y, x))));
        }
    atomic_write_file(path, bytes);
}

}  // namespace fgwarp
