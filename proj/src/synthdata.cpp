#include "fgwarp/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "fgwarp/ops.hpp"

namespace fgwarp {

namespace {

// integer pixel offsets covered by a primitive, relative to an integer anchor.
// Footprints at later frames are this set translated by the accumulated
// integer displacement, so mask shifts are exact by construction.
struct Footprint {
    std::vector<std::pair<int, int>> offsets;  // (dy, dx)
};

bool inside(const ShadowPrimitive& p, double rx, double ry) {
    if (p.kind == ShadowPrimitive::Kind::rectangle)
        return std::abs(rx) <= p.ax && std::abs(ry) <= p.ay;
    const double nx = rx / p.ax, ny = ry / p.ay;
    return nx * nx + ny * ny <= 1.0;
}

Footprint rasterize(const ShadowPrimitive& p, int anchor_x, int anchor_y) {
    Footprint f;
    const int x0 = int(std::ceil(p.cx - p.ax)), x1 = int(std::floor(p.cx + p.ax));
    const int y0 = int(std::ceil(p.cy - p.ay)), y1 = int(std::floor(p.cy + p.ay));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (inside(p, x - p.cx, y - p.cy)) f.offsets.emplace_back(y - anchor_y, x - anchor_x);
    return f;
}

// reflect the velocity component when the next step would push the footprint
// past the canvas walls; validate() guarantees the flipped step lands inside
void step_axis(double& c, int& v, double lo, double hi) {
    const double next = c + v;
    if (next < lo || next > hi) v = -v;
    c += v;
}

Tensor4 smooth_texture(int h, int w, Rng& rng) {
    const int ch = std::max(2, h / 8 + 1), cw = std::max(2, w / 8 + 1);
    Tensor4 coarse(1, 3, ch, cw);
    for (std::size_t i = 0; i < coarse.size(); ++i) coarse.data()[i] = rng.uniform(0.25, 0.95);
    return ops::resize_bilinear(coarse, h, w);
}

}  // namespace

void SceneSpec::validate() const {
    require(height >= 4 && width >= 4, "SceneSpec: canvas must be at least 4x4");
    require(frame_count >= 2, "SceneSpec: frame_count must be >= 2");
    require(noise_amp >= 0.0, "SceneSpec: noise_amp must be >= 0");
    require(flicker > 0.0 && flicker <= 1.0, "SceneSpec: flicker must lie in (0,1]");
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        const ShadowPrimitive& p = primitives[i];
        const std::string tag = "SceneSpec: primitive " + std::to_string(i);
        require(p.ax > 0.0 && p.ay > 0.0, tag + ": axes must be positive");
        require(p.darken > 0.0 && p.darken < 1.0, tag + ": darken must lie in (0,1)");
        const double lo_x = p.ax, hi_x = width - 1 - p.ax;
        const double lo_y = p.ay, hi_y = height - 1 - p.ay;
        require(hi_x >= lo_x && hi_y >= lo_y, tag + ": primitive does not fit the canvas");
        require(p.cx >= lo_x && p.cx <= hi_x && p.cy >= lo_y && p.cy <= hi_y,
                tag + ": initial footprint leaves the canvas");
        // a reflected step must also land inside: bound the speed by half the
        // travel range per axis
        require(2.0 * std::abs(p.vx) <= hi_x - lo_x, tag + ": |vx| too large for the canvas");
        require(2.0 * std::abs(p.vy) <= hi_y - lo_y, tag + ": |vy| too large for the canvas");
    }
}

RenderedVideo render_video(const SceneSpec& spec) {
    spec.validate();
    const int h = spec.height, w = spec.width;
    const std::size_t np = spec.primitives.size();

    Rng rng(spec.texture_seed);
    const Tensor4 background = smooth_texture(h, w, rng);

    // per-primitive trajectory state: continuous center for the bounce walls,
    // integer anchor displacement for exact rasterization
    std::vector<Footprint> foot(np);
    std::vector<double> cx(np), cy(np);
    std::vector<int> vx(np), vy(np), ax_i(np), ay_i(np);
    RenderedVideo out;
    for (std::size_t i = 0; i < np; ++i) {
        const ShadowPrimitive& p = spec.primitives[i];
        ax_i[i] = int(std::floor(p.cx));
        ay_i[i] = int(std::floor(p.cy));
        foot[i] = rasterize(p, ax_i[i], ay_i[i]);
        cx[i] = p.cx;
        cy[i] = p.cy;
        vx[i] = p.vx;
        vy[i] = p.vy;
        out.areas.push_back(int(foot[i].offsets.size()));
    }

    // anchors[t][i] and steps[t][i] = anchor[t+1] - anchor[t]
    std::vector<std::vector<std::pair<int, int>>> anchors(std::size_t(spec.frame_count));
    std::vector<std::vector<std::pair<int, int>>> steps(std::size_t(spec.frame_count) - 1);
    for (int t = 0; t < spec.frame_count; ++t) {
        anchors[std::size_t(t)].resize(np);
        for (std::size_t i = 0; i < np; ++i) anchors[std::size_t(t)][i] = {ax_i[i], ay_i[i]};
        if (t + 1 == spec.frame_count) break;
        steps[std::size_t(t)].resize(np);
        for (std::size_t i = 0; i < np; ++i) {
            const ShadowPrimitive& p = spec.primitives[i];
            step_axis(cx[i], vx[i], p.ax, w - 1 - p.ax);
            step_axis(cy[i], vy[i], p.ay, h - 1 - p.ay);
            steps[std::size_t(t)][i] = {vx[i], vy[i]};
            ax_i[i] += vx[i];
            ay_i[i] += vy[i];
        }
    }

    for (int t = 0; t < spec.frame_count; ++t) {
        Tensor4 frame = background;
        Tensor4 mask(1, 1, h, w);
        const double keep = t % 2 == 1 ? spec.flicker : 1.0;
        for (std::size_t i = 0; i < np; ++i) {
            const auto [ax, ay] = anchors[std::size_t(t)][i];
            const double factor = 1.0 - keep * (1.0 - spec.primitives[i].darken);
            for (const auto& [dy, dx] : foot[i].offsets) {
                const int y = ay + dy, x = ax + dx;
                for (int c = 0; c < 3; ++c) frame.at(0, c, y, x) *= factor;
                mask.at(0, 0, y, x) = 1.0;
            }
        }
        if (spec.noise_amp > 0.0) {
            for (std::size_t k = 0; k < frame.size(); ++k) {
                double v = frame.data()[k] + rng.uniform(-spec.noise_amp, spec.noise_amp);
                frame.data()[k] = std::clamp(v, 0.0, 1.0);
            }
        }
        out.frames.push_back(std::move(frame));
        out.masks.push_back(std::move(mask));
    }

    // the (t, t+1) field lives on frame t+1's grid: a pixel inside a footprint
    // union points back to where that content sat at frame t (offset -step).
    // Pixels covered at t+1 take the covering primitive's step so the warped
    // mask is exact there; list order breaks ties elsewhere.
    for (int t = 0; t + 1 < spec.frame_count; ++t) {
        FlowField flow(1, h, w);
        // pass 0 covers every vacated frame-t footprint, pass 1 every frame-t+1
        // footprint; the second sweep runs last so a pixel still shadowed at
        // t+1 always carries a covering primitive's step
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < np; ++i) {
                const auto [sx, sy] = steps[std::size_t(t)][i];
                const auto [ax, ay] = pass == 0 ? anchors[std::size_t(t)][i]
                                                : anchors[std::size_t(t) + 1][i];
                for (const auto& [dy, dx] : foot[i].offsets) {
                    const int y = ay + dy, x = ax + dx;
                    flow.u(0, y, x) = double(-sx);
                    flow.v(0, y, x) = double(-sy);
                }
            }
        }
        out.flows.push_back(std::move(flow));
    }
    return out;
}

SceneSpec make_scene(const std::string& preset, int size, int frame_count, Rng& rng) {
    require(preset == "default" || preset == "small-shadow" || preset == "fast-motion",
            "make_scene: unknown preset '" + preset + "'");
    require(size >= 24, "make_scene: canvas size must be >= 24");

    SceneSpec spec;
    spec.height = spec.width = size;
    spec.frame_count = frame_count;
    spec.texture_seed = rng.next_u64();
    spec.noise_amp = 0.02;

    // one primitive per video keeps every footprint interaction-free, so the
    // stored flow reproduces the next mask exactly for all consecutive pairs
    ShadowPrimitive p;
    p.kind = rng.uniform_int(0, 1) == 0 ? ShadowPrimitive::Kind::ellipse
                                        : ShadowPrimitive::Kind::rectangle;
    if (preset == "fast-motion") {
        // the temporal-stress preset: the shadow fades to a quarter of its
        // contrast on every other frame, so under noise those frames carry too
        // little evidence on their own and the aligned neighbor view is what
        // recovers them; the large step exercises warping
        p.darken = rng.uniform(0.40, 0.55);
        spec.noise_amp = 0.055;
        spec.flicker = 0.25;
    } else {
        p.darken = rng.uniform(0.35, 0.65);
    }

    if (preset == "small-shadow") {
        // (2a+1)^2 below 2% of the canvas even after rasterization rounding
        const double cap = 0.5 * (std::sqrt(0.018 * size * size) - 1.0);
        p.ax = rng.uniform(1.5, cap);
        p.ay = rng.uniform(1.5, cap);
    } else if (preset == "fast-motion") {
        // large primitives: the exchange weights w2 start at zero and only
        // shadow pixels push them open, so the flicker signal needs weight
        p.ax = rng.uniform(0.18, 0.26) * size;
        p.ay = rng.uniform(0.18, 0.26) * size;
    } else {
        p.ax = rng.uniform(0.10, 0.16) * size;
        p.ay = rng.uniform(0.10, 0.16) * size;
    }

    auto draw_slow = [&] { return int(rng.uniform_int(0, 1) == 0 ? -1 : 1) *
                                  int(rng.uniform_int(1, 2)); };
    if (preset == "fast-motion") {
        const int fast = int(rng.uniform_int(0, 1) == 0 ? -1 : 1) * int(rng.uniform_int(4, 6));
        if (rng.uniform_int(0, 1) == 0) {
            p.vx = fast;
            p.vy = draw_slow();
        } else {
            p.vx = draw_slow();
            p.vy = fast;
        }
    } else {
        p.vx = draw_slow();
        p.vy = draw_slow();
    }
    // keep the speed legal for the bounce rule on this canvas
    const int max_vx = int(std::floor((size - 1 - 2.0 * p.ax) / 2.0));
    const int max_vy = int(std::floor((size - 1 - 2.0 * p.ay) / 2.0));
    p.vx = std::clamp(p.vx, -max_vx, max_vx);
    p.vy = std::clamp(p.vy, -max_vy, max_vy);

    p.cx = rng.uniform(p.ax, size - 1 - p.ax);
    p.cy = rng.uniform(p.ay, size - 1 - p.ay);
    spec.primitives.push_back(p);
    return spec;
}

}  // namespace fgwarp
