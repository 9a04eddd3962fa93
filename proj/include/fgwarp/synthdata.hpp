// Deterministic synthetic moving-shadow videos with exact ground truth.
// A scene is a static smooth random texture plus moving darkening primitives
// (ellipses / rectangles) with integer per-frame velocities. Masks are the
// union of primitive supports; the stored flow field for the pair (t, t+1)
// lives on frame t+1's grid and is exact: warping frame t's mask by it
// reproduces frame t+1's mask bit-for-bit.
//
// Primitives bounce off the canvas edges (the velocity component flips before
// a step that would push the footprint outside), so footprints never clip and
// the flow/mask-shift exactness holds for every consecutive pair.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgwarp/flowwarp.hpp"
#include "fgwarp/rng.hpp"
#include "fgwarp/tensor.hpp"

namespace fgwarp {

struct ShadowPrimitive {
    enum class Kind { ellipse, rectangle };
    Kind kind = Kind::ellipse;
    double cx = 0.0, cy = 0.0;  // center at frame 0, pixel coordinates
    double ax = 1.0, ay = 1.0;  // semi-axes (ellipse) / half-extents (rectangle)
    double darken = 0.5;        // multiplicative factor applied inside, in (0,1)
    int vx = 0, vy = 0;         // integer velocity in pixels per frame
};

struct SceneSpec {
    int height = 64, width = 64;
    std::uint64_t texture_seed = 1;  // also seeds the per-frame noise stream
    std::vector<ShadowPrimitive> primitives;
    int frame_count = 2;
    double noise_amp = 0.0;  // i.i.d. uniform [-amp, amp] added per frame pixel
    // odd-frame contrast scale in (0, 1]: on odd frame indices the applied
    // darken factor becomes 1 - flicker*(1 - darken), so values below 1 make
    // the shadow fade every other frame while masks and flow stay exact
    double flicker = 1.0;

    void validate() const;
};

struct RenderedVideo {
    std::vector<Tensor4> frames;    // (1,3,h,w), values in [0,1]
    std::vector<Tensor4> masks;     // (1,1,h,w), exactly 0 or 1
    std::vector<FlowField> flows;   // flows[t] is the (t, t+1) field on t+1's grid
    std::vector<int> areas;         // frame-0 footprint pixel count per primitive
};

RenderedVideo render_video(const SceneSpec& spec);

// named generator presets for the CLI and the end-to-end experiments:
//   default      medium primitives, velocities 1-2 px/frame
//   small-shadow every primitive covers < 2% of the canvas
//   fast-motion  every primitive moves >= 4 px/frame on some axis and its
//                shadow flickers: odd frames keep only a quarter of the
//                contrast, so single-frame evidence is weak there
SceneSpec make_scene(const std::string& preset, int size, int frame_count, Rng& rng);

}  // namespace fgwarp
