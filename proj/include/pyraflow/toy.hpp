#pragma once

#include <cstdint>
#include <vector>

#include "pyraflow/cost_volume.hpp"
#include "pyraflow/diagnostics.hpp"

namespace pyraflow {

enum class SceneKind {
    box_and_dot,  // textured box drifting over a flat canvas, a 2-px dipole inside
                  // it moving the other way
    translation,  // the whole frame translates by one integer vector
    tug_of_war,   // drifting wave background plus pool-cancelled column-dipole
                  // stripes moving against it
};

enum class WaveShape {
    sine,      // smooth; generic values, so single-pixel matches are unambiguous
    triangle,  // piecewise linear; constant |slope|, so sign-based descent never
               // stalls, but matching has exact ties (use sine for matching tests)
};

/// Parameters of a generated scene. All motions are integer pixel offsets at
/// the finest level. The same seed always yields the same scene.
struct SceneSpec {
    SceneKind kind = SceneKind::box_and_dot;
    int height = 32;
    int width = 32;
    uint32_t seed = 1;

    // motion of the large structure (box / whole frame / wave background)
    int bg_u = 2, bg_v = 0;
    // motion of the small structure (dipole dot / line)
    int obj_u = -2, obj_v = 0;

    // box_and_dot: flat canvas, box of continuous random texture, and a
    // vertical two-pixel dipole (top = texture + contrast, bottom = texture -
    // contrast). dot_row must be even and dot_row/dot_col default (-1) to a
    // spot a few pixels inside the box's left edge.
    Scalar canvas_value = 1.0;
    int box_top = 8, box_left = 8, box_size = 16;
    Scalar texture_lo = 3.0, texture_hi = 6.0;
    int dot_row = -1, dot_col = -1;
    Scalar dot_contrast = 16.0;

    // translation / tug_of_war: periodic wave background with random phases;
    // integer motion renders exactly because the texture is evaluated
    // analytically per frame. A non-negative wave_phase_x/y pins that axis's
    // phase instead of drawing it from the seed (useful to keep wave ridges
    // away from the frame border, where their pooled values have no reachable
    // match and per-pixel optima stop being unique).
    WaveShape wave_shape = WaveShape::sine;
    Scalar wave_period = 16.0;
    Scalar wave_phase_x = -1.0;
    Scalar wave_phase_y = -1.0;
    Scalar wave_amp = 1.0;
    // amplitude of the y wave; negative means "same as wave_amp". Zero gives a
    // texture that varies only along x, which keeps descent gradients free of
    // vertical components when the scene motion is horizontal.
    Scalar wave_amp_y = -1.0;
    Scalar wave_base = 3.0;

    // tug_of_war: full-height column-dipole stripes (left column = bg +
    // contrast, right column = bg - contrast) repeated every line_stride
    // columns starting at line_col. Both must be even so each stripe fills 2x2
    // pooling blocks exactly and its contrast cancels at the coarse level. The
    // stripes are contrast overlays riding the current frame's background, so
    // the pooled image is exactly the pooled background in both frames; their
    // own values therefore shift with the background, and a stripe's
    // frame-to-frame match is close but not bit-exact.
    int line_col = 2, line_stride = 4;
    Scalar line_contrast = 20.0;
};

SceneSpec make_box_and_dot_spec(uint32_t seed);
SceneSpec make_translation_spec(uint32_t seed, int u = 2, int v = -2);
SceneSpec make_tug_of_war_spec(uint32_t seed);

/// A rendered scene pair. gt holds the motion of the frame-1 owner of each
/// pixel; occluded marks frame-1 pixels whose in-frame target is covered by a
/// different layer in frame 2 (so the re-render identity cannot hold there).
struct SyntheticScene {
    Image img1;
    Image img2;
    FlowField gt;
    Mask object_mask;  // pixels owned by the small structure in frame 1
    Mask occluded;
    SceneSpec spec;
};

/// Deterministic layered renderer: frame 2 repaints every layer displaced by
/// its own motion, carrying frame-1 appearance, topmost layer winning.
SyntheticScene gen_scene(const SceneSpec& spec);

enum class MatchMode { warp, sample };
enum class MatchDistance { corr, sad };

CostMode to_cost_mode(MatchMode mode, MatchDistance distance);

struct SolveConfig {
    int n_levels = 2;
    int delta = 4;
    MatchMode mode = MatchMode::sample;
    MatchDistance distance = MatchDistance::sad;
    bool stop_gradient = false;
    Scalar step = 0.05;
    int iters = 200;
    // initial value of the coarse flow for the descent solver
    Scalar coarse_init_u = 0.0;
    Scalar coarse_init_v = 0.0;
};

/// Per-pixel winner-take-all pick over the search window: best cost wins
/// (smallest for sad, largest for corr), exact ties prefer the smaller
/// |offset|^2 and then the earlier offset in row-major window order. The
/// winning offset is added to the incoming flow.
FlowField wta_single_level(const Image& img1, const Image& img2,
                           const FlowField& incoming, const SearchRange& range,
                           MatchMode mode, MatchDistance distance);

/// Coarse-to-fine WTA: zero flow at the coarsest level, then each finer level
/// refines the upsampled previous result within the same search range.
FlowField coarse_to_fine_wta(const Image& img1, const Image& img2,
                             const SolveConfig& cfg);

struct DescentResult {
    GradTrace trace;
    FlowField coarse_flow;    // F0 after the last update
    FlowField fine_residual;  // R1 after the last update
    FlowField fine_flow;      // upsample(F0) + R1
    Scalar final_loss_coarse = 0.0;
    Scalar final_loss_fine = 0.0;
    // mean per-iteration ncc over iterations where both partials had
    // non-negligible norm; 0 if every iteration was degenerate
    Scalar mean_ncc = 0.0;
    std::vector<FlowField> coarse_trajectory;  // F0 after each update
};

/// Joint gradient descent on L0(F0) + L1(upsample(F0) + R1), each level's
/// loss being the summed single-offset SAD cost of its current flow. The
/// trace records, per iteration, the direct partial dL0/dF0 and the via-flow
/// partial dL1/dF0 (pushed through the upsampling adjoint). stop_gradient
/// removes the via-flow term from F0's update; both partials are still
/// recorded. Divergence (non-finite loss or flow) aborts the run and is
/// reported with its iteration index.
DescentResult two_level_descent(const Image& img1, const Image& img2,
                                const SolveConfig& cfg);

/// The coarse objective optimized alone, same update rule. With stop_gradient
/// set, two_level_descent's F0 trajectory must match this bit for bit.
DescentResult coarse_only_descent(const Image& img1, const Image& img2,
                                  const SolveConfig& cfg);

}  // namespace pyraflow
