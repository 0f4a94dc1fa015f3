#pragma once

#include "pyraflow/core.hpp"

namespace pyraflow {

/// Auxiliary fields derived from a bidirectional flow pair, all expressed on
/// the grid of the first image of the pair.
struct CueStack {
    FlowField fb_flow;    // backward flow sampled at the forward target, negated
    FlowField rev_flow;   // reversed counter-flow from forward splatting
    Image density;        // splat normalizer: how much mass landed on each pixel
    Mask out_of_image;    // 1 where the forward flow leaves the frame
};

/// F(x) = -F_ba(x + F_ab(x)): the counter-directional flow pulled to this
/// frame by bilinear sampling at the forward target.
FlowField fwd_bwd_warp(const FlowField& flow_ab, const FlowField& flow_ba);

/// Reverses a flow field by forward splatting: every source pixel deposits
/// its (negated) flow onto the up-to-four integer neighbors of its target
/// with bilinear hat weights; deposits are normalized by the accumulated
/// weight. Pixels that receive no mass get flow zero. Targets outside the
/// image are dropped. Accumulation order is fixed (row-major sources), so
/// results are reproducible bit for bit.
/// Returns the reversed flow and the weight accumulator.
void reverse_flow(const FlowField& flow_ba, FlowField& out_rev, Image& out_density);

/// The splat normalizer alone: a soft count of how many source pixels map
/// onto each target pixel (1 = uniquely covered, 0 = vacated, >1 = contested).
Image uniqueness_density(const FlowField& flow_ba);

/// 1 where x + F(x) falls outside [0, W-1] x [0, H-1].
Mask out_of_image(const FlowField& flow);

/// Assembles the cue stack for the a->b direction from the flow pair
/// (forward flow_ab, counter-directional flow_ba). Calling with the
/// arguments swapped yields the mirrored stack for the other direction.
CueStack build_cue_stack(const FlowField& flow_ab, const FlowField& flow_ba);

}  // namespace pyraflow
