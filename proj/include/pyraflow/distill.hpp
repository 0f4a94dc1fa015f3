#pragma once

#include <pyraflow/core.hpp>

namespace pyraflow {

/// Thresholds for the pseudo-label filter chain. All fields must be
/// non-negative; functions throw std::invalid_argument otherwise.
struct DistillConfig {
    Scalar occl_abs = 0.05;      // additive slack in the round-trip inequality
    Scalar occl_rel = 0.01;      // relative slack coefficient
    Scalar photo_thresh = 0.25;  // channel-mean SAD bound, [0,1] intensities
    Scalar conf_min = 0.95;      // inclusive lower bound on confidence
    Scalar gt_dist_max = 3.0;    // inclusive bound on distance to annotation
    int erosion_radius = 2;      // square structuring element radius
};

/// Teacher flow plus the per-pixel survivor set of the full filter chain.
struct PseudoGroundTruth {
    FlowField flow;
    Mask valid;
};

/// Forward-backward round-trip test. Pixel x passes (not occluded) iff
///   |f12(x) + f21(x + f12(x))|^2 - occl_abs < occl_rel * (|f12(x)|^2 + |f21(x + f12(x))|^2)
/// with f21 sampled bilinearly (border clamp) at the forward-mapped point.
/// The comparison is strict.
Mask occlusion_consistency(const FlowField& f12, const FlowField& f21,
                           const DistillConfig& cfg = {});

/// Channel-mean |img1(x) - img2(x + f12(x))| <= photo_thresh (inclusive),
/// img2 sampled bilinearly with border clamp.
Mask photometric_filter(const Image& img1, const Image& img2,
                        const FlowField& f12, const DistillConfig& cfg = {});

/// conf(x) >= conf_min (inclusive). conf must be single-channel.
Mask confidence_filter(const Image& conf, const DistillConfig& cfg = {});

/// Where an annotation exists: |teacher - gt|_2 <= gt_dist_max (inclusive).
/// Where gt_valid is clear the pixel passes; the filter only prunes against
/// annotations that are present.
Mask gt_distance_filter(const FlowField& teacher, const FlowField& gt,
                        const Mask& gt_valid, const DistillConfig& cfg = {});

/// Binary erosion with a (2r+1) x (2r+1) square window. Positions outside
/// the grid count as clear, so a border band of width r never survives.
/// radius 0 is the identity.
Mask erosion_prune(const Mask& mask, int radius);

/// Full chain: valid = erosion_prune(AND of all filters), flow = teacher.
/// conf may be null and gt/gt_valid may be null (either both or neither);
/// an absent input makes the corresponding filter pass everywhere.
PseudoGroundTruth make_pseudo_gt(const FlowField& teacher, const FlowField& f21,
                                 const Image& img1, const Image& img2,
                                 const Image* conf, const FlowField* gt,
                                 const Mask* gt_valid,
                                 const DistillConfig& cfg = {});

}  // namespace pyraflow
