#pragma once

#include "pyraflow/core.hpp"

namespace pyraflow {

/// Per-pixel non-negative loss values with a validity mask. Losses at
/// invalid pixels are kept at zero.
struct PixelLossMap {
    int height = 0;
    int width = 0;
    std::vector<Scalar> loss;
    Mask valid;

    PixelLossMap() = default;
    PixelLossMap(int h, int w)
        : height(h), width(w), loss(static_cast<size_t>(h) * w, 0.0), valid(h, w, 1) {}

    Scalar& at(int y, int x) { return loss[static_cast<size_t>(y) * width + x]; }
    Scalar at(int y, int x) const { return loss[static_cast<size_t>(y) * width + x]; }
};

struct PoolConfig {
    Scalar alpha_keep = 0.75;  // fraction of valid pixels that carry weight
};

struct CombineConfig {
    Scalar alpha = 0.9;  // weight of the supervised term
};

/// Euclidean endpoint error per pixel, masked: invalid pixels carry zero loss.
PixelLossMap epe_loss_map(const FlowField& pred, const FlowField& gt, const Mask& valid);

/// Weight assignment of the capped linear program
///   max { sum_x w_x l_x : ||w||_1 <= 1, ||w||_inf <= 1/(alpha_keep * N) }
/// over the N valid pixels: weights fill the largest losses first (ties by
/// row-major pixel index), each up to the cap, until the unit budget is
/// spent. Invalid pixels get weight zero. Throws if no pixel is valid.
std::vector<Scalar> pool_weights(const PixelLossMap& map, const PoolConfig& cfg);

/// The pooled loss sum_x w_x l_x for the weights above.
Scalar pooled_loss(const PixelLossMap& map, const PoolConfig& cfg);

/// Marks invalid every pixel whose ground-truth residual exceeds the search
/// range in either component, so unreachable targets do not pollute the loss.
Mask in_range_mask(const FlowField& residual, int delta);

/// Rescales losses by total/valid pixel count, so sparsely annotated frames
/// weigh like dense ones. No valid pixels: returned unchanged.
PixelLossMap sparse_rescale(const PixelLossMap& map);

/// Convex combination alpha * supervised + (1 - alpha) * distilled.
Scalar combine_losses(Scalar supervised, Scalar distilled, const CombineConfig& cfg);

/// Supervised branch: EPE against annotated ground truth, restricted to
/// pixels that are both annotated and within reach of the search range,
/// sparsity-rescaled, then weight-pooled.
Scalar supervised_loss(const FlowField& pred, const FlowField& gt, const Mask& gt_valid,
                       int delta, const PoolConfig& cfg);

/// Distilled branch: plain sparsity-rescaled mean EPE against a pseudo label.
/// Deliberately has no pooling knob; pooling applies to the supervised
/// branch only.
Scalar distill_loss(const FlowField& pred, const FlowField& pseudo_flow,
                    const Mask& pseudo_valid);

}  // namespace pyraflow
