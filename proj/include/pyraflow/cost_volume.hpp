#pragma once

#include "pyraflow/core.hpp"

namespace pyraflow {

/// Square displacement search window [-delta, delta]^2.
struct SearchRange {
    int delta = 4;
    int side() const { return 2 * delta + 1; }
    int count() const { return side() * side(); }
};

/// Matching costs per pixel and per integer offset. Offsets are stored
/// innermost in row-major offset order (dv outer, du inner):
/// data[(y*width + x)*count + (dv+delta)*side + (du+delta)].
struct CostVolume {
    int height = 0;
    int width = 0;
    int delta = 0;
    std::vector<Scalar> data;

    CostVolume() = default;
    CostVolume(int h, int w, int d)
        : height(h), width(w), delta(d),
          data(static_cast<size_t>(h) * w * (2 * d + 1) * (2 * d + 1), 0.0) {}

    int side() const { return 2 * delta + 1; }
    int count() const { return side() * side(); }
    Scalar& at(int y, int x, int dv, int du) {
        return data[(static_cast<size_t>(y) * width + x) * count() +
                    static_cast<size_t>(dv + delta) * side() + (du + delta)];
    }
    Scalar at(int y, int x, int dv, int du) const {
        return data[(static_cast<size_t>(y) * width + x) * count() +
                    static_cast<size_t>(dv + delta) * side() + (du + delta)];
    }
};

/// Per-pixel gradient of a scalar matching cost w.r.t. the incoming coarse
/// flow; same layout as FlowField with components (d/du, d/dv).
struct FlowGradField {
    int height = 0;
    int width = 0;
    std::vector<Scalar> data;

    FlowGradField() = default;
    FlowGradField(int h, int w)
        : height(h), width(w), data(static_cast<size_t>(h) * w * 2, 0.0) {}

    Scalar& du(int y, int x) { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    Scalar du(int y, int x) const { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    Scalar& dv(int y, int x) { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    Scalar dv(int y, int x) const { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    bool empty() const { return data.empty(); }
};

enum class CostMode {
    warp_corr,    // correlate against a pre-warped second image
    sample_corr,  // displace the sample coordinate by the flow at the reference pixel
    sample_sad,   // like sample_corr but L1 distance instead of dot product
    warp_sad,     // L1 distance against the pre-warped second image
};

/// Two-stage construction: first materialize the warped second image
/// (flow looked up at the probe position, border-replicated), then correlate
/// shifted copies. Costs are channel-averaged dot products.
CostVolume cv_warp_corr(const Image& img1, const Image& img2,
                        const FlowField& flow, const SearchRange& range);

/// One-stage construction: the probe coordinate is displaced by the flow at
/// the reference pixel itself. Channel-averaged dot products.
CostVolume cv_sample_corr(const Image& img1, const Image& img2,
                          const FlowField& flow, const SearchRange& range);

/// One-stage construction with channel-averaged absolute differences.
CostVolume cv_sample_sad(const Image& img1, const Image& img2,
                         const FlowField& flow, const SearchRange& range);

/// Two-stage construction with channel-averaged absolute differences.
CostVolume cv_warp_sad(const Image& img1, const Image& img2,
                       const FlowField& flow, const SearchRange& range);

CostVolume build_cost_volume(const Image& img1, const Image& img2,
                             const FlowField& flow, const SearchRange& range,
                             CostMode mode);

/// Gradient of the scalar sum_{x,delta} upstream(x,delta) * V(x,delta) w.r.t.
/// the incoming flow, for the given construction mode. In warp mode the
/// contribution of each probe scatters to the pixel whose flow it read.
/// With stop_gradient set the result is identically zero.
FlowGradField cv_grad_wrt_flow(const Image& img1, const Image& img2,
                               const FlowField& flow, const CostVolume& upstream,
                               CostMode mode, bool stop_gradient = false);

}  // namespace pyraflow
