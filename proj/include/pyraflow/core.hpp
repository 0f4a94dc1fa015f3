#pragma once

#include <cstdint>
#include <vector>

namespace pyraflow {

using Scalar = double;

/// Dense image, row-major, channel-innermost: data[(y*width + x)*channels + c].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<Scalar> data;

    Image() = default;
    Image(int h, int w, int c = 1, Scalar fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {}

    Scalar& at(int y, int x, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    Scalar at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
};

/// Dense flow field, u = horizontal displacement (columns), v = vertical (rows).
/// Layout: data[(y*width + x)*2 + {0:u, 1:v}].
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<Scalar> data;

    FlowField() = default;
    FlowField(int h, int w, Scalar u0 = 0.0, Scalar v0 = 0.0)
        : height(h), width(w), data(static_cast<size_t>(h) * w * 2, 0.0) {
        if (u0 != 0.0 || v0 != 0.0) {
            for (size_t i = 0; i < data.size(); i += 2) {
                data[i] = u0;
                data[i + 1] = v0;
            }
        }
    }

    Scalar& u(int y, int x) { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    Scalar u(int y, int x) const { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    Scalar& v(int y, int x) { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    Scalar v(int y, int x) const { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    size_t pixels() const { return static_cast<size_t>(height) * width; }
    bool empty() const { return data.empty(); }
};

/// Binary grid (validity masks, indicators). 1 = set, 0 = clear.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    Mask() = default;
    Mask(int h, int w, uint8_t fill = 0)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t count() const {
        size_t n = 0;
        for (uint8_t m : data) n += (m != 0);
        return n;
    }
};

/// Image pyramid. levels[0] is the finest; each coarser level is a 2x2 block
/// mean with ceil division on the spatial size.
struct Pyramid {
    std::vector<Image> levels;
    int factor = 2;
};

/// Partial derivatives of a sampled value w.r.t. the sample coordinates.
struct GradientPair {
    Scalar du = 0.0;
    Scalar dv = 0.0;
};

/// Bilinear sample of channel c at (u, v); coordinates are clamped to the
/// image border, so out-of-bounds probes replicate the nearest edge value.
Scalar bilinear_sample(const Image& img, Scalar u, Scalar v, int c = 0);

/// Analytic derivative of bilinear_sample w.r.t. (u, v). At integer
/// coordinates the right-sided cell is used; in the clamped region the
/// clamped direction contributes zero.
GradientPair bilinear_sample_grad(const Image& img, Scalar u, Scalar v, int c = 0);

/// Bilinear sample of a flow field (both components).
void bilinear_sample_flow(const FlowField& flow, Scalar u, Scalar v,
                          Scalar& out_u, Scalar& out_v);

/// Backward warp: out(x) = src(x + flow(x)), bilinear with border clamp.
Image warp_image(const Image& src, const FlowField& flow);

/// Mean-pooling pyramid with n_levels entries (level 0 = the input itself).
/// Border blocks that are clipped by an odd size average over the pixels
/// actually present.
Pyramid build_pyramid(const Image& img, int n_levels);

/// 2x upsampling of a flow field with bilinear interpolation at half-pixel
/// centers; vector values are doubled so displacements stay in pixel units
/// of the finer grid. The overload with explicit dims crops to (out_h, out_w)
/// for odd-sized finer levels.
FlowField upsample_flow(const FlowField& coarse);
FlowField upsample_flow(const FlowField& coarse, int out_h, int out_w);

/// Adjoint of upsample_flow: scatters a gradient w.r.t. the fine field back
/// to the coarse grid with the same weights and the same factor 2.
FlowField upsample_flow_adjoint(const FlowField& fine_grad, int coarse_h, int coarse_w);

}  // namespace pyraflow
