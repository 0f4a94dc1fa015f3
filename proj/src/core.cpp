#include "pyraflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pyraflow {

namespace {

struct CellWeights {
    int u0, u1, v0, v1;
    Scalar fu, fv;
    bool u_clamped, v_clamped;
};

// Shared corner/weight computation for sampling and its derivative.
// Coordinates clamp to [0, W-1] x [0, H-1]; the cell is right-sided at
// integers, with the +1 corner folded back onto the border when it would
// leave the grid (its weight is zero there).
CellWeights cell_weights(int height, int width, Scalar u, Scalar v) {
    CellWeights cw;
    cw.u_clamped = (u < 0.0) || (u > width - 1);
    cw.v_clamped = (v < 0.0) || (v > height - 1);
    u = std::clamp<Scalar>(u, 0.0, width - 1);
    v = std::clamp<Scalar>(v, 0.0, height - 1);
    cw.u0 = static_cast<int>(std::floor(u));
    cw.v0 = static_cast<int>(std::floor(v));
    cw.u1 = std::min(cw.u0 + 1, width - 1);
    cw.v1 = std::min(cw.v0 + 1, height - 1);
    cw.fu = u - cw.u0;
    cw.fv = v - cw.v0;
    return cw;
}

void check_nonempty(const Image& img) {
    if (img.height <= 0 || img.width <= 0 || img.channels <= 0)
        throw std::invalid_argument("image must be non-empty");
}

}  // namespace

Scalar bilinear_sample(const Image& img, Scalar u, Scalar v, int c) {
    check_nonempty(img);
    const CellWeights cw = cell_weights(img.height, img.width, u, v);
    const Scalar top = (1.0 - cw.fu) * img.at(cw.v0, cw.u0, c) + cw.fu * img.at(cw.v0, cw.u1, c);
    const Scalar bot = (1.0 - cw.fu) * img.at(cw.v1, cw.u0, c) + cw.fu * img.at(cw.v1, cw.u1, c);
    return (1.0 - cw.fv) * top + cw.fv * bot;
}

GradientPair bilinear_sample_grad(const Image& img, Scalar u, Scalar v, int c) {
    check_nonempty(img);
    const CellWeights cw = cell_weights(img.height, img.width, u, v);
    const Scalar f00 = img.at(cw.v0, cw.u0, c);
    const Scalar f10 = img.at(cw.v0, cw.u1, c);
    const Scalar f01 = img.at(cw.v1, cw.u0, c);
    const Scalar f11 = img.at(cw.v1, cw.u1, c);
    GradientPair g;
    g.du = cw.u_clamped ? 0.0 : (1.0 - cw.fv) * (f10 - f00) + cw.fv * (f11 - f01);
    g.dv = cw.v_clamped ? 0.0 : (1.0 - cw.fu) * (f01 - f00) + cw.fu * (f11 - f10);
    return g;
}

void bilinear_sample_flow(const FlowField& flow, Scalar u, Scalar v,
                          Scalar& out_u, Scalar& out_v) {
    if (flow.height <= 0 || flow.width <= 0)
        throw std::invalid_argument("flow field must be non-empty");
    const CellWeights cw = cell_weights(flow.height, flow.width, u, v);
    const Scalar w00 = (1.0 - cw.fu) * (1.0 - cw.fv);
    const Scalar w10 = cw.fu * (1.0 - cw.fv);
    const Scalar w01 = (1.0 - cw.fu) * cw.fv;
    const Scalar w11 = cw.fu * cw.fv;
    out_u = w00 * flow.u(cw.v0, cw.u0) + w10 * flow.u(cw.v0, cw.u1) +
            w01 * flow.u(cw.v1, cw.u0) + w11 * flow.u(cw.v1, cw.u1);
    out_v = w00 * flow.v(cw.v0, cw.u0) + w10 * flow.v(cw.v0, cw.u1) +
            w01 * flow.v(cw.v1, cw.u0) + w11 * flow.v(cw.v1, cw.u1);
}

Image warp_image(const Image& src, const FlowField& flow) {
    check_nonempty(src);
    if (flow.height != src.height || flow.width != src.width)
        throw std::invalid_argument("warp_image: flow and image dims differ");
    Image out(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            const Scalar px = x + flow.u(y, x);
            const Scalar py = y + flow.v(y, x);
            for (int c = 0; c < src.channels; ++c)
                out.at(y, x, c) = bilinear_sample(src, px, py, c);
        }
    }
    return out;
}

Pyramid build_pyramid(const Image& img, int n_levels) {
    check_nonempty(img);
    if (n_levels < 1)
        throw std::invalid_argument("build_pyramid: need at least one level");
    Pyramid pyr;
    pyr.levels.reserve(n_levels);
    pyr.levels.push_back(img);
    for (int l = 1; l < n_levels; ++l) {
        const Image& prev = pyr.levels.back();
        const int h = (prev.height + 1) / 2;
        const int w = (prev.width + 1) / 2;
        Image next(h, w, prev.channels);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int y1 = std::min(2 * y + 2, prev.height);
                const int x1 = std::min(2 * x + 2, prev.width);
                const int n = (y1 - 2 * y) * (x1 - 2 * x);
                for (int c = 0; c < prev.channels; ++c) {
                    Scalar sum = 0.0;
                    for (int yy = 2 * y; yy < y1; ++yy)
                        for (int xx = 2 * x; xx < x1; ++xx)
                            sum += prev.at(yy, xx, c);
                    next.at(y, x, c) = sum / n;
                }
            }
        }
        pyr.levels.push_back(std::move(next));
    }
    return pyr;
}

FlowField upsample_flow(const FlowField& coarse) {
    return upsample_flow(coarse, coarse.height * 2, coarse.width * 2);
}

FlowField upsample_flow(const FlowField& coarse, int out_h, int out_w) {
    if (coarse.empty())
        throw std::invalid_argument("upsample_flow: empty input");
    if (out_h > 2 * coarse.height || out_w > 2 * coarse.width || out_h < 1 || out_w < 1)
        throw std::invalid_argument("upsample_flow: output dims must be in (0, 2*input]");
    FlowField fine(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const Scalar sv = (y + 0.5) / 2.0 - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const Scalar su = (x + 0.5) / 2.0 - 0.5;
            Scalar fu, fv;
            bilinear_sample_flow(coarse, su, sv, fu, fv);
            fine.u(y, x) = 2.0 * fu;
            fine.v(y, x) = 2.0 * fv;
        }
    }
    return fine;
}

FlowField upsample_flow_adjoint(const FlowField& fine_grad, int coarse_h, int coarse_w) {
    if (fine_grad.empty())
        throw std::invalid_argument("upsample_flow_adjoint: empty input");
    if (fine_grad.height > 2 * coarse_h || fine_grad.width > 2 * coarse_w)
        throw std::invalid_argument("upsample_flow_adjoint: coarse dims too small");
    FlowField out(coarse_h, coarse_w);
    for (int y = 0; y < fine_grad.height; ++y) {
        const Scalar sv = (y + 0.5) / 2.0 - 0.5;
        for (int x = 0; x < fine_grad.width; ++x) {
            const Scalar su = (x + 0.5) / 2.0 - 0.5;
            const CellWeights cw = cell_weights(coarse_h, coarse_w, su, sv);
            const Scalar w00 = (1.0 - cw.fu) * (1.0 - cw.fv);
            const Scalar w10 = cw.fu * (1.0 - cw.fv);
            const Scalar w01 = (1.0 - cw.fu) * cw.fv;
            const Scalar w11 = cw.fu * cw.fv;
            const Scalar gu = 2.0 * fine_grad.u(y, x);
            const Scalar gv = 2.0 * fine_grad.v(y, x);
            out.u(cw.v0, cw.u0) += w00 * gu;
            out.v(cw.v0, cw.u0) += w00 * gv;
            out.u(cw.v0, cw.u1) += w10 * gu;
            out.v(cw.v0, cw.u1) += w10 * gv;
            out.u(cw.v1, cw.u0) += w01 * gu;
            out.v(cw.v1, cw.u0) += w01 * gv;
            out.u(cw.v1, cw.u1) += w11 * gu;
            out.v(cw.v1, cw.u1) += w11 * gv;
        }
    }
    return out;
}

}  // namespace pyraflow
